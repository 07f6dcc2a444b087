// src/dsp.cc

// Copyright 2026 dcsep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "dcsep/dsp.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace dcsep {

VectorXd SqrtHannWindow(int length) {
  Require(length > 0, "invalid framing");
  VectorXd w(length);
  for (int n = 0; n < length; ++n)
    w[n] = std::sqrt(0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length));
  return w;
}

Spectrogram Stft(const Waveform &w, int window_len, int hop) {
  Require(window_len > 0 && hop > 0, "invalid framing");
  return Stft(w, window_len, hop, SqrtHannWindow(window_len));
}

Spectrogram Stft(const Waveform &w, int window_len, int hop,
                 const VectorXd &window) {
  Require(w.size() > 0, "empty input");
  Require(window_len > 0 && hop > 0 && hop <= window_len &&
              window.size() == window_len,
          "invalid framing");
  const Index n = w.size();
  Index frames = 1;
  if (n > window_len) frames += (n - window_len + hop - 1) / hop;
  const int half = window_len / 2;

  Spectrogram s;
  s.bins.resize(frames, half);
  s.nyquist.resize(frames);
  s.window_len = window_len;
  s.hop = hop;
  s.analysis_window = window;
  s.num_samples = n;
  s.sample_rate = w.sample_rate;

  Eigen::FFT<double> fft;
  std::vector<double> frame(window_len);
  std::vector<std::complex<double>> spec;
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * hop;
    for (int k = 0; k < window_len; ++k) {
      const Index idx = start + k;
      frame[k] = idx < n ? w.samples[idx] * window[k] : 0.0;
    }
    fft.fwd(spec, frame);
    for (int f = 0; f < half; ++f) s.bins(t, f) = spec[f];
    s.nyquist[t] = spec[half].real();
  }
  return s;
}

bool SatisfiesCola(const VectorXd &window, int hop) {
  if (hop <= 0 || hop > window.size()) return false;
  VectorXd acc = VectorXd::Zero(hop);
  for (Index k = 0; k < window.size(); ++k) acc[k % hop] += window[k] * window[k];
  const double ref = acc.maxCoeff();
  if (ref <= 0.0) return false;
  return (acc.array() - ref).abs().maxCoeff() <= 1e-10 * ref;
}

Waveform Istft(const Spectrogram &s) {
  Require(s.window_len > 0 && s.hop > 0 &&
              s.analysis_window.size() == s.window_len &&
              s.bins.cols() == s.window_len / 2 && s.window_len % 2 == 0,
          "invalid framing");
  Require(SatisfiesCola(s.analysis_window, s.hop), "non-invertible framing");
  const int len = s.window_len;
  const int half = len / 2;
  const Index frames = s.frames();
  const Index total = (frames - 1) * s.hop + len;

  VectorXd out = VectorXd::Zero(total);
  VectorXd norm = VectorXd::Zero(total);
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec(len);
  std::vector<double> frame;
  for (Index t = 0; t < frames; ++t) {
    for (int f = 0; f < half; ++f) spec[f] = s.bins(t, f);
    spec[half] = s.nyquist.size() == frames ? s.nyquist[t] : 0.0;
    spec[0] = spec[0].real();
    for (int f = 1; f < half; ++f) spec[len - f] = std::conj(spec[f]);
    fft.inv(frame, spec);
    const Index start = t * s.hop;
    for (int k = 0; k < len; ++k) {
      out[start + k] += frame[k] * s.analysis_window[k];
      norm[start + k] += s.analysis_window[k] * s.analysis_window[k];
    }
  }
  const double floor = 1e-8 * norm.maxCoeff();
  Waveform w;
  w.sample_rate = s.sample_rate;
  const Index n = s.num_samples > 0 ? std::min(s.num_samples, total) : total;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i)
    w.samples[i] = norm[i] > floor ? out[i] / norm[i] : 0.0;
  return w;
}

double LogMagnitudeFloor(const Spectrogram &s) {
  const double peak = s.bins.size() > 0 ? s.bins.cwiseAbs().maxCoeff() : 0.0;
  return peak > 0.0 ? 1e-8 * peak : 1e-8;
}

FeatureMatrix LogMagnitude(const Spectrogram &s, const NormalizationStats *stats) {
  const double eps = LogMagnitudeFloor(s);
  FeatureMatrix out;
  out.kind = FeatureKind::kLogMagnitude;
  out.rows = (s.bins.cwiseAbs().array() + eps).log10() * 20.0;
  if (stats != nullptr) Normalize(*stats, &out);
  return out;
}

NormalizationStats ComputeNormalization(std::span<const FeatureMatrix> feats) {
  Require(!feats.empty(), "no features for normalization");
  const Index dim = feats.front().rows.cols();
  VectorXd sum = VectorXd::Zero(dim);
  VectorXd sq = VectorXd::Zero(dim);
  double count = 0;
  for (const auto &f : feats) {
    Require(f.rows.cols() == dim, "feature dimension mismatch");
    sum += f.rows.colwise().sum().transpose();
    sq += f.rows.array().square().colwise().sum().matrix().transpose();
    count += static_cast<double>(f.rows.rows());
  }
  Require(count > 0, "no frames for normalization");
  NormalizationStats st;
  st.mean = sum / count;
  st.std = (sq / count - st.mean.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt()
               .cwiseMax(kStdFloor);
  return st;
}

void Normalize(const NormalizationStats &stats, FeatureMatrix *f) {
  Require(stats.mean.size() == f->rows.cols() && stats.std.size() == f->rows.cols(),
          "normalization dimension mismatch");
  f->rows = ((f->rows.rowwise() - stats.mean.transpose()).array().rowwise() /
             stats.std.transpose().array())
                .matrix();
}

namespace {

double HzToMel(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }

}  // namespace

MatrixXd MelFilterbank(int num_filters, int fft_len, int sample_rate,
                       double low_hz, double high_hz) {
  Require(num_filters > 0 && fft_len > 0 && sample_rate > 0, "invalid filterbank");
  if (high_hz <= 0.0) high_hz = 0.5 * sample_rate;
  const int bins = fft_len / 2 + 1;
  const double mlo = HzToMel(low_hz), mhi = HzToMel(high_hz);
  const double step = (mhi - mlo) / (num_filters + 1);
  MatrixXd fb = MatrixXd::Zero(num_filters, bins);
  for (int m = 0; m < num_filters; ++m) {
    const double left = mlo + m * step, center = left + step, right = center + step;
    for (int k = 0; k < bins; ++k) {
      const double mel = HzToMel(static_cast<double>(k) * sample_rate / fft_len);
      if (mel > left && mel < right)
        fb(m, k) = mel <= center ? (mel - left) / (center - left)
                                 : (right - mel) / (right - center);
    }
  }
  return fb;
}

VectorXd LogMelToCepstrum(const VectorXd &log_mel, int num_coeffs) {
  const Index m = log_mel.size();
  Require(num_coeffs >= 1 && num_coeffs <= m,
          "number of cepstral coefficients exceeds filter count");
  VectorXd c(num_coeffs);
  for (int k = 0; k < num_coeffs; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / m) : std::sqrt(2.0 / m);
    double acc = 0.0;
    for (Index j = 0; j < m; ++j)
      acc += log_mel[j] * std::cos(std::numbers::pi * k * (j + 0.5) / m);
    c[k] = scale * acc;
  }
  return c;
}

FeatureMatrix Mfcc(const Waveform &w, const MfccOptions &opts) {
  Require(opts.num_coeffs >= 1, "number of cepstral coefficients must be positive");
  Require(opts.num_coeffs <= opts.num_filters,
          "number of cepstral coefficients exceeds filter count");
  Require(opts.frame_len > 0 && opts.hop > 0 && opts.fft_len >= opts.frame_len,
          "invalid framing");
  Require(w.size() > 0, "empty input");
  const MatrixXd fb = MelFilterbank(opts.num_filters, opts.fft_len, w.sample_rate,
                                    opts.low_hz, opts.high_hz);
  VectorXd window(opts.frame_len);
  for (int n = 0; n < opts.frame_len; ++n)
    window[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / (opts.frame_len - 1));

  const Index n = w.size();
  Index frames = 1;
  if (n > opts.frame_len) frames += (n - opts.frame_len) / opts.hop;
  FeatureMatrix out;
  out.kind = FeatureKind::kMfcc;
  out.rows.resize(frames, opts.num_coeffs);

  Eigen::FFT<double> fft;
  std::vector<double> frame(opts.fft_len, 0.0);
  std::vector<std::complex<double>> spec;
  const int bins = opts.fft_len / 2 + 1;
  VectorXd power(bins);
  for (Index t = 0; t < frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const Index start = t * opts.hop;
    for (int k = 0; k < opts.frame_len; ++k) {
      const Index idx = start + k;
      frame[k] = idx < n ? w.samples[idx] * window[k] : 0.0;
    }
    fft.fwd(spec, frame);
    for (int k = 0; k < bins; ++k) power[k] = std::norm(spec[k]);
    const VectorXd log_mel = (fb * power).cwiseMax(1e-10).array().log().matrix();
    out.rows.row(t) = LogMelToCepstrum(log_mel, opts.num_coeffs).transpose();
  }
  return out;
}

std::vector<bool> EnergyVad(std::span<const double> frame_energy_db,
                            double threshold_db) {
  std::vector<bool> active(frame_energy_db.size(), false);
  if (frame_energy_db.empty()) return active;
  const double peak = *std::max_element(frame_energy_db.begin(), frame_energy_db.end());
  for (std::size_t t = 0; t < frame_energy_db.size(); ++t)
    active[t] = frame_energy_db[t] >= peak + threshold_db;
  return active;
}

std::vector<bool> EnergyVad(const Spectrogram &s, double threshold_db) {
  std::vector<double> e(s.frames());
  for (Index t = 0; t < s.frames(); ++t) {
    double acc = s.bins.row(t).cwiseAbs2().sum();
    if (s.nyquist.size() == s.frames()) acc += s.nyquist[t] * s.nyquist[t];
    e[t] = 10.0 * std::log10(acc + 1e-300);
  }
  return EnergyVad(e, threshold_db);
}

std::vector<bool> EnergyVad(const FeatureMatrix &f, double threshold_db) {
  std::vector<double> e(f.rows.rows());
  const double to_db = 10.0 / std::log(10.0);
  for (Index t = 0; t < f.rows.rows(); ++t) {
    if (f.kind == FeatureKind::kLogMagnitude) {
      e[t] = 10.0 * std::log10((f.rows.row(t).array() * (std::log(10.0) / 10.0)).exp().sum() + 1e-300);
    } else {
      // c0 = sqrt(M) * mean(log mel) for the orthonormal DCT; M is not stored,
      // so the 23-filter default is assumed.
      e[t] = f.rows(t, 0) / std::sqrt(23.0) * to_db;
    }
  }
  return EnergyVad(e, threshold_db);
}

std::vector<double> FrameEnergyDb(const Waveform &w, int frame_len, int hop) {
  Require(frame_len > 0 && hop > 0, "invalid framing");
  const Index n = w.size();
  Index frames = 1;
  if (n > frame_len) frames += (n - frame_len) / hop;
  std::vector<double> e(frames);
  for (Index t = 0; t < frames; ++t) {
    const Index start = t * hop;
    const Index len = std::max<Index>(0, std::min<Index>(frame_len, n - start));
    const double acc = len > 0 ? w.samples.segment(start, len).squaredNorm() : 0.0;
    e[t] = 10.0 * std::log10(acc + 1e-300);
  }
  return e;
}

FeatureMatrix SelectFrames(const FeatureMatrix &f, const std::vector<bool> &keep) {
  Require(static_cast<Index>(keep.size()) == f.rows.rows(), "frame mask size mismatch");
  const Index count = std::count(keep.begin(), keep.end(), true);
  FeatureMatrix out;
  out.kind = f.kind;
  out.rows.resize(count, f.rows.cols());
  Index r = 0;
  for (Index t = 0; t < f.rows.rows(); ++t)
    if (keep[t]) out.rows.row(r++) = f.rows.row(t);
  return out;
}

double Energy(const Waveform &w) { return w.samples.squaredNorm(); }

Mixture MixAtSnr(const Waveform &a, const Waveform &b, double snr_db) {
  Require(a.sample_rate == b.sample_rate, "sample rate mismatch");
  const Index n = std::min(a.size(), b.size());
  Require(n > 0, "empty input");
  Mixture m;
  m.scaled_a.sample_rate = m.scaled_b.sample_rate = m.mixture.sample_rate = a.sample_rate;
  m.scaled_a.samples = a.samples.head(n);
  const VectorXd bh = b.samples.head(n);
  const double ea = m.scaled_a.samples.squaredNorm();
  const double eb = bh.squaredNorm();
  Require(ea > 0.0 && eb > 0.0, "zero-energy source");
  const double gain = std::sqrt(ea / (eb * std::pow(10.0, snr_db / 10.0)));
  m.scaled_b.samples = gain * bh;
  m.mixture.samples = m.scaled_a.samples + m.scaled_b.samples;
  return m;
}

namespace {

template <typename T>
void PutLe(std::ostream &os, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char *>(buf), sizeof(T));
}

std::uint32_t GetLe(const unsigned char *p, int bytes) {
  std::uint32_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

Waveform ReadWav(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  Require(is.good(), "cannot open " + path, Error::Kind::kIo);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  Require(data.size() >= 12 && std::memcmp(data.data(), "RIFF", 4) == 0 &&
              std::memcmp(data.data() + 8, "WAVE", 4) == 0,
          path + ": not a RIFF/WAVE file", Error::Kind::kIo);
  std::size_t pos = 12;
  int channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  Waveform w;
  bool have_data = false;
  while (pos + 8 <= data.size()) {
    const std::uint32_t size = GetLe(&data[pos + 4], 4);
    const unsigned char *body = &data[pos + 8];
    Require(pos + 8 + size <= data.size(), path + ": truncated chunk", Error::Kind::kIo);
    if (std::memcmp(&data[pos], "fmt ", 4) == 0) {
      Require(size >= 16, path + ": bad fmt chunk", Error::Kind::kIo);
      format = static_cast<int>(GetLe(body, 2));
      channels = static_cast<int>(GetLe(body + 2, 2));
      rate = GetLe(body + 4, 4);
      bits = static_cast<int>(GetLe(body + 14, 2));
    } else if (std::memcmp(&data[pos], "data", 4) == 0) {
      Require(format == 1 && channels == 1 && bits == 16,
              path + ": only mono 16-bit PCM is supported", Error::Kind::kIo);
      const std::size_t count = size / 2;
      w.samples.resize(static_cast<Index>(count));
      for (std::size_t i = 0; i < count; ++i) {
        const auto raw = static_cast<std::int16_t>(GetLe(body + 2 * i, 2));
        w.samples[static_cast<Index>(i)] = raw / 32768.0;
      }
      have_data = true;
    }
    pos += 8 + size + (size & 1);
  }
  Require(have_data && rate > 0, path + ": missing data chunk", Error::Kind::kIo);
  w.sample_rate = static_cast<int>(rate);
  return w;
}

void WriteWav(const std::string &path, const Waveform &w) {
  std::ofstream os(path, std::ios::binary);
  Require(os.good(), "cannot write " + path, Error::Kind::kIo);
  const auto n = static_cast<std::uint32_t>(w.size());
  os.write("RIFF", 4);
  PutLe<std::uint32_t>(os, 36 + 2 * n);
  os.write("WAVEfmt ", 8);
  PutLe<std::uint32_t>(os, 16);
  PutLe<std::uint16_t>(os, 1);
  PutLe<std::uint16_t>(os, 1);
  PutLe<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate));
  PutLe<std::uint32_t>(os, static_cast<std::uint32_t>(w.sample_rate) * 2);
  PutLe<std::uint16_t>(os, 2);
  PutLe<std::uint16_t>(os, 16);
  os.write("data", 4);
  PutLe<std::uint32_t>(os, 2 * n);
  for (Index i = 0; i < w.size(); ++i) {
    const double v = std::clamp(w.samples[i], -1.0, 32767.0 / 32768.0);
    PutLe<std::uint16_t>(os, static_cast<std::uint16_t>(
                                 static_cast<std::int16_t>(std::lround(v * 32768.0))));
  }
}

}  // namespace dcsep

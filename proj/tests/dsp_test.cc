#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "dcsep/dsp.h"

using namespace dcsep;

namespace {

Waveform Noise(Index n, unsigned seed, int rate = 8000) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples[i] = g(rng);
  return w;
}

Waveform Sine(double hz, Index n, int rate = 8000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (Index i = 0; i < n; ++i) w.samples[i] = std::sin(2 * std::numbers::pi * hz * i / rate);
  return w;
}

// Direct O(N^2) DFT of one windowed frame.
std::vector<std::complex<double>> NaiveDft(const Waveform &w, Index start,
                                           const VectorXd &window) {
  const Index n = window.size();
  std::vector<std::complex<double>> out(n);
  for (Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0;
    for (Index j = 0; j < n; ++j) {
      const double x = start + j < w.size() ? w.samples[start + j] * window[j] : 0.0;
      acc += x * std::polar(1.0, -2 * std::numbers::pi * k * j / n);
    }
    out[k] = acc;
  }
  return out;
}

}  // namespace

TEST_CASE("stft framing at 8 kHz, 64 ms / 16 ms") {
  const auto s = Stft(Noise(8000, 1), 512, 128);
  CHECK(s.freq_bins() == 256);
  CHECK(s.window_len == 512);
  CHECK(s.hop == 128);
}

TEST_CASE("stft of silence is zero") {
  Waveform w;
  w.samples = VectorXd::Zero(8000);
  const auto s = Stft(w, 512, 128);
  CHECK(s.bins.cwiseAbs().maxCoeff() == 0.0);
  CHECK(Istft(s).samples.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft errors") {
  Waveform empty;
  CHECK_THROWS_WITH(Stft(empty, 512, 128), "empty input");
  CHECK_THROWS_WITH(Stft(Noise(1000, 2), 0, 128), "invalid framing");
  CHECK_THROWS_WITH(Stft(Noise(1000, 2), 512, -1), "invalid framing");
  CHECK_THROWS_WITH(Stft(Noise(1000, 2), 256, 512), "invalid framing");
}

TEST_CASE("short waveform is zero padded to one frame") {
  const auto s = Stft(Noise(100, 3), 512, 128);
  CHECK(s.frames() == 1);
}

TEST_CASE("sine peak matches a direct DFT") {
  const auto w = Sine(1000.0, 4000);
  const auto s = Stft(w, 512, 128);
  const Index t = 5;
  Index peak;
  s.bins.row(t).cwiseAbs().maxCoeff(&peak);
  CHECK(peak == 64);
  const auto ref = NaiveDft(w, t * 128, s.analysis_window);
  for (Index f = 0; f < 256; ++f) CHECK(std::abs(s.bins(t, f) - ref[f]) < 1e-9);
  CHECK(std::abs(s.nyquist[t] - ref[256].real()) < 1e-9);
}

TEST_CASE("stft is linear") {
  const auto a = Noise(3000, 4), b = Noise(3000, 5);
  Waveform c;
  c.samples = 0.7 * a.samples - 1.3 * b.samples;
  const auto sa = Stft(a, 512, 128), sb = Stft(b, 512, 128), sc = Stft(c, 512, 128);
  const MatrixXcd combo = 0.7 * sa.bins - 1.3 * sb.bins;
  CHECK((sc.bins - combo).norm() <= 1e-9 * combo.norm());
}

TEST_CASE("istft round trip and projection property") {
  const auto w = Noise(8000, 6);
  const auto s = Stft(w, 512, 128);
  const auto r = Istft(s);
  REQUIRE(r.size() == w.size());
  const Index lo = 512, hi = w.size() - 512;
  const double err = (r.samples.segment(lo, hi - lo) - w.samples.segment(lo, hi - lo)).norm() /
                     w.samples.segment(lo, hi - lo).norm();
  CHECK(err < 1e-6);
  const auto s2 = Stft(r, 512, 128);
  CHECK((s2.bins - s.bins).norm() <= 1e-9 * s.bins.norm());
}

TEST_CASE("single-frame inverse returns the windowed segment") {
  const auto w = Sine(440.0, 512);
  const auto s = Stft(w, 512, 128);
  REQUIRE(s.frames() == 1);
  // With one frame the overlap-add normalizer is w^2, so the windowed
  // segment divided by the window is the original where the window is
  // non-negligible.
  const auto r = Istft(s);
  for (Index i = 64; i < 448; ++i) CHECK(std::abs(r.samples[i] - w.samples[i]) < 1e-9);
}

TEST_CASE("istft rejects non-COLA framing") {
  auto s = Stft(Noise(4000, 7), 512, 128);
  s.hop = 200;
  CHECK_THROWS_WITH(Istft(s), "non-invertible framing");
}

TEST_CASE("Parseval on the full-resolution DFT") {
  const auto w = Noise(2000, 8);
  const auto s = Stft(w, 512, 128);
  for (Index t = 0; t < 3; ++t) {
    double time_energy = 0;
    for (Index j = 0; j < 512; ++j) {
      const double x = w.samples[t * 128 + j] * s.analysis_window[j];
      time_energy += x * x;
    }
    double spec = std::norm(s.bins(t, 0)) + s.nyquist[t] * s.nyquist[t];
    for (Index f = 1; f < 256; ++f) spec += 2 * std::norm(s.bins(t, f));
    CHECK(std::abs(time_energy - spec / 512) <= 1e-6 * time_energy);
  }
}

TEST_CASE("log magnitude") {
  Waveform z;
  z.samples = VectorXd::Zero(1000);
  const auto sz = Stft(z, 512, 128);
  const auto fz = LogMagnitude(sz);
  CHECK(fz.rows.maxCoeff() == doctest::Approx(20 * std::log10(1e-8)));
  CHECK(fz.rows.minCoeff() == doctest::Approx(20 * std::log10(1e-8)));

  const auto s = Stft(Noise(4000, 9), 512, 128);
  const auto f = LogMagnitude(s);
  const double eps = LogMagnitudeFloor(s);
  for (Index t = 0; t < s.frames(); t += 7)
    for (Index k = 0; k < 256; k += 13)
      CHECK(f.rows(t, k) == doctest::Approx(20 * std::log10(std::abs(s.bins(t, k)) + eps)));

  const FeatureMatrix feats[] = {f};
  const auto stats = ComputeNormalization(feats);
  const auto g = LogMagnitude(s, &stats);
  const VectorXd mean = g.rows.colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
  const VectorXd var = g.rows.array().square().colwise().mean();
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-9);
}

TEST_CASE("mfcc") {
  const auto w = Noise(8000, 10);
  const auto m = Mfcc(w);
  CHECK(m.rows.cols() == 13);
  CHECK(m.kind == FeatureKind::kMfcc);

  // Two identical frames give identical rows.
  Waveform rep;
  rep.samples.resize(400);
  rep.samples.head(200) = w.samples.head(200);
  rep.samples.tail(200) = w.samples.head(200);
  MfccOptions opts;
  opts.hop = 200;
  const auto mr = Mfcc(rep, opts);
  REQUIRE(mr.rows.rows() == 2);
  CHECK((mr.rows.row(0) - mr.rows.row(1)).norm() == 0.0);

  MfccOptions bad;
  bad.num_coeffs = 24;
  CHECK_THROWS(Mfcc(w, bad));
}

TEST_CASE("cepstrum of a constant log-mel vector") {
  const VectorXd logmel = VectorXd::Constant(23, 2.5);
  const VectorXd c = LogMelToCepstrum(logmel, 13);
  // Orthonormal DCT-II of a constant: c0 = sqrt(M) * value, the rest vanish.
  CHECK(c[0] == doctest::Approx(std::sqrt(23.0) * 2.5));
  CHECK(c.tail(12).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("energy vad") {
  const std::vector<double> flat(10, -3.0);
  for (bool a : EnergyVad(flat, -40)) CHECK(a);

  std::vector<double> one(10, -60.0);
  one[4] = 0.0;
  const auto v = EnergyVad(one, -40);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v[i] == (i == 4));

  // speech-pause-speech against a scalar loop
  std::vector<double> profile;
  for (int i = 0; i < 30; ++i) profile.push_back(i < 10 || i >= 20 ? -5.0 + 0.1 * i : -70.0);
  const auto vad = EnergyVad(profile, -40);
  double peak = -1e9;
  for (double e : profile) peak = std::max(peak, e);
  for (std::size_t i = 0; i < profile.size(); ++i) CHECK(vad[i] == (profile[i] >= peak - 40));

  // idempotence: the selected frames are all active again
  std::vector<double> kept;
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (vad[i]) kept.push_back(profile[i]);
  for (bool a : EnergyVad(kept, -40)) CHECK(a);
}

TEST_CASE("mix at snr") {
  const auto a = Noise(5000, 11), b = Noise(6000, 12);
  for (double snr : {0.0, 10.0, 3.7}) {
    const auto m = MixAtSnr(a, b, snr);
    CHECK(m.mixture.size() == 5000);
    const double realized = 10 * std::log10(Energy(m.scaled_a) / Energy(m.scaled_b));
    CHECK(std::abs(realized - snr) < 1e-9);
  }
  const auto m0 = MixAtSnr(a, a, 0.0);
  CHECK((m0.mixture.samples - 2 * a.samples).cwiseAbs().maxCoeff() < 1e-12);
  Waveform z;
  z.samples = VectorXd::Zero(100);
  CHECK_THROWS_WITH(MixAtSnr(a, z, 0.0), "zero-energy source");
}

TEST_CASE("wav round trip") {
  auto w = Noise(1234, 13, 16000);
  w.samples = w.samples.cwiseMax(-0.99).cwiseMin(0.99);
  const std::string path = "dsp_test_roundtrip.wav";
  WriteWav(path, w);
  const auto r = ReadWav(path);
  CHECK(r.sample_rate == 16000);
  REQUIRE(r.size() == w.size());
  CHECK((r.samples - w.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
  std::remove(path.c_str());
}

// dcsep/dsp.h

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

#pragma once

#include <span>
#include <string>
#include <vector>

#include "dcsep/common.h"

namespace dcsep {

struct Waveform {
  VectorXd samples;
  int sample_rate = 8000;

  Index size() const { return samples.size(); }
};

/// Complex STFT of one signal.  `bins` is T x F with F = window_len / 2:
/// DC is kept and the Nyquist bin is carried separately in `nyquist` so that
/// the network-facing grid has exactly window_len / 2 columns while the
/// inverse transform stays exact.
struct Spectrogram {
  MatrixXcd bins;
  VectorXd nyquist;
  int window_len = 0;
  int hop = 0;
  VectorXd analysis_window;
  Index num_samples = 0;
  int sample_rate = 8000;

  Index frames() const { return bins.rows(); }
  Index freq_bins() const { return bins.cols(); }
  MatrixXd Magnitude() const { return bins.cwiseAbs(); }
};

enum class FeatureKind { kLogMagnitude, kMfcc };

struct FeatureMatrix {
  MatrixXd rows;  // time_frames x feature_dim
  FeatureKind kind = FeatureKind::kLogMagnitude;
};

struct NormalizationStats {
  VectorXd mean;
  VectorXd std;
};

inline constexpr double kStdFloor = 1e-6;

VectorXd SqrtHannWindow(int length);

/// Frames are placed at t * hop; the tail is zero padded so that every
/// sample is covered by at least one frame.
Spectrogram Stft(const Waveform &w, int window_len, int hop);
Spectrogram Stft(const Waveform &w, int window_len, int hop,
                 const VectorXd &window);

/// Weighted overlap-add inverse.  Throws "non-invertible framing" when the
/// squared window does not overlap-add to a constant at this hop.
Waveform Istft(const Spectrogram &s);

/// True iff sum_k w^2(n + k hop) is constant in n.
bool SatisfiesCola(const VectorXd &window, int hop);

/// Absolute floor used by LogMagnitude: 1e-8 of the global max magnitude
/// (1e-8 when the spectrogram is all zero).
double LogMagnitudeFloor(const Spectrogram &s);

FeatureMatrix LogMagnitude(const Spectrogram &s,
                           const NormalizationStats *stats = nullptr);

NormalizationStats ComputeNormalization(std::span<const FeatureMatrix> feats);
void Normalize(const NormalizationStats &stats, FeatureMatrix *f);

struct MfccOptions {
  int frame_len = 200;  // 25 ms at 8 kHz
  int hop = 80;         // 10 ms
  int fft_len = 256;
  int num_filters = 23;
  double low_hz = 20.0;
  double high_hz = 0.0;  // <= 0 means Nyquist
  int num_coeffs = 13;
};

/// Orthonormal DCT-II of a log-mel vector, truncated to `num_coeffs`.
VectorXd LogMelToCepstrum(const VectorXd &log_mel, int num_coeffs);

/// num_filters x (fft_len/2 + 1) triangular filterbank on the HTK mel scale.
MatrixXd MelFilterbank(int num_filters, int fft_len, int sample_rate,
                       double low_hz, double high_hz);

FeatureMatrix Mfcc(const Waveform &w, const MfccOptions &opts = {});

/// Per-frame activity: energy_db >= max(energy_db) + threshold_db.
std::vector<bool> EnergyVad(std::span<const double> frame_energy_db,
                            double threshold_db);
std::vector<bool> EnergyVad(const Spectrogram &s, double threshold_db);
/// Log-magnitude features use their linear frame energy; MFCC features use
/// c0 rescaled to mean log-mel energy in dB.
std::vector<bool> EnergyVad(const FeatureMatrix &f, double threshold_db);

/// Frame energies in dB on the MFCC framing (frame_len, hop, zero-padded
/// tail), one per MFCC row.
std::vector<double> FrameEnergyDb(const Waveform &w, int frame_len, int hop);

FeatureMatrix SelectFrames(const FeatureMatrix &f, const std::vector<bool> &keep);

struct Mixture {
  Waveform mixture;
  Waveform scaled_a;
  Waveform scaled_b;
};

/// Scales b so that 10 log10(|a|^2 / |b'|^2) = snr_db over the common
/// (shorter) length and returns a + b'.
Mixture MixAtSnr(const Waveform &a, const Waveform &b, double snr_db);

double Energy(const Waveform &w);

/// Mono 16-bit PCM WAV.
Waveform ReadWav(const std::string &path);
void WriteWav(const std::string &path, const Waveform &w);

}  // namespace dcsep

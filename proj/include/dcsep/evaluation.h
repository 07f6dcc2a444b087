// dcsep/evaluation.h

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

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "dcsep/affinity.h"
#include "dcsep/clustering.h"
#include "dcsep/dsp.h"
#include "dcsep/ivector.h"

namespace dcsep {

inline constexpr double kSdrCap = 100.0;

/// Scale-invariant SDR in dB: the estimate is split into its projection on
/// the reference and the remainder.  Signals are trimmed to the shorter
/// length; the result is clamped to [-100, 100].
double Sdr(const Eigen::Ref<const VectorXd> &estimate, const Eigen::Ref<const VectorXd> &reference);
inline double Sdr(const Waveform &estimate, const Waveform &reference) {
  return Sdr(estimate.samples, reference.samples);
}

struct SdrReport {
  std::vector<double> sdr;          // per reference, of its matched estimate
  std::vector<double> mixture_sdr;  // per reference
  std::vector<double> improvement;  // sdr - mixture_sdr
  std::vector<int> permutation;     // permutation[ref] = estimate index

  double MeanImprovement() const;
};

/// Matches estimates to references by the permutation with the highest mean
/// SDR (ties: first in lexicographic order).
SdrReport SdrImprovement(const std::vector<Waveform> &estimates,
                         const std::vector<Waveform> &references, const Waveform &mixture);

/// Per-bin argmax over source magnitudes on the retained bins; exact ties go
/// to source 0.
BinaryMaskSet IdealBinaryMask(const std::vector<Spectrogram> &sources);
BinaryMaskSet IdealBinaryMask(const std::vector<Spectrogram> &sources, const BinMask &mask);

struct IdReport {
  double accuracy = 0.0;
  int correct = 0;
  int total = 0;
  std::map<std::pair<int, int>, int> confusion;  // (true, predicted) -> count
  std::vector<bool> outcomes;                    // per probe
};

/// A zero probe (e.g. from a silent estimate) counts as predicted -1.
IdReport SpeakerIdEval(const std::vector<SpeakerModel> &models,
                       const std::vector<VectorXd> &probes, const std::vector<int> &labels);

/// One separated source seen by the realistic and the oracle level-1
/// systems, with the identification outcome of its level-0 i-vector.
struct SourceRecord {
  int mixture = 0;
  int source = 0;
  double realistic_improvement = 0.0;
  double oracle_improvement = 0.0;
  bool level0_identified = false;
};

struct RepresentationGroup {
  int count = 0;
  double mean_improvement = 0.0;  // realistic level 1
  double oracle_increase = 0.0;   // mean(oracle - realistic)
};

struct RepresentationTable {
  std::optional<RepresentationGroup> correct;
  std::optional<RepresentationGroup> incorrect;
};

RepresentationTable RepresentationAnalysis(const std::vector<SourceRecord> &records);

/// Joins per-mixture realistic and oracle reports with the level-0
/// identification outcome of every reference (mixture-major order).  The
/// three inputs must describe the same mixtures and source counts.
std::vector<SourceRecord> BuildSourceRecords(const std::vector<SdrReport> &realistic,
                                             const std::vector<SdrReport> &oracle,
                                             const std::vector<bool> &level0_identified);

}  // namespace dcsep

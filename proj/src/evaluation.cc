// src/evaluation.cc

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

#include "dcsep/evaluation.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dcsep {

double Sdr(const Eigen::Ref<const VectorXd> &estimate, const Eigen::Ref<const VectorXd> &reference) {
  const Index n = std::min(estimate.size(), reference.size());
  const auto s = reference.head(n);
  const auto e = estimate.head(n);
  const double ref_energy = s.squaredNorm();
  Require(ref_energy > 0.0, "sdr: zero reference");
  if (e.squaredNorm() == 0.0) return -kSdrCap;
  const VectorXd target = (e.dot(s) / ref_energy) * s;
  const double signal = target.squaredNorm();
  const double distortion = (e - target).squaredNorm();
  if (signal == 0.0) return -kSdrCap;
  if (distortion == 0.0) return kSdrCap;
  return std::clamp(10.0 * std::log10(signal / distortion), -kSdrCap, kSdrCap);
}

double SdrReport::MeanImprovement() const {
  if (improvement.empty()) return 0.0;
  return std::accumulate(improvement.begin(), improvement.end(), 0.0) /
         static_cast<double>(improvement.size());
}

SdrReport SdrImprovement(const std::vector<Waveform> &estimates,
                         const std::vector<Waveform> &references, const Waveform &mixture) {
  Require(estimates.size() == references.size() && !references.empty(),
          "sdr improvement: estimate and reference counts differ");
  const std::size_t C = references.size();
  MatrixXd table(C, C);  // (reference, estimate)
  for (std::size_t r = 0; r < C; ++r)
    for (std::size_t e = 0; e < C; ++e) table(r, e) = Sdr(estimates[e], references[r]);

  std::vector<int> perm(C);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_sum = -1e300;
  do {
    double sum = 0.0;
    for (std::size_t r = 0; r < C; ++r) sum += table(r, perm[r]);
    if (sum > best_sum) {
      best_sum = sum;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  SdrReport rep;
  rep.permutation = best;
  for (std::size_t r = 0; r < C; ++r) {
    rep.sdr.push_back(table(r, best[r]));
    rep.mixture_sdr.push_back(Sdr(mixture, references[r]));
    rep.improvement.push_back(rep.sdr.back() - rep.mixture_sdr.back());
  }
  return rep;
}

BinaryMaskSet IdealBinaryMask(const std::vector<Spectrogram> &sources) {
  Require(!sources.empty(), "ideal binary mask: no sources");
  return IdealBinaryMask(sources, BinMask::All(sources[0].frames(), sources[0].freq_bins()));
}

BinaryMaskSet IdealBinaryMask(const std::vector<Spectrogram> &sources, const BinMask &mask) {
  const AffinityTarget y = BuildTargets(sources, mask);
  const Index T = mask.frames(), F = mask.freq_bins();
  BinaryMaskSet out;
  out.masks.assign(sources.size(), MatrixXb::Constant(T, F, false));
  for (Index t = 0; t < T; ++t)
    for (Index f = 0; f < F; ++f)
      for (std::size_t c = 0; c < sources.size(); ++c)
        if (y.Y(t * F + f, static_cast<Index>(c)) == 1.0) out.masks[c](t, f) = true;
  return out;
}

IdReport SpeakerIdEval(const std::vector<SpeakerModel> &models,
                       const std::vector<VectorXd> &probes, const std::vector<int> &labels) {
  Require(probes.size() == labels.size(), "speaker id: one label per probe required");
  for (int l : labels)
    Require(std::any_of(models.begin(), models.end(),
                        [l](const SpeakerModel &m) { return m.speaker == l; }),
            "speaker id: unknown label " + std::to_string(l));
  IdReport rep;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const int guess = probes[i].norm() > 0.0 ? Identify(models, probes[i]) : -1;
    const bool ok = guess == labels[i];
    rep.outcomes.push_back(ok);
    ++rep.confusion[{labels[i], guess}];
    rep.correct += ok ? 1 : 0;
    ++rep.total;
  }
  rep.accuracy = rep.total > 0 ? static_cast<double>(rep.correct) / rep.total : 0.0;
  return rep;
}

RepresentationTable RepresentationAnalysis(const std::vector<SourceRecord> &records) {
  RepresentationTable table;
  for (bool identified : {true, false}) {
    RepresentationGroup g;
    for (const auto &r : records) {
      if (r.level0_identified != identified) continue;
      ++g.count;
      g.mean_improvement += r.realistic_improvement;
      g.oracle_increase += r.oracle_improvement - r.realistic_improvement;
    }
    if (g.count == 0) continue;
    g.mean_improvement /= g.count;
    g.oracle_increase /= g.count;
    (identified ? table.correct : table.incorrect) = g;
  }
  return table;
}

std::vector<SourceRecord> BuildSourceRecords(const std::vector<SdrReport> &realistic,
                                             const std::vector<SdrReport> &oracle,
                                             const std::vector<bool> &level0_identified) {
  Require(realistic.size() == oracle.size(), "misaligned records");
  std::vector<SourceRecord> out;
  for (std::size_t m = 0; m < realistic.size(); ++m) {
    Require(realistic[m].improvement.size() == oracle[m].improvement.size(),
            "misaligned records");
    for (std::size_t s = 0; s < realistic[m].improvement.size(); ++s) {
      Require(out.size() < level0_identified.size(), "misaligned records");
      out.push_back({static_cast<int>(m), static_cast<int>(s), realistic[m].improvement[s],
                     oracle[m].improvement[s], level0_identified[out.size()]});
    }
  }
  Require(out.size() == level0_identified.size(), "misaligned records");
  return out;
}

}  // namespace dcsep

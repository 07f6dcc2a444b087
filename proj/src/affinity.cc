// src/affinity.cc

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

#include "dcsep/affinity.h"

#include <cmath>

namespace dcsep {

VectorXb BinMask::Flatten() const {
  VectorXb flat(keep.size());
  const Index F = keep.cols();
  for (Index t = 0; t < keep.rows(); ++t)
    for (Index f = 0; f < F; ++f) flat[t * F + f] = keep(t, f);
  return flat;
}

BinMask BinMask::All(Index frames, Index freq_bins) {
  BinMask m;
  m.keep = MatrixXb::Constant(frames, freq_bins, true);
  return m;
}

BinMask ComputeBinMask(const Spectrogram &mixture, double threshold_db) {
  const MatrixXd mag = mixture.Magnitude();
  const double peak = mag.size() > 0 ? mag.maxCoeff() : 0.0;
  const double floor = peak * std::pow(10.0, threshold_db / 20.0);
  BinMask m;
  m.keep = (mag.array() >= floor && mag.array() > 0.0).matrix();
  return m;
}

AffinityTarget BuildTargets(const std::vector<MatrixXd> &mags, const BinMask &mask) {
  Require(mags.size() >= 2, "build targets: need at least two sources");
  const Index T = mask.frames(), F = mask.freq_bins();
  for (const auto &m : mags)
    Require(m.rows() == T && m.cols() == F, "build targets: shape mismatch");
  const Index C = static_cast<Index>(mags.size());
  AffinityTarget target;
  target.Y = MatrixXd::Zero(T * F, C);
  target.retained = mask.Flatten();
  for (Index t = 0; t < T; ++t)
    for (Index f = 0; f < F; ++f) {
      if (!mask.keep(t, f)) continue;
      Index best = 0;
      for (Index c = 1; c < C; ++c)
        if (mags[c](t, f) > mags[best](t, f)) best = c;
      target.Y(t * F + f, best) = 1.0;
    }
  return target;
}

AffinityTarget BuildTargets(const std::vector<Spectrogram> &sources,
                            const BinMask &mask) {
  std::vector<MatrixXd> mags;
  mags.reserve(sources.size());
  for (const auto &s : sources) mags.push_back(s.Magnitude());
  return BuildTargets(mags, mask);
}

}  // namespace dcsep

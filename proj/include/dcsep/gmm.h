// dcsep/gmm.h

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
#include <vector>

#include "dcsep/common.h"
#include "dcsep/dsp.h"

namespace dcsep {

/// Diagonal-covariance GMM used as the universal background model.
struct GmmUbm {
  VectorXd weights;    // K, sums to one
  MatrixXd means;      // K x dim
  MatrixXd variances;  // K x dim

  Index num_components() const { return weights.size(); }
  Index dim() const { return means.cols(); }
};

struct UbmTrainLog {
  std::vector<double> log_likelihood;  // per EM iteration at the final size
  int floored = 0;                     // variance entries clamped by the floor
};

/// Per-frame log p(x_t) and, optionally, the K x T posteriors.
VectorXd FrameLogLikelihood(const GmmUbm &ubm, const MatrixXd &frames,
                            MatrixXd *posteriors = nullptr);

double TotalLogLikelihood(const GmmUbm &ubm, const MatrixXd &frames);

/// EM on the stacked frames of `features`.  The model is grown by binary
/// splitting from the global Gaussian; `iters` EM iterations are then run
/// at the final size and their log-likelihoods logged.  Variances are
/// floored at `variance_floor_ratio` times the global variance.
GmmUbm TrainUbm(std::span<const FeatureMatrix> features, int K, int iters,
                UbmTrainLog *log = nullptr, double variance_floor_ratio = 1e-4);

/// Zeroth- and first-order statistics, first order centered on the UBM
/// means.
struct BaumWelchStats {
  VectorXd N;  // K
  MatrixXd F;  // K x dim

  /// Row-major K * dim supervector of the first-order statistics.
  VectorXd FlatF() const;
};

BaumWelchStats AccumulateStats(const GmmUbm &ubm, const FeatureMatrix &features);

}  // namespace dcsep

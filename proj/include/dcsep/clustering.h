// dcsep/clustering.h

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

#include <cstdint>
#include <vector>

#include "dcsep/affinity.h"
#include "dcsep/common.h"
#include "dcsep/dsp.h"

namespace dcsep {

struct ClusterAssignment {
  std::vector<int> labels;      // one per clustered point, 0..C-1
  MatrixXd centroids;           // C x D, unit rows
  double total_cost = 0.0;      // sum of 1 - <x, mu> over points
  std::vector<double> cost_history;  // cost after every Lloyd iteration
  int iterations = 0;
  int reseeds = 0;
};

/// Seed used by restart `r` of a multi-restart run started with `seed`.
std::uint64_t RestartSeed(std::uint64_t seed, int restart);

/// One spherical K-means run (cosine distance, k-means++ seeding, at most
/// `max_iter` Lloyd iterations, stop when assignments are stable).  An empty
/// cluster is re-seeded with the point farthest from its centroid.
ClusterAssignment KMeansCosineRun(const Eigen::Ref<const RowMatrixXd> &points, int C,
                                  std::uint64_t seed, int max_iter = 100);

/// Best of `restarts` runs by total cost; ties go to the earliest restart.
ClusterAssignment KMeansCosine(const Eigen::Ref<const RowMatrixXd> &points, int C,
                               int restarts, std::uint64_t seed, int max_iter = 100);

double CosineCost(const Eigen::Ref<const RowMatrixXd> &points, const MatrixXd &centroids,
                  const std::vector<int> &labels);

enum class ExcludedBins { kZero, kNearestCentroid };

struct BinaryMaskSet {
  std::vector<MatrixXb> masks;  // C masks, T x F

  Index size() const { return static_cast<Index>(masks.size()); }
};

/// Scatters labels of the retained bins back onto the T x F grid.  With
/// kNearestCentroid, `embeddings` (all N rows) must be given.
BinaryMaskSet MasksFromAssignment(const ClusterAssignment &a, const BinMask &mask,
                                  ExcludedBins policy = ExcludedBins::kZero,
                                  const RowMatrixXd *embeddings = nullptr);

/// Element-wise product with a {0,1} mask.  The Nyquist column follows the
/// mask of the highest retained frequency bin.
Spectrogram ApplyMask(const Spectrogram &X, const MatrixXb &mask);

/// Rows of `embeddings` whose flattened bin is retained, in order.
RowMatrixXd SelectRows(const RowMatrixXd &embeddings, const VectorXb &retained);

}  // namespace dcsep

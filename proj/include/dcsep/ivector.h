// dcsep/ivector.h

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

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcsep/common.h"
#include "dcsep/gmm.h"

namespace dcsep {

/// M = m + T w with diagonal residual covariance Sigma, all in the
/// K * dim supervector space (component-major).
struct TotalVariabilityModel {
  VectorXd m;      // K * dim
  MatrixXd T;      // (K * dim) x rank
  VectorXd sigma;  // K * dim, diagonal
  Index num_components = 0;
  Index dim = 0;

  Index rank() const { return T.cols(); }
};

struct TvTrainLog {
  /// T-dependent part of the marginal log-likelihood of the statistics,
  /// sum_u (b_u' L_u^-1 b_u - log|L_u|) / 2, evaluated before every M-step
  /// and once after the last.
  std::vector<double> objective;
};

/// Seeded Gaussian initialisation, column-orthonormalised and scaled by the
/// UBM standard deviations.
TotalVariabilityModel InitTv(const GmmUbm &ubm, int rank, std::uint64_t seed);

TotalVariabilityModel TrainTv(std::span<const BaumWelchStats> stats, const GmmUbm &ubm,
                              int rank, int iters, std::uint64_t seed,
                              TvTrainLog *log = nullptr);

/// Runs EM from a given model.
TotalVariabilityModel RefineTv(std::span<const BaumWelchStats> stats,
                               TotalVariabilityModel tv, int iters, TvTrainLog *log);

double TvObjective(std::span<const BaumWelchStats> stats, const TotalVariabilityModel &tv);

/// Posterior precision L = I + sum_k N_k T_k' Sigma_k^-1 T_k.
MatrixXd IvectorPrecision(const TotalVariabilityModel &tv, const BaumWelchStats &stats);

/// Posterior mean w = L^-1 T' Sigma^-1 F.
VectorXd ExtractIvector(const TotalVariabilityModel &tv, const BaumWelchStats &stats);

/// Fisher discriminant projection; columns of A are generalized
/// eigenvectors of (S_b, S_w), normalised so that A' S_w A = I.
struct LdaProjection {
  MatrixXd A;            // ivec_dim x lda_dim
  VectorXd eigenvalues;  // descending
  MatrixXd between;      // S_b
  MatrixXd within;       // S_w after shrinkage

  Index output_dim() const { return A.cols(); }
};

/// S_b is the between-class scatter of the class means, S_w the pooled
/// within-class scatter, both normalised by the sample count.  A singular
/// S_w is shrunk by 1e-6 * trace / dim.
LdaProjection TrainLda(const std::vector<VectorXd> &ivectors, const std::vector<int> &labels,
                       int lda_dim);

VectorXd ProjectLda(const LdaProjection &lda, const VectorXd &w);

double FisherRatio(const LdaProjection &lda, const VectorXd &direction);

/// <a, b> / (|a| |b|).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar CosineScore(const Eigen::MatrixBase<DerivedA> &a,
                                      const Eigen::MatrixBase<DerivedB> &b) {
  Require(a.size() == b.size(), "cosine score: dimension mismatch");
  const auto na = a.norm(), nb = b.norm();
  Require(na > 0 && nb > 0, "cosine score: zero vector");
  return std::clamp(a.dot(b) / (na * nb), typename DerivedA::Scalar(-1),
                    typename DerivedA::Scalar(1));
}

struct SpeakerModel {
  int speaker = 0;
  VectorXd ivector;
};

/// Mean i-vector per speaker label, ordered by label.
std::vector<SpeakerModel> AverageBySpeaker(const std::vector<VectorXd> &ivectors,
                                           const std::vector<int> &labels);

/// Speaker of the best-scoring model; ties go to the earliest model.
int Identify(const std::vector<SpeakerModel> &models, const VectorXd &probe);

}  // namespace dcsep

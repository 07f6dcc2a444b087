// src/ivector.cc

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

#include "dcsep/ivector.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace dcsep {

namespace {

// Per-component T_k' Sigma_k^-1 T_k, each rank x rank.
std::vector<MatrixXd> ComponentGrams(const TotalVariabilityModel &tv) {
  std::vector<MatrixXd> grams(tv.num_components);
  for (Index k = 0; k < tv.num_components; ++k) {
    const auto Tk = tv.T.middleRows(k * tv.dim, tv.dim);
    const VectorXd inv = tv.sigma.segment(k * tv.dim, tv.dim).cwiseInverse();
    grams[k] = Tk.transpose() * inv.asDiagonal() * Tk;
  }
  return grams;
}

MatrixXd Precision(const std::vector<MatrixXd> &grams, const VectorXd &N, Index rank) {
  MatrixXd L = MatrixXd::Identity(rank, rank);
  for (std::size_t k = 0; k < grams.size(); ++k)
    if (N[k] != 0.0) L.noalias() += N[k] * grams[k];
  return L;
}

void CheckStats(const TotalVariabilityModel &tv, const BaumWelchStats &s) {
  Require(s.N.size() == tv.num_components && s.F.rows() == tv.num_components &&
              s.F.cols() == tv.dim,
          "statistics do not match the total variability model");
}

}  // namespace

TotalVariabilityModel InitTv(const GmmUbm &ubm, int rank, std::uint64_t seed) {
  Require(rank >= 1, "tv rank must be positive");
  const Index K = ubm.num_components(), D = ubm.dim();
  Require(rank <= K * D, "tv rank exceeds the supervector dimension");
  TotalVariabilityModel tv;
  tv.num_components = K;
  tv.dim = D;
  const RowMatrixXd means = ubm.means, vars = ubm.variances;
  tv.m = Eigen::Map<const VectorXd>(means.data(), K * D);
  tv.sigma = Eigen::Map<const VectorXd>(vars.data(), K * D);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  MatrixXd init(K * D, rank);
  for (Index i = 0; i < init.size(); ++i) init.data()[i] = g(rng);
  const MatrixXd q = init.householderQr().householderQ() * MatrixXd::Identity(K * D, rank);
  tv.T = tv.sigma.cwiseSqrt().asDiagonal() * q;
  return tv;
}

MatrixXd IvectorPrecision(const TotalVariabilityModel &tv, const BaumWelchStats &stats) {
  CheckStats(tv, stats);
  return Precision(ComponentGrams(tv), stats.N, tv.rank());
}

VectorXd ExtractIvector(const TotalVariabilityModel &tv, const BaumWelchStats &stats) {
  const MatrixXd L = IvectorPrecision(tv, stats);
  const VectorXd b = tv.T.transpose() * stats.FlatF().cwiseQuotient(tv.sigma);
  return L.llt().solve(b);
}

double TvObjective(std::span<const BaumWelchStats> stats, const TotalVariabilityModel &tv) {
  const auto grams = ComponentGrams(tv);
  const MatrixXd proj = tv.sigma.cwiseInverse().asDiagonal() * tv.T;
  double total = 0.0;
  for (const auto &s : stats) {
    CheckStats(tv, s);
    const Eigen::LLT<MatrixXd> llt(Precision(grams, s.N, tv.rank()));
    const VectorXd b = proj.transpose() * s.FlatF();
    const MatrixXd Lc = llt.matrixL();
    const double logdet = 2.0 * Lc.diagonal().array().log().sum();
    total += 0.5 * (b.dot(llt.solve(b)) - logdet);
  }
  return total;
}

TotalVariabilityModel RefineTv(std::span<const BaumWelchStats> stats, TotalVariabilityModel tv,
                               int iters, TvTrainLog *log) {
  Require(!stats.empty(), "no statistics for tv training");
  const Index K = tv.num_components, D = tv.dim, R = tv.rank();
  for (int it = 0; it < iters; ++it) {
    const auto grams = ComponentGrams(tv);
    const MatrixXd proj = tv.sigma.cwiseInverse().asDiagonal() * tv.T;
    MatrixXd C = MatrixXd::Zero(K * D, R);
    std::vector<MatrixXd> A(K, MatrixXd::Zero(R, R));
    double objective = 0.0;
    for (const auto &s : stats) {
      CheckStats(tv, s);
      const Eigen::LLT<MatrixXd> llt(Precision(grams, s.N, R));
      const VectorXd f = s.FlatF();
      const VectorXd b = proj.transpose() * f;
      const VectorXd w = llt.solve(b);
      const MatrixXd Lc = llt.matrixL();
      objective += 0.5 * (b.dot(w) - 2.0 * Lc.diagonal().array().log().sum());
      const MatrixXd eww = llt.solve(MatrixXd::Identity(R, R)) + w * w.transpose();
      C.noalias() += f * w.transpose();
      for (Index k = 0; k < K; ++k)
        if (s.N[k] != 0.0) A[k].noalias() += s.N[k] * eww;
    }
    if (log != nullptr) log->objective.push_back(objective);
    for (Index k = 0; k < K; ++k) {
      MatrixXd Ak = A[k];
      Ak.diagonal().array() += 1e-10;
      // T_k A_k = C_k, A_k symmetric.
      tv.T.middleRows(k * D, D) = Ak.llt().solve(C.middleRows(k * D, D).transpose()).transpose();
    }
  }
  if (log != nullptr && iters > 0) log->objective.push_back(TvObjective(stats, tv));
  return tv;
}

TotalVariabilityModel TrainTv(std::span<const BaumWelchStats> stats, const GmmUbm &ubm,
                              int rank, int iters, std::uint64_t seed, TvTrainLog *log) {
  Require(static_cast<Index>(stats.size()) >= rank,
          "tv training needs at least rank utterances");
  return RefineTv(stats, InitTv(ubm, rank, seed), iters, log);
}

LdaProjection TrainLda(const std::vector<VectorXd> &ivectors, const std::vector<int> &labels,
                       int lda_dim) {
  Require(ivectors.size() == labels.size() && !ivectors.empty(),
          "lda: need one label per i-vector");
  const Index dim = ivectors.front().size();
  std::map<int, std::vector<std::size_t>> classes;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    Require(ivectors[i].size() == dim, "lda: dimension mismatch");
    classes[labels[i]].push_back(i);
  }
  Require(classes.size() >= 2, "lda: need at least two speakers");
  for (const auto &[label, members] : classes)
    Require(members.size() >= 2, "lda: need at least two i-vectors per speaker");
  Require(lda_dim >= 1 && lda_dim <= std::min<Index>(dim, classes.size() - 1),
          "lda: output dimension exceeds min(dim, speakers - 1)");

  const double n = static_cast<double>(ivectors.size());
  VectorXd mu = VectorXd::Zero(dim);
  for (const auto &w : ivectors) mu += w;
  mu /= n;
  MatrixXd Sb = MatrixXd::Zero(dim, dim), Sw = MatrixXd::Zero(dim, dim);
  for (const auto &[label, members] : classes) {
    VectorXd mc = VectorXd::Zero(dim);
    for (auto i : members) mc += ivectors[i];
    mc /= static_cast<double>(members.size());
    Sb.noalias() += static_cast<double>(members.size()) * (mc - mu) * (mc - mu).transpose();
    for (auto i : members) Sw.noalias() += (ivectors[i] - mc) * (ivectors[i] - mc).transpose();
  }
  Sb /= n;
  Sw /= n;

  const Eigen::SelfAdjointEigenSolver<MatrixXd> sw_eig(Sw);
  const double max_ev = sw_eig.eigenvalues().maxCoeff();
  if (sw_eig.eigenvalues().minCoeff() <= 1e-12 * std::max(max_ev, 1e-300)) {
    double scale = Sw.trace();
    if (scale <= 0.0) scale = (Sw + Sb).trace();
    if (scale <= 0.0) scale = static_cast<double>(dim);
    Sw.diagonal().array() += 1e-6 * scale / static_cast<double>(dim);
  }

  const Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(Sb, Sw);
  Require(ges.info() == Eigen::Success, "lda: generalized eigenproblem failed",
          Error::Kind::kNumeric);
  LdaProjection lda;
  lda.A.resize(dim, lda_dim);
  lda.eigenvalues.resize(lda_dim);
  for (int j = 0; j < lda_dim; ++j) {
    const Index col = dim - 1 - j;  // eigenvalues come ascending
    lda.A.col(j) = ges.eigenvectors().col(col);
    lda.eigenvalues[j] = ges.eigenvalues()[col];
  }
  lda.between = Sb;
  lda.within = Sw;
  return lda;
}

VectorXd ProjectLda(const LdaProjection &lda, const VectorXd &w) {
  Require(w.size() == lda.A.rows(), "lda projection: dimension mismatch");
  return lda.A.transpose() * w;
}

double FisherRatio(const LdaProjection &lda, const VectorXd &d) {
  return d.dot(lda.between * d) / d.dot(lda.within * d);
}

std::vector<SpeakerModel> AverageBySpeaker(const std::vector<VectorXd> &ivectors,
                                           const std::vector<int> &labels) {
  Require(ivectors.size() == labels.size(), "one label per i-vector required");
  std::map<int, std::pair<VectorXd, int>> acc;
  for (std::size_t i = 0; i < ivectors.size(); ++i) {
    auto it = acc.find(labels[i]);
    if (it == acc.end())
      acc.emplace(labels[i], std::make_pair(ivectors[i], 1));
    else {
      it->second.first += ivectors[i];
      ++it->second.second;
    }
  }
  std::vector<SpeakerModel> models;
  for (const auto &[label, sum] : acc)
    models.push_back({label, sum.first / static_cast<double>(sum.second)});
  return models;
}

int Identify(const std::vector<SpeakerModel> &models, const VectorXd &probe) {
  Require(!models.empty(), "identify: empty model list");
  std::size_t best = 0;
  double best_score = CosineScore(models[0].ivector, probe);
  for (std::size_t i = 1; i < models.size(); ++i) {
    const double s = CosineScore(models[i].ivector, probe);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return models[best].speaker;
}

}  // namespace dcsep

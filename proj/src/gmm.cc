// src/gmm.cc

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

#include "dcsep/gmm.h"

#include <cmath>
#include <numbers>

namespace dcsep {

namespace {

MatrixXd Stack(std::span<const FeatureMatrix> features) {
  Index rows = 0;
  const Index dim = features.empty() ? 0 : features.front().rows.cols();
  for (const auto &f : features) {
    Require(f.rows.cols() == dim, "feature dimension mismatch");
    rows += f.rows.rows();
  }
  MatrixXd all(rows, dim);
  Index r = 0;
  for (const auto &f : features) {
    all.middleRows(r, f.rows.rows()) = f.rows;
    r += f.rows.rows();
  }
  return all;
}

// One EM update; returns the log-likelihood of the model that went in.
double EmStep(const MatrixXd &x, const VectorXd &floor, GmmUbm *g, int *floored) {
  MatrixXd post;
  const double ll = FrameLogLikelihood(*g, x, &post).sum();
  const Index K = g->num_components();
  const VectorXd occ = post.rowwise().sum();
  const MatrixXd first = post * x;
  const MatrixXd second = post * x.cwiseAbs2();
  for (Index k = 0; k < K; ++k) {
    if (occ[k] <= 1e-10) continue;  // starved component keeps its parameters
    g->means.row(k) = first.row(k) / occ[k];
    g->variances.row(k) = second.row(k) / occ[k] - g->means.row(k).cwiseAbs2();
    for (Index d = 0; d < x.cols(); ++d)
      if (g->variances(k, d) < floor[d]) {
        g->variances(k, d) = floor[d];
        if (floored != nullptr) ++*floored;
      }
  }
  g->weights = occ / occ.sum();
  return ll;
}

void Split(GmmUbm *g, Index target) {
  while (g->num_components() < target) {
    Index k;
    g->weights.maxCoeff(&k);
    const Index K = g->num_components();
    const Eigen::RowVectorXd offset = 0.2 * g->variances.row(k).cwiseSqrt();
    g->weights.conservativeResize(K + 1);
    g->means.conservativeResize(K + 1, Eigen::NoChange);
    g->variances.conservativeResize(K + 1, Eigen::NoChange);
    g->weights[k] *= 0.5;
    g->weights[K] = g->weights[k];
    g->means.row(K) = g->means.row(k) - offset;
    g->means.row(k) += offset;
    g->variances.row(K) = g->variances.row(k);
  }
}

}  // namespace

VectorXd FrameLogLikelihood(const GmmUbm &ubm, const MatrixXd &frames, MatrixXd *posteriors) {
  Require(frames.cols() == ubm.dim(), "feature dimension does not match the UBM");
  const Index K = ubm.num_components(), T = frames.rows(), D = ubm.dim();
  const MatrixXd inv_var = ubm.variances.cwiseInverse();
  // log N(x; m, s) = c_k - 0.5 sum x^2/s + sum x m/s with
  // c_k = log w_k - 0.5 (D log 2pi + sum log s + sum m^2/s)
  VectorXd c(K);
  for (Index k = 0; k < K; ++k)
    c[k] = std::log(ubm.weights[k]) -
           0.5 * (D * std::log(2 * std::numbers::pi) + ubm.variances.row(k).array().log().sum() +
                  ubm.means.row(k).cwiseAbs2().dot(inv_var.row(k)));
  MatrixXd logp = -0.5 * inv_var * frames.cwiseAbs2().transpose();  // K x T
  logp.noalias() += ubm.means.cwiseProduct(inv_var) * frames.transpose();
  logp.colwise() += c;
  VectorXd ll(T);
  for (Index t = 0; t < T; ++t) {
    const double mx = logp.col(t).maxCoeff();
    ll[t] = mx + std::log((logp.col(t).array() - mx).exp().sum());
  }
  if (posteriors != nullptr) *posteriors = (logp.rowwise() - ll.transpose()).array().exp();
  return ll;
}

double TotalLogLikelihood(const GmmUbm &ubm, const MatrixXd &frames) {
  return FrameLogLikelihood(ubm, frames).sum();
}

GmmUbm TrainUbm(std::span<const FeatureMatrix> features, int K, int iters, UbmTrainLog *log,
                double variance_floor_ratio) {
  Require(K >= 1 && iters >= 0, "invalid UBM size");
  const MatrixXd x = Stack(features);
  Require(x.rows() >= K, "UBM has more components than frames");
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var =
      (x.rowwise() - mean).cwiseAbs2().colwise().mean().cwiseMax(1e-12);
  const VectorXd floor = (variance_floor_ratio * var).transpose();

  GmmUbm g;
  g.weights = VectorXd::Ones(1);
  g.means = mean;
  g.variances = var;
  int floored = 0;
  Index size = 1;
  while (size < K) {
    size = std::min<Index>(2 * size, K);
    Split(&g, size);
    for (int it = 0; it < 4; ++it) EmStep(x, floor, &g, &floored);
  }
  UbmTrainLog local;
  for (int it = 0; it < iters; ++it) local.log_likelihood.push_back(EmStep(x, floor, &g, &floored));
  if (iters > 0) local.log_likelihood.push_back(TotalLogLikelihood(g, x));
  local.floored = floored;
  if (log != nullptr) *log = std::move(local);
  return g;
}

VectorXd BaumWelchStats::FlatF() const {
  const RowMatrixXd rm = F;
  return Eigen::Map<const VectorXd>(rm.data(), rm.size());
}

BaumWelchStats AccumulateStats(const GmmUbm &ubm, const FeatureMatrix &features) {
  BaumWelchStats s;
  const Index K = ubm.num_components();
  s.N = VectorXd::Zero(K);
  s.F = MatrixXd::Zero(K, ubm.dim());
  if (features.rows.rows() == 0) return s;
  MatrixXd post;
  FrameLogLikelihood(ubm, features.rows, &post);
  s.N = post.rowwise().sum();
  s.F = post * features.rows - s.N.asDiagonal() * ubm.means;
  return s;
}

}  // namespace dcsep

// src/clustering.cc

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

#include "dcsep/clustering.h"

#include <limits>
#include <random>

namespace dcsep {

namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

Eigen::RowVectorXd UnitOr(const Eigen::RowVectorXd &v, const Eigen::RowVectorXd &fallback) {
  const double n = v.norm();
  return n > 0.0 ? Eigen::RowVectorXd(v / n) : fallback;
}

}  // namespace

std::uint64_t RestartSeed(std::uint64_t seed, int restart) {
  return SplitMix(seed ^ SplitMix(static_cast<std::uint64_t>(restart) + 1));
}

double CosineCost(const Eigen::Ref<const RowMatrixXd> &points, const MatrixXd &centroids,
                  const std::vector<int> &labels) {
  double cost = 0.0;
  for (Index i = 0; i < points.rows(); ++i)
    cost += 1.0 - points.row(i).dot(centroids.row(labels[i]));
  return cost;
}

ClusterAssignment KMeansCosineRun(const Eigen::Ref<const RowMatrixXd> &points, int C,
                                  std::uint64_t seed, int max_iter) {
  const Index n = points.rows();
  Require(C >= 1, "kmeans: C must be positive");
  Require(n >= C, "kmeans: fewer points than clusters");
  std::mt19937_64 rng(seed);

  // k-means++ seeding with cosine distance.
  MatrixXd mu(C, points.cols());
  std::uniform_int_distribution<Index> first(0, n - 1);
  mu.row(0) = points.row(first(rng));
  VectorXd best = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  for (int c = 1; c < C; ++c) {
    for (Index i = 0; i < n; ++i)
      best[i] = std::min(best[i], std::max(0.0, 1.0 - points.row(i).dot(mu.row(c - 1))));
    const double total = best.sum();
    Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      for (pick = 0; pick < n - 1; ++pick) {
        acc += best[pick];
        if (acc >= target && best[pick] > 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    mu.row(c) = points.row(pick);
  }

  ClusterAssignment a;
  a.labels.assign(n, -1);
  std::vector<int> labels(n);
  for (int it = 0; it < max_iter; ++it) {
    const MatrixXd sims = points * mu.transpose();  // n x C
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index arg = 0;
      for (int c = 1; c < C; ++c)
        if (sims(i, c) > sims(i, arg)) arg = c;
      labels[i] = static_cast<int>(arg);
    }
    // Empty clusters take the currently worst-served point.
    std::vector<Index> counts(C, 0);
    for (int l : labels) ++counts[l];
    for (int c = 0; c < C; ++c) {
      if (counts[c] > 0) continue;
      Index far = -1;
      double far_d = -1.0;
      for (Index i = 0; i < n; ++i) {
        if (counts[labels[i]] <= 1) continue;
        const double d = 1.0 - sims(i, labels[i]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) continue;
      --counts[labels[far]];
      labels[far] = c;
      ++counts[c];
      mu.row(c) = points.row(far);
      ++a.reseeds;
    }
    changed = labels != a.labels;
    a.labels = labels;

    MatrixXd sums = MatrixXd::Zero(C, points.cols());
    for (Index i = 0; i < n; ++i) sums.row(labels[i]) += points.row(i);
    for (int c = 0; c < C; ++c) mu.row(c) = UnitOr(sums.row(c), mu.row(c));
    a.iterations = it + 1;
    a.cost_history.push_back(CosineCost(points, mu, labels));
    if (!changed) break;
  }
  a.centroids = mu;
  a.total_cost = a.cost_history.back();
  return a;
}

ClusterAssignment KMeansCosine(const Eigen::Ref<const RowMatrixXd> &points, int C,
                               int restarts, std::uint64_t seed, int max_iter) {
  Require(restarts >= 1, "kmeans: restarts must be positive");
  ClusterAssignment best;
  for (int r = 0; r < restarts; ++r) {
    ClusterAssignment run = KMeansCosineRun(points, C, RestartSeed(seed, r), max_iter);
    if (r == 0 || run.total_cost < best.total_cost) best = std::move(run);
  }
  return best;
}

BinaryMaskSet MasksFromAssignment(const ClusterAssignment &a, const BinMask &mask,
                                  ExcludedBins policy, const RowMatrixXd *embeddings) {
  const Index T = mask.frames(), F = mask.freq_bins();
  Require(static_cast<Index>(a.labels.size()) == mask.retained(),
          "label count does not match retained bins");
  Require(policy == ExcludedBins::kZero ||
              (embeddings != nullptr && embeddings->rows() == T * F),
          "nearest-centroid policy needs all embeddings");
  const Index C = a.centroids.rows();
  BinaryMaskSet out;
  out.masks.assign(C, MatrixXb::Constant(T, F, false));
  std::size_t k = 0;
  for (Index t = 0; t < T; ++t)
    for (Index f = 0; f < F; ++f) {
      if (mask.keep(t, f)) {
        out.masks[a.labels[k++]](t, f) = true;
      } else if (policy == ExcludedBins::kNearestCentroid) {
        Index arg;
        (a.centroids * embeddings->row(t * F + f).transpose()).maxCoeff(&arg);
        out.masks[arg](t, f) = true;
      }
    }
  return out;
}

Spectrogram ApplyMask(const Spectrogram &X, const MatrixXb &mask) {
  Require(mask.rows() == X.frames() && mask.cols() == X.freq_bins(),
          "mask shape mismatch");
  Spectrogram out = X;
  out.bins = X.bins.cwiseProduct(mask.cast<std::complex<double>>());
  if (out.nyquist.size() == X.frames())
    for (Index t = 0; t < X.frames(); ++t)
      if (!mask(t, X.freq_bins() - 1)) out.nyquist[t] = 0.0;
  return out;
}

RowMatrixXd SelectRows(const RowMatrixXd &embeddings, const VectorXb &retained) {
  Require(embeddings.rows() == retained.size(), "row selection size mismatch");
  RowMatrixXd out(retained.count(), embeddings.cols());
  Index r = 0;
  for (Index i = 0; i < embeddings.rows(); ++i)
    if (retained[i]) out.row(r++) = embeddings.row(i);
  return out;
}

}  // namespace dcsep

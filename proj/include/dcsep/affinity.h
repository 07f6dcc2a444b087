// dcsep/affinity.h

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
#include <vector>

#include "dcsep/common.h"
#include "dcsep/dsp.h"

namespace dcsep {

using VectorXb = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

/// Which tf-bins take part in the loss and in clustering.  keep(t, f) is
/// false iff the mixture magnitude is more than `threshold_db` below the
/// utterance maximum.
struct BinMask {
  MatrixXb keep;  // T x F

  Index frames() const { return keep.rows(); }
  Index freq_bins() const { return keep.cols(); }
  Index retained() const { return keep.count(); }
  /// Row-major flattening, i = t * F + f, matching the embedding row order.
  VectorXb Flatten() const;
  static BinMask All(Index frames, Index freq_bins);
};

BinMask ComputeBinMask(const Spectrogram &mixture, double threshold_db = -40.0);

/// One-hot dominance target Y (N x C).  Excluded rows are all zero and
/// flagged false in `retained`.
struct AffinityTarget {
  MatrixXd Y;
  VectorXb retained;

  Index num_sources() const { return Y.cols(); }
};

/// Per retained bin, the loudest source gets the 1; exact ties go to the
/// lowest source index.
AffinityTarget BuildTargets(const std::vector<Spectrogram> &sources,
                            const BinMask &mask);
AffinityTarget BuildTargets(const std::vector<MatrixXd> &source_magnitudes,
                            const BinMask &mask);

namespace internal {

// Sum in ascending order so that the result does not depend on the order in
// which the terms were produced.
template <typename Scalar>
Scalar SortedSum(std::vector<Scalar> terms) {
  std::sort(terms.begin(), terms.end());
  Scalar acc = 0;
  for (Scalar t : terms) acc += t;
  return acc;
}

template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, 1> MaskedColumnSum(
    const Eigen::MatrixBase<DerivedA> &rows, const Eigen::MatrixBase<DerivedB> &weights,
    Index col, const VectorXb &retained) {
  using Scalar = typename DerivedA::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> acc =
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(rows.cols());
  for (Index i = 0; i < rows.rows(); ++i) {
    if (!retained[i]) continue;
    const Scalar w = weights(i, col);
    if (w != Scalar(0)) acc += w * rows.row(i).transpose();
  }
  return acc;
}

}  // namespace internal

/// ||V V^T - Y Y^T||_F^2 over retained rows, evaluated as
/// ||V^T V||^2 - 2 ||V^T Y||^2 + ||Y^T Y||^2 without forming N x N matrices.
/// The Y-dependent terms are reduced per column and summed in sorted order,
/// so permuting the columns of Y leaves the result bit-identical.
template <typename DerivedV, typename DerivedY>
typename DerivedV::Scalar AffinityLoss(const Eigen::MatrixBase<DerivedV> &V,
                                       const Eigen::MatrixBase<DerivedY> &Y,
                                       const VectorXb &retained) {
  using Scalar = typename DerivedV::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Require(V.rows() == Y.rows() && V.rows() == retained.size(),
          "affinity loss: row count mismatch");
  Mat Vr = V;
  for (Index i = 0; i < Vr.rows(); ++i)
    if (!retained[i]) Vr.row(i).setZero();
  const Mat vtv = Vr.transpose() * Vr;
  const Scalar vv = vtv.squaredNorm();

  const Index C = Y.cols();
  std::vector<Scalar> vy_terms(C), yy_terms;
  yy_terms.reserve(C * C);
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> ycols(C);
  for (Index c = 0; c < C; ++c) {
    vy_terms[c] = internal::MaskedColumnSum(V, Y, c, retained).squaredNorm();
    ycols[c] = Y.col(c);
    for (Index i = 0; i < Y.rows(); ++i)
      if (!retained[i]) ycols[c][i] = 0;
  }
  for (Index a = 0; a < C; ++a)
    for (Index b = 0; b < C; ++b) {
      const Scalar g = ycols[a].dot(ycols[b]);
      yy_terms.push_back(g * g);
    }
  return vv - 2 * internal::SortedSum(vy_terms) + internal::SortedSum(yy_terms);
}

/// dC/dV = 4 (V (V^T V) - Y (Y^T V)) on retained rows, zero elsewhere.
template <typename DerivedV, typename DerivedY>
Eigen::Matrix<typename DerivedV::Scalar, Eigen::Dynamic, Eigen::Dynamic>
AffinityLossGrad(const Eigen::MatrixBase<DerivedV> &V,
                 const Eigen::MatrixBase<DerivedY> &Y, const VectorXb &retained) {
  using Scalar = typename DerivedV::Scalar;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Require(V.rows() == Y.rows() && V.rows() == retained.size(),
          "affinity loss: row count mismatch");
  Mat Vr = V;
  Mat Yr = Y.template cast<Scalar>();
  for (Index i = 0; i < Vr.rows(); ++i)
    if (!retained[i]) {
      Vr.row(i).setZero();
      Yr.row(i).setZero();
    }
  const Mat vtv = Vr.transpose() * Vr;
  const Mat ytv = Yr.transpose() * Vr;
  return Scalar(4) * (Vr * vtv - Yr * ytv);
}

/// Row-wise unit normalization; zero rows stay zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
NormalizeRows(const Eigen::MatrixBase<Derived> &U) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> V = U;
  for (Index i = 0; i < V.rows(); ++i) {
    const Scalar n = V.row(i).norm();
    if (n > Scalar(0)) V.row(i) /= n;
  }
  return V;
}

/// Pulls a gradient with respect to V = NormalizeRows(U) back to U:
/// dU_i = (I - v_i v_i^T) dV_i / |u_i|.
template <typename DerivedU, typename DerivedG>
Eigen::Matrix<typename DerivedU::Scalar, Eigen::Dynamic, Eigen::Dynamic>
NormalizeRowsBackward(const Eigen::MatrixBase<DerivedU> &U,
                      const Eigen::MatrixBase<DerivedG> &grad_v) {
  using Scalar = typename DerivedU::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(U.rows(), U.cols());
  for (Index i = 0; i < U.rows(); ++i) {
    const Scalar n = U.row(i).norm();
    if (n <= Scalar(0)) {
      out.row(i).setZero();
      continue;
    }
    const auto v = (U.row(i) / n).eval();
    out.row(i) = (grad_v.row(i) - grad_v.row(i).dot(v) * v) / n;
  }
  return out;
}

/// Gradient of the affinity loss with respect to pre-normalization
/// embeddings U, where V = NormalizeRows(U).
template <typename DerivedU, typename DerivedY>
Eigen::Matrix<typename DerivedU::Scalar, Eigen::Dynamic, Eigen::Dynamic>
AffinityLossGradRaw(const Eigen::MatrixBase<DerivedU> &U,
                    const Eigen::MatrixBase<DerivedY> &Y, const VectorXb &retained) {
  const auto V = NormalizeRows(U);
  return NormalizeRowsBackward(U, AffinityLossGrad(V, Y, retained));
}

inline double AffinityLoss(const MatrixXd &V, const AffinityTarget &target) {
  return AffinityLoss(V, target.Y, target.retained);
}

}  // namespace dcsep

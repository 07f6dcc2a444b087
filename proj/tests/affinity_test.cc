#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "dcsep/affinity.h"

using namespace dcsep;

namespace {

// Eq. 1 literally: sum over all retained pairs.
double NaiveLoss(const MatrixXd &V, const MatrixXd &Y, const VectorXb &keep) {
  double acc = 0;
  for (Index i = 0; i < V.rows(); ++i)
    for (Index j = 0; j < V.rows(); ++j) {
      if (!keep[i] || !keep[j]) continue;
      const double d = V.row(i).dot(V.row(j)) - Y.row(i).dot(Y.row(j));
      acc += d * d;
    }
  return acc;
}

MatrixXd RandomUnitRows(Index n, Index d, std::mt19937 &rng) {
  std::normal_distribution<double> g;
  MatrixXd v(n, d);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = g(rng);
  return NormalizeRows(v);
}

MatrixXd RandomOneHot(Index n, Index c, std::mt19937 &rng) {
  std::uniform_int_distribution<Index> pick(0, c - 1);
  MatrixXd y = MatrixXd::Zero(n, c);
  for (Index i = 0; i < n; ++i) y(i, pick(rng)) = 1;
  return y;
}

}  // namespace

TEST_CASE("affinity loss equals the naive double sum") {
  std::mt19937 rng(42);
  const MatrixXd V = RandomUnitRows(6, 3, rng);
  const MatrixXd Y = RandomOneHot(6, 2, rng);
  const VectorXb all = VectorXb::Constant(6, true);
  const double naive = NaiveLoss(V, Y, all);
  CHECK(std::abs(AffinityLoss(V, Y, all) - naive) <= 1e-12 * naive);

  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<Index> nd(2, 50), dd(1, 8), cd(2, 3);
    const Index n = nd(rng), d = dd(rng), c = cd(rng);
    const MatrixXd v = RandomUnitRows(n, d, rng);
    const MatrixXd y = RandomOneHot(n, c, rng);
    VectorXb keep(n);
    std::bernoulli_distribution b(0.8);
    for (Index i = 0; i < n; ++i) keep[i] = b(rng);
    const double ref = NaiveLoss(v, y, keep);
    CHECK(std::abs(AffinityLoss(v, y, keep) - ref) <= 1e-12 * std::max(ref, 1.0));
  }
}

TEST_CASE("perfect embeddings give zero loss and zero gradient") {
  std::mt19937 rng(1);
  const MatrixXd Y = RandomOneHot(20, 3, rng);
  const VectorXb all = VectorXb::Constant(20, true);
  CHECK(AffinityLoss(Y, Y, all) == 0.0);
  CHECK(AffinityLossGrad(Y, Y, all).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(AffinityLossGradRaw(Y, Y, all).cwiseAbs().maxCoeff() < 1e-8);

  // Angle property: same class -> parallel, different class -> orthogonal.
  MatrixXd V = MatrixXd::Zero(20, 5);
  V.leftCols(3) = Y;
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 20; ++j) {
      const double expect = Y.row(i).dot(Y.row(j));
      CHECK(std::abs(V.row(i).dot(V.row(j)) - expect) < 1e-6);
    }
}

TEST_CASE("column permutation of Y is bit-exact") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const MatrixXd V = RandomUnitRows(40, 5, rng);
    const MatrixXd Y = RandomOneHot(40, 3, rng);
    const VectorXb keep = VectorXb::Constant(40, true);
    std::vector<Index> perm(3);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    MatrixXd P(40, 3);
    for (Index c = 0; c < 3; ++c) P.col(c) = Y.col(perm[c]);
    CHECK(AffinityLoss(V, Y, keep) == AffinityLoss(V, P, keep));
  }
}

TEST_CASE("loss is nonnegative") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd V = RandomUnitRows(30, 4, rng);
    const MatrixXd Y = RandomOneHot(30, 2, rng);
    CHECK(AffinityLoss(V, Y, VectorXb::Constant(30, true)) >= 0.0);
  }
}

TEST_CASE("gradient through normalization matches central differences") {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  MatrixXd U(12, 4);
  for (Index i = 0; i < U.size(); ++i) U.data()[i] = g(rng);
  const MatrixXd Y = RandomOneHot(12, 3, rng);
  VectorXb keep = VectorXb::Constant(12, true);
  keep[5] = false;
  const MatrixXd grad = AffinityLossGradRaw(U, Y, keep);
  const double h = 1e-5;
  for (Index i = 0; i < U.rows(); ++i)
    for (Index j = 0; j < U.cols(); ++j) {
      MatrixXd up = U, dn = U;
      up(i, j) += h;
      dn(i, j) -= h;
      const double fd =
          (AffinityLoss(NormalizeRows(up), Y, keep) - AffinityLoss(NormalizeRows(dn), Y, keep)) /
          (2 * h);
      CHECK(std::abs(fd - grad(i, j)) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
  CHECK(grad.row(5).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bin mask and targets") {
  MatrixXd a(2, 3), b(2, 3);
  a << 1.0, 0.5, 0.001, 2.0, 0.3, 1.0;
  b << 0.5, 0.5, 0.0, 0.1, 0.9, 1.0;
  BinMask mask = BinMask::All(2, 3);
  mask.keep(0, 2) = false;
  const auto tgt = BuildTargets(std::vector<MatrixXd>{a, b}, mask);
  CHECK(tgt.Y(0, 0) == 1.0);  // a louder
  CHECK(tgt.Y(1, 0) == 1.0);  // exact tie -> lowest index
  CHECK(tgt.Y.row(2).sum() == 0.0);
  CHECK(!tgt.retained[2]);
  CHECK(tgt.Y(4, 1) == 1.0);
  CHECK(tgt.Y(5, 0) == 1.0);  // tie

  CHECK_THROWS(BuildTargets(std::vector<MatrixXd>{a, MatrixXd::Zero(3, 3)}, mask));

  // random pair against a per-bin scalar comparison
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  MatrixXd p(7, 9), q(7, 9);
  for (Index i = 0; i < p.size(); ++i) {
    p.data()[i] = u(rng);
    q.data()[i] = u(rng);
  }
  const auto t2 = BuildTargets(std::vector<MatrixXd>{p, q}, BinMask::All(7, 9));
  for (Index t = 0; t < 7; ++t)
    for (Index f = 0; f < 9; ++f) CHECK(t2.Y(t * 9 + f, 0) == (p(t, f) >= q(t, f) ? 1.0 : 0.0));
}

TEST_CASE("bin mask thresholds at -40 dB") {
  Spectrogram s;
  s.bins = MatrixXcd::Zero(1, 4);
  s.bins(0, 0) = 1.0;
  s.bins(0, 1) = 0.011;
  s.bins(0, 2) = 0.009;
  s.bins(0, 3) = 0.0;
  const auto m = ComputeBinMask(s, -40.0);
  CHECK(m.keep(0, 0));
  CHECK(m.keep(0, 1));
  CHECK(!m.keep(0, 2));
  CHECK(!m.keep(0, 3));
}

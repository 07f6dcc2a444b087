#include <random>

#include "doctest.h"
#include "dcsep/network.h"

using namespace dcsep;

namespace {

NetworkConfig TinyConfig(CellType cell) {
  NetworkConfig c;
  c.freq_bins = 5;
  c.ivector_width = 4;
  c.embedding_dim = 3;
  c.hidden = 4;
  c.layers = 2;
  c.cell = cell;
  return c;
}

RowMatrixXd RandomInput(Index T, Index width, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  RowMatrixXd x(T, width);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return x;
}

AffinityTarget RandomTarget(Index n, Index c, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<Index> pick(0, c - 1);
  AffinityTarget t;
  t.Y = MatrixXd::Zero(n, c);
  t.retained = VectorXb::Constant(n, true);
  for (Index i = 0; i < n; ++i) t.Y(i, pick(rng)) = 1;
  t.retained[3] = false;
  t.Y.row(3).setZero();
  return t;
}

}  // namespace

TEST_CASE("input width with stacked i-vectors") {
  NetworkConfig c;
  c.freq_bins = 256;
  c.embedding_dim = 20;
  c.ivector_width = 2 * 10;
  CHECK(c.input_dim() == 276);
  CHECK(c.output_dim() == 5120);

  MatrixXd feats = MatrixXd::Random(7, 256);
  MatrixXd iv(2, 10);
  for (Index c = 0; c < 2; ++c)
    for (Index j = 0; j < 10; ++j) iv(c, j) = static_cast<double>(c * 10 + j);
  const RowMatrixXd x = AssembleInput(feats, iv);
  CHECK(x.cols() == 276);
  for (Index t = 0; t < 7; ++t) {
    CHECK(x.row(t).tail(20) == x.row(0).tail(20));
    CHECK(x(t, 256) == 0.0);
    CHECK(x(t, 256 + 10) == 10.0);  // second slot starts after the first
  }
}

TEST_CASE("forward produces unit rows deterministically") {
  for (CellType cell : {CellType::kGru, CellType::kLstm}) {
    const auto p = InitNetwork(TinyConfig(cell), 3);
    const auto x = RandomInput(6, p.config.input_dim(), 4);
    const RowMatrixXd v = Forward(p, x);
    CHECK(v.rows() == 30);
    CHECK(v.cols() == 3);
    CHECK((v.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-6);
    CHECK(Forward(p, x) == v);
  }
}

TEST_CASE("forward rejects a mismatched input width") {
  const auto p = InitNetwork(TinyConfig(CellType::kGru), 3);
  CHECK_THROWS(Forward(p, RandomInput(6, 5, 1)));
}

TEST_CASE("network gradient matches central differences") {
  for (CellType cell : {CellType::kGru, CellType::kLstm}) {
    CAPTURE(CellTypeName(cell));
    const auto p = InitNetwork(TinyConfig(cell), 17);
    const auto x = RandomInput(5, p.config.input_dim(), 18);
    const auto tgt = RandomTarget(25, 2, 19);
    VectorXd grad = VectorXd::Zero(p.theta.size());
    LossAndGradient(p, x, tgt, 1.0, &grad);
    const double h = 1e-5;
    int checked = 0;
    for (Index k = 0; k < p.theta.size(); k += 7) {
      auto up = p, dn = p;
      up.theta[k] += h;
      dn.theta[k] -= h;
      const double fd = (AffinityLoss(Forward(up, x), tgt) - AffinityLoss(Forward(dn, x), tgt)) /
                        (2 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      ++checked;
    }
    CHECK(checked > 50);
  }
}

TEST_CASE("widened network reproduces the narrow one") {
  auto c = TinyConfig(CellType::kGru);
  c.ivector_width = 0;
  const auto p = InitNetwork(c, 5);
  const auto wide = WidenInput(p, 6);
  const auto x = RandomInput(4, 5, 6);
  RowMatrixXd xw(4, 11);
  xw << x, RandomInput(4, 6, 7);
  CHECK((Forward(p, x) - Forward(wide, xw)).cwiseAbs().maxCoeff() < 1e-12);
}

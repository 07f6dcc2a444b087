#include <random>

#include "doctest.h"
#include "dcsep/clustering.h"

using namespace dcsep;

namespace {

RowMatrixXd RandomUnit(Index n, Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  RowMatrixXd x(n, d);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  return NormalizeRows(x);
}

}  // namespace

TEST_CASE("antipodal groups are recovered exactly for every seed") {
  RowMatrixXd pts(20, 3);
  std::mt19937 rng(1);
  std::normal_distribution<double> g(0.0, 0.05);
  for (Index i = 0; i < 20; ++i) {
    const double s = i < 10 ? 1.0 : -1.0;
    pts.row(i) << s + g(rng), g(rng), g(rng);
  }
  pts = NormalizeRows(pts);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto a = KMeansCosine(pts, 2, 1, seed);
    for (Index i = 1; i < 20; ++i) CHECK((a.labels[i] == a.labels[0]) == (i < 10));
  }
}

TEST_CASE("identical points trigger the re-seed policy") {
  RowMatrixXd pts = RowMatrixXd::Zero(8, 2);
  pts.col(0).setOnes();
  const auto a = KMeansCosine(pts, 2, 1, 3);
  CHECK(a.reseeds >= 1);
  CHECK(a.total_cost == doctest::Approx(0.0));
  CHECK(std::count(a.labels.begin(), a.labels.end(), 1) >= 1);
}

TEST_CASE("Lloyd cost is non-increasing") {
  const auto pts = RandomUnit(200, 4, 5);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = KMeansCosineRun(pts, 3, seed);
    for (std::size_t i = 1; i < a.cost_history.size(); ++i)
      CHECK(a.cost_history[i] <= a.cost_history[i - 1] + 1e-12);
    CHECK(a.total_cost == doctest::Approx(CosineCost(pts, a.centroids, a.labels)));
    CHECK((a.centroids.rowwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("restarts never lose to a single restart of the same stream") {
  const auto pts = RandomUnit(30, 3, 9);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto best = KMeansCosine(pts, 3, 10, seed);
    for (int r = 0; r < 10; ++r)
      CHECK(best.total_cost <= KMeansCosineRun(pts, 3, RestartSeed(seed, r)).total_cost);
  }
}

TEST_CASE("too few points") { CHECK_THROWS(KMeansCosine(RandomUnit(2, 3, 1), 3, 1, 0)); }

TEST_CASE("masks from assignment") {
  BinMask all = BinMask::All(2, 3);
  ClusterAssignment a;
  a.labels.assign(6, 0);
  a.centroids = MatrixXd::Identity(2, 2);
  auto set = MasksFromAssignment(a, all);
  CHECK(set.masks[0].all());
  CHECK(!set.masks[1].any());

  // checkerboard
  for (int i = 0; i < 6; ++i) a.labels[i] = ((i / 3) + (i % 3)) % 2;
  set = MasksFromAssignment(a, all);
  CHECK((set.masks[0].array() != set.masks[1].array()).all());

  // random labels with exclusions: the masks sum to the retained indicator
  std::mt19937 rng(4);
  std::bernoulli_distribution keep(0.7);
  BinMask m;
  m.keep.resize(9, 11);
  for (Index i = 0; i < m.keep.size(); ++i) m.keep.data()[i] = keep(rng);
  a.centroids = MatrixXd::Identity(3, 3);
  a.labels.resize(m.retained());
  std::uniform_int_distribution<int> pick(0, 2);
  for (auto &l : a.labels) l = pick(rng);
  set = MasksFromAssignment(a, m);
  Eigen::MatrixXi sum = Eigen::MatrixXi::Zero(9, 11);
  for (const auto &mk : set.masks) sum += mk.cast<int>();
  CHECK(sum == m.keep.cast<int>());

  // nearest-centroid policy covers every bin
  RowMatrixXd emb = RandomUnit(99, 3, 5);
  set = MasksFromAssignment(a, m, ExcludedBins::kNearestCentroid, &emb);
  sum.setZero();
  for (const auto &mk : set.masks) sum += mk.cast<int>();
  CHECK((sum.array() == 1).all());

  a.labels.pop_back();
  CHECK_THROWS(MasksFromAssignment(a, m));
}

TEST_CASE("apply mask") {
  Waveform w;
  w.samples = VectorXd::Random(3000);
  const auto X = Stft(w, 512, 128);
  const MatrixXb ones = MatrixXb::Constant(X.frames(), X.freq_bins(), true);
  CHECK(ApplyMask(X, ones).bins == X.bins);
  CHECK(ApplyMask(X, ones).nyquist == X.nyquist);
  const MatrixXb zeros = MatrixXb::Constant(X.frames(), X.freq_bins(), false);
  CHECK(ApplyMask(X, zeros).bins.cwiseAbs().maxCoeff() == 0.0);
  CHECK(ApplyMask(X, zeros).nyquist.cwiseAbs().maxCoeff() == 0.0);

  MatrixXb half = ones;
  half.leftCols(100).setConstant(false);
  const auto once = ApplyMask(X, half);
  CHECK(ApplyMask(once, half).bins == once.bins);
  CHECK_THROWS(ApplyMask(X, MatrixXb::Constant(2, 2, true)));
}

// tests/acceptance.cc

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

// Acceptance checks.  Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.
//
// Usage: acceptance [scratch-dir] [--jobs N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dcsep/affinity.h"
#include "dcsep/clustering.h"
#include "dcsep/dsp.h"
#include "dcsep/evaluation.h"
#include "dcsep/gmm.h"
#include "dcsep/ivector.h"
#include "dcsep/pipeline.h"

using namespace dcsep;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void Report(int id, bool ok, const std::string &what, const std::string &detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string Fmt(const char *f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---- loss ----

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

MatrixXd RandomOneHot(Index n, Index c, std::mt19937 &rng) {
  std::uniform_int_distribution<Index> pick(0, c - 1);
  MatrixXd y = MatrixXd::Zero(n, c);
  for (Index i = 0; i < n; ++i) y(i, pick(rng)) = 1.0;
  return y;
}

MatrixXd RandomGaussian(Index r, Index c, std::mt19937 &rng) {
  std::normal_distribution<double> g;
  MatrixXd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

void Criterion1() {
  const auto t0 = Clock::now();
  std::mt19937 rng(101);
  double worst = 0.0;
  bool exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<Index> nd(2, 50), dd(1, 8), cd(2, 3);
    const Index n = nd(rng), d = dd(rng), c = cd(rng);
    const MatrixXd V = NormalizeRows(RandomGaussian(n, d, rng));
    const MatrixXd Y = RandomOneHot(n, c, rng);
    VectorXb keep(n);
    std::bernoulli_distribution b(0.8);
    for (Index i = 0; i < n; ++i) keep[i] = b(rng);
    const double ref = NaiveLoss(V, Y, keep);
    const double got = AffinityLoss(V, Y, keep);
    worst = std::max(worst, std::abs(got - ref) / std::max(ref, 1.0));

    std::vector<Index> perm(c);
    for (Index k = 0; k < c; ++k) perm[k] = k;
    while (std::next_permutation(perm.begin(), perm.end())) {
      MatrixXd Yp(n, c);
      for (Index k = 0; k < c; ++k) Yp.col(k) = Y.col(perm[k]);
      if (AffinityLoss(V, Yp, keep) != got) exact = false;
    }
  }
  const double secs = Seconds(t0);
  Report(1, worst <= 1e-12 && exact && secs < 5.0, "affinity loss matches the naive sum",
         Fmt("max rel err %.3g", worst) + ", permutation " + (exact ? "bit-exact" : "differs") +
             Fmt(", %.2f s", secs));
}

// ---- gradient ----

void Criterion2() {
  const auto t0 = Clock::now();
  std::mt19937 rng(202);
  double worst = 0.0;
  for (int point = 0; point < 10; ++point) {
    const Index n = 10 + point, d = 3 + point % 4, c = 2 + point % 2;
    const MatrixXd U = RandomGaussian(n, d, rng);
    const MatrixXd Y = RandomOneHot(n, c, rng);
    VectorXb keep = VectorXb::Constant(n, true);
    keep[point % n] = false;
    const MatrixXd grad = AffinityLossGradRaw(U, Y, keep);
    MatrixXd fd(n, d);
    const double h = 1e-5;
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) {
        MatrixXd up = U, dn = U;
        up(i, j) += h;
        dn(i, j) -= h;
        fd(i, j) = (AffinityLoss(NormalizeRows(up), Y, keep) -
                    AffinityLoss(NormalizeRows(dn), Y, keep)) / (2 * h);
      }
    worst = std::max(worst, (grad - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  const double secs = Seconds(t0);
  Report(2, worst < 1e-4 && secs < 10.0, "gradient through normalization",
         Fmt("max rel err %.3g", worst) + Fmt(", %.2f s", secs));
}

// ---- EM monotonicity on the synthetic development set ----

bool NonDecreasing(const std::vector<double> &v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[i - 1] - 1e-8 * std::abs(v[i - 1])) return false;
  return true;
}

void Criterion3(const ExperimentConfig &cfg, const Corpus &corpus) {
  const auto t0 = Clock::now();
  UbmTrainLog ulog;
  const GmmUbm ubm = TrainSpeakerUbm(cfg, corpus, &ulog);
  TvTrainLog tlog;
  TrainSpeakerTv(cfg, corpus, ubm, cfg.speaker.tv_rank, &tlog);
  const double secs = Seconds(t0);
  const bool u = NonDecreasing(ulog.log_likelihood), t = NonDecreasing(tlog.objective);
  Report(3, u && t && secs < 60.0, "UBM and TV EM objectives are monotone",
         std::string("ubm ") + (u ? "monotone" : "decreases") + ", tv " +
             (t ? "monotone" : "decreases") + Fmt(", %.1f s", secs));
}

// ---- i-vector oracle ----

GmmUbm RandomUbm(Index K, Index D, std::mt19937 &rng) {
  std::uniform_real_distribution<double> u(0.3, 2.0);
  GmmUbm ubm;
  ubm.weights = VectorXd::Constant(K, 1.0 / K);
  ubm.means = RandomGaussian(K, D, rng);
  ubm.variances.resize(K, D);
  for (Index i = 0; i < ubm.variances.size(); ++i) ubm.variances.data()[i] = u(rng);
  return ubm;
}

void Criterion4() {
  std::mt19937 rng(404);
  std::uniform_real_distribution<double> counts(0.5, 30.0);
  double worst = 0.0;
  bool zero_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Index K = 2 + trial % 3, D = 2 + trial % 2, R = 2 + trial % 3;
    const GmmUbm ubm = RandomUbm(K, D, rng);
    auto tv = InitTv(ubm, static_cast<int>(R), 7 + trial);
    tv.T = RandomGaussian(K * D, R, rng);
    BaumWelchStats s;
    s.N.resize(K);
    for (Index k = 0; k < K; ++k) s.N[k] = counts(rng);
    s.F = RandomGaussian(K, D, rng) * 3.0;

    // Dense supervector solve.
    VectorXd nsup(K * D), fsup(K * D);
    for (Index k = 0; k < K; ++k)
      for (Index d = 0; d < D; ++d) {
        nsup[k * D + d] = s.N[k];
        fsup[k * D + d] = s.F(k, d);
      }
    const MatrixXd sinv = tv.sigma.cwiseInverse().asDiagonal();
    const MatrixXd L =
        MatrixXd::Identity(R, R) + tv.T.transpose() * nsup.asDiagonal() * sinv * tv.T;
    const VectorXd oracle = L.fullPivLu().solve(tv.T.transpose() * sinv * fsup);
    const VectorXd w = ExtractIvector(tv, s);
    worst = std::max(worst, (w - oracle).norm() / std::max(oracle.norm(), 1e-300));

    BaumWelchStats z;
    z.N = VectorXd::Zero(K);
    z.F = MatrixXd::Zero(K, D);
    const VectorXd w0 = ExtractIvector(tv, z);
    if ((w0.array() != 0.0).any()) zero_exact = false;
  }
  Report(4, worst <= 1e-10 && zero_exact, "i-vector matches the dense solve",
         Fmt("max rel err %.3g", worst) + ", zero stats " + (zero_exact ? "exact" : "nonzero"));
}

// ---- TV subspace recovery ----

std::vector<BaumWelchStats> SyntheticStats(const MatrixXd &T0, Index K, Index D, int utts,
                                           double frames, std::mt19937 &rng) {
  std::normal_distribution<double> g;
  std::vector<BaumWelchStats> out;
  for (int u = 0; u < utts; ++u) {
    VectorXd w(T0.cols());
    for (Index r = 0; r < w.size(); ++r) w[r] = g(rng);
    const VectorXd offset = T0 * w;
    BaumWelchStats s;
    s.N = VectorXd::Constant(K, frames);
    s.F.resize(K, D);
    for (Index k = 0; k < K; ++k)
      for (Index d = 0; d < D; ++d)
        s.F(k, d) = frames * offset[k * D + d] + std::sqrt(frames) * g(rng);
    out.push_back(s);
  }
  return out;
}

double MaxPrincipalAngleDeg(const MatrixXd &a, const MatrixXd &b) {
  const MatrixXd qa = a.householderQr().householderQ() * MatrixXd::Identity(a.rows(), a.cols());
  const MatrixXd qb = b.householderQr().householderQ() * MatrixXd::Identity(b.rows(), b.cols());
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(qa.transpose() * qb).singularValues();
  return std::acos(std::min(1.0, sv.minCoeff())) * 180.0 / M_PI;
}

void Criterion5() {
  const Index K = 4, D = 3, R = 2;
  double worst = 0.0;
  for (unsigned seed : {51u, 52u, 53u}) {
    std::mt19937 rng(seed);
    const MatrixXd T0 = RandomGaussian(K * D, R, rng);
    const auto stats = SyntheticStats(T0, K, D, 300, 50.0, rng);
    GmmUbm ubm;
    ubm.weights = VectorXd::Constant(K, 1.0 / K);
    ubm.means = MatrixXd::Zero(K, D);
    ubm.variances = MatrixXd::Ones(K, D);
    const auto tv = TrainTv(stats, ubm, static_cast<int>(R), 20, seed);
    worst = std::max(worst, MaxPrincipalAngleDeg(tv.T, T0));
  }
  Report(5, worst < 5.0, "TV EM recovers the generating subspace",
         Fmt("max principal angle %.3f deg over 3 seeds", worst));
}

// ---- LDA ----

void Criterion6() {
  std::mt19937 rng(606);
  std::normal_distribution<double> g;
  std::vector<VectorXd> w;
  std::vector<int> labels;
  const MatrixXd centers = 2.0 * RandomGaussian(3, 6, rng);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 40; ++i) {
      VectorXd x(6);
      for (Index d = 0; d < 6; ++d) x[d] = centers(c, d) + g(rng) * (1.0 + 0.25 * d);
      w.push_back(x);
      labels.push_back(c);
    }
  const auto lda = TrainLda(w, labels, 2);
  const MatrixXd lhs = lda.between * lda.A;
  const MatrixXd rhs = lda.within * lda.A * lda.eigenvalues.asDiagonal();
  const double residual = (lhs - rhs).norm() / lhs.norm();
  double best_random = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    VectorXd d(6);
    for (Index k = 0; k < 6; ++k) d[k] = g(rng);
    best_random = std::max(best_random, FisherRatio(lda, d.normalized()));
  }
  const bool dominant = lda.eigenvalues[0] >= best_random - 1e-12;
  Report(6, residual < 1e-8 && dominant, "LDA generalized eigenproblem",
         Fmt("residual %.3g", residual) + Fmt(", top eigenvalue %.4f", lda.eigenvalues[0]) +
             Fmt(" vs best random %.4f", best_random));
}

// ---- K-means ----

void Criterion7() {
  bool antipodal = true;
  {
    RowMatrixXd pts(40, 4);
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 0.05);
    for (Index i = 0; i < 40; ++i) {
      const double s = i < 20 ? 1.0 : -1.0;
      pts.row(i) << g(rng), s + g(rng), g(rng), g(rng);
    }
    pts = NormalizeRows(pts);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto a = KMeansCosine(pts, 2, 1, seed);
      for (Index i = 1; i < 40; ++i)
        if ((a.labels[i] == a.labels[0]) != (i < 20)) antipodal = false;
    }
  }
  std::mt19937 rng(77);
  const RowMatrixXd pts = NormalizeRows(RandomGaussian(200, 5, rng));
  bool monotone = true, dominance = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = KMeansCosineRun(pts, 3, seed);
    for (std::size_t i = 1; i < a.cost_history.size(); ++i)
      if (a.cost_history[i] > a.cost_history[i - 1] + 1e-12) monotone = false;
    const auto best = KMeansCosine(pts, 3, 10, seed);
    for (int r = 0; r < 10; ++r)
      if (best.total_cost > KMeansCosineRun(pts, 3, RestartSeed(seed, r)).total_cost)
        dominance = false;
  }
  Report(7, antipodal && monotone && dominance, "spherical K-means",
         std::string("antipodal ") + (antipodal ? "exact" : "missed") + ", cost " +
             (monotone ? "monotone" : "increases") + ", restarts " +
             (dominance ? "dominate" : "lose"));
}

// ---- STFT and mixing ----

void Criterion8() {
  std::mt19937 rng(808);
  std::normal_distribution<double> g;
  double worst_rt = 0.0, worst_snr = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w;
    w.sample_rate = 8000;
    w.samples.resize(8000 + 333 * trial);
    for (auto &x : w.samples) x = g(rng);
    const Waveform back = Istft(Stft(w, 512, 128));
    // Interior samples: one window away from either end.
    const Index lo = 512, hi = std::min<Index>(w.size(), back.size()) - 512;
    worst_rt = std::max(worst_rt,
                        (back.samples.segment(lo, hi - lo) - w.samples.segment(lo, hi - lo)).norm() /
                            w.samples.segment(lo, hi - lo).norm());
    Waveform b = w;
    for (auto &x : b.samples) x = 0.3 * g(rng);
    for (double snr : {-5.0, 0.0, 2.5, 10.0}) {
      const Mixture m = MixAtSnr(w, b, snr);
      const double realized = 10.0 * std::log10(Energy(w) / Energy(m.scaled_b));
      worst_snr = std::max(worst_snr, std::abs(realized - snr));
    }
  }
  Report(8, worst_rt < 1e-6 && worst_snr < 1e-9, "STFT round trip and mixing SNR",
         Fmt("interior round-trip rel err %.3g", worst_rt) + Fmt(", SNR err %.3g dB", worst_snr));
}

// ---- criteria 9 to 11 ----

struct EndToEnd {
  double ibm_sdri = 0.0;
  std::string ibm_text;  // per-mixture values, full precision
  double secs = 0.0;
  double level0 = 0.0, oracle1 = 0.0, realistic1 = 0.0;
  bool realistic_done = false;
  bool table2 = false;
  double clean_id = 0.0;
  int tv_rank = 0;
  std::map<std::string, std::string> files;  // report bytes by relative path
};

std::string Slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

EndToEnd RunEndToEnd(const ExperimentConfig &desk, const fs::path &dir) {
  EndToEnd r;
  {
    ExperimentConfig zero = desk;
    zero.corpus.snr_min_db = 0.0;
    zero.corpus.snr_max_db = 0.0;
    zero.corpus.test_mixtures = 20;
    const Corpus c = GenerateCorpus(zero.corpus);
    const int wl = zero.dsp.window_len, hop = zero.dsp.hop;
    for (const auto &m : c.test) {
      std::vector<Spectrogram> src;
      for (const auto &s : m.sources) src.push_back(Stft(s, wl, hop));
      const Spectrogram X = Stft(m.mixture, wl, hop);
      const auto masks = IdealBinaryMask(src, ComputeBinMask(X, zero.dsp.bin_threshold_db));
      std::vector<Waveform> est;
      for (const auto &mk : masks.masks) est.push_back(Istft(ApplyMask(X, mk)));
      const double v = SdrImprovement(est, m.sources, m.mixture).MeanImprovement();
      r.ibm_sdri += v / static_cast<double>(c.test.size());
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%s\t%.17g\n", m.id.c_str(), v);
      r.ibm_text += buf;
    }
  }

  const auto t0 = Clock::now();
  const Corpus corpus = GenerateCorpus(desk.corpus);
  std::ostringstream log;
  Experiment exp(desk, corpus, &log);
  const ExperimentResult res = RunExperiment(exp);
  fs::remove_all(dir);
  WriteReports(res, dir.string());
  r.secs = Seconds(t0);

  r.level0 = res.level0.MeanImprovement();
  const DimensionResult &d = res.dims.at(0);
  r.oracle1 = d.oracle.empty() ? std::nan("") : d.oracle[0].MeanImprovement();
  r.realistic_done = !d.realistic.empty() && !d.realistic[0].test_reports.empty();
  r.realistic1 = r.realistic_done ? d.realistic[0].MeanImprovement() : std::nan("");
  r.table2 = d.representation.has_value() &&
             (d.representation->correct || d.representation->incorrect) &&
             fs::exists(dir / "table2_representation.tsv");
  r.clean_id = d.clean_id.accuracy;
  r.tv_rank = static_cast<int>(d.system.tv.rank());
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) r.files[fs::relative(e.path(), dir).string()] = Slurp(e.path());
  return r;
}

}  // namespace

int main(int argc, char **argv) {
  fs::path scratch = fs::temp_directory_path() / "dcsep_acceptance";
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--jobs" && i + 1 < argc) {
      jobs = std::stoi(argv[++i]);
    } else {
      scratch = a;
    }
  }

  try {
    ExperimentConfig desk = DeskPreset();
    desk.pipeline.jobs = jobs;
    desk.trainer.jobs = jobs;

    Criterion1();
    Criterion2();
    {
      const Corpus corpus = GenerateCorpus(desk.corpus);
      Criterion3(desk, corpus);
    }
    Criterion4();
    Criterion5();
    Criterion6();
    Criterion7();
    Criterion8();

    const EndToEnd first = RunEndToEnd(desk, scratch / "run1");
    Report(9, first.ibm_sdri >= 5.0, "ideal binary mask on 0 dB mixtures",
           Fmt("mean SDRi %.2f dB over 20 mixtures", first.ibm_sdri));
    const bool a = first.level0 > 0.0;
    const bool b = first.oracle1 >= first.level0 - 0.1;
    Report(10, a && b && first.realistic_done && first.table2 && first.secs < 1800.0,
           "desk experiment",
           Fmt("level 0 %.2f dB", first.level0) + Fmt(", oracle level 1 %.2f dB", first.oracle1) +
               Fmt(", realistic level 1 %.2f dB", first.realistic1) + ", representation table " +
               (first.table2 ? "written" : "missing") + Fmt(", %.0f s", first.secs));
    Report(11, first.clean_id >= 0.9 && first.tv_rank >= 8, "speaker identification on clean speech",
           Fmt("accuracy %.3f", first.clean_id) + Fmt(" at TV rank %.0f", first.tv_rank));

    const EndToEnd second = RunEndToEnd(desk, scratch / "run2");
    std::string diff;
    if (first.ibm_text != second.ibm_text) diff += " ibm";
    for (const auto &[name, bytes] : first.files) {
      auto it = second.files.find(name);
      if (it == second.files.end() || it->second != bytes) diff += " " + name;
    }
    if (first.files.size() != second.files.size()) diff += " file-count";
    Report(12, diff.empty(), "rerun reproduces the reports byte for byte",
           diff.empty() ? std::to_string(first.files.size() + 1) + " outputs identical"
                        : "differs:" + diff);
  } catch (const std::exception &e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }
  return failures == 0 ? 0 : 1;
}

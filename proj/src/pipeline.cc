// src/pipeline.cc

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

#include "dcsep/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "json.hpp"

namespace dcsep {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads.  Results must be
// written by index, so the outcome does not depend on scheduling.
template <typename Fn>
void ParallelFor(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto &t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void Log(const Experiment &exp, const std::string &msg) {
  if (exp.log() != nullptr) *exp.log() << msg << std::endl;
}

VectorXd FlattenRows(const MatrixXd &m) {
  const RowMatrixXd r = m;
  return Eigen::Map<const VectorXd>(r.data(), r.size());
}

MatrixXd UnflattenRows(const VectorXd &v, Index rows, Index cols) {
  return Eigen::Map<const RowMatrixXd>(v.data(), rows, cols);
}

NormalizationStats IvectorStats(const std::vector<MatrixXd> &blocks) {
  Require(!blocks.empty(), "no i-vectors to normalize");
  FeatureMatrix f;
  f.rows.resize(static_cast<Index>(blocks.size()), blocks[0].size());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    f.rows.row(static_cast<Index>(i)) = FlattenRows(blocks[i]).transpose();
  return ComputeNormalization(std::span<const FeatureMatrix>(&f, 1));
}

MatrixXd NormalizeIvectors(const NormalizationStats &stats, const MatrixXd &block) {
  Require(stats.mean.size() == block.size(), "i-vector block does not match the model input");
  FeatureMatrix f;
  f.rows = FlattenRows(block).transpose();
  Normalize(stats, &f);
  return UnflattenRows(f.rows.row(0).transpose(), block.rows(), block.cols());
}

std::string Fixed(double v) {
  if (!std::isfinite(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

FeatureMatrix SpeakerFeatures(const Waveform &w, const MfccOptions &mfcc, double vad_db) {
  const FeatureMatrix f = Mfcc(w, mfcc);
  const auto energy = FrameEnergyDb(w, mfcc.frame_len, mfcc.hop);
  Require(static_cast<Index>(energy.size()) == f.rows.rows(), "frame count mismatch");
  return SelectFrames(f, EnergyVad(energy, vad_db));
}

VectorXd Embed(const SpeakerSystem &system, const Waveform &w) {
  if (w.size() == 0 || Energy(w) == 0.0) return VectorXd::Zero(system.dim());
  const FeatureMatrix f = SpeakerFeatures(w, system.mfcc, system.vad_threshold_db);
  const VectorXd iv = ExtractIvector(system.tv, AccumulateStats(system.ubm, f));
  return system.lda ? ProjectLda(*system.lda, iv) : iv;
}

std::vector<const Utterance *> DevelopmentSet(const Corpus &corpus) {
  std::vector<const Utterance *> out;
  for (const auto &u : corpus.utterances)
    if (u.role == UtteranceRole::kDev || u.role == UtteranceRole::kTrain) out.push_back(&u);
  return out;
}

int TvRankFor(const ExperimentConfig &cfg, int ivec_dim) {
  return cfg.speaker.use_lda ? cfg.speaker.tv_rank : ivec_dim;
}

namespace {

std::vector<FeatureMatrix> DevFeatures(const ExperimentConfig &cfg, const Corpus &corpus) {
  const auto dev = DevelopmentSet(corpus);
  Require(!dev.empty(), "no development utterances");
  std::vector<FeatureMatrix> feats(dev.size());
  ParallelFor(dev.size(), cfg.pipeline.jobs, [&](std::size_t i) {
    feats[i] = SpeakerFeatures(dev[i]->wave, cfg.dsp.mfcc, cfg.dsp.vad_threshold_db);
  });
  return feats;
}

std::vector<BaumWelchStats> DevStats(const ExperimentConfig &cfg, const Corpus &corpus,
                                     const GmmUbm &ubm) {
  const auto feats = DevFeatures(cfg, corpus);
  std::vector<BaumWelchStats> stats(feats.size());
  ParallelFor(feats.size(), cfg.pipeline.jobs,
              [&](std::size_t i) { stats[i] = AccumulateStats(ubm, feats[i]); });
  return stats;
}

}  // namespace

GmmUbm TrainSpeakerUbm(const ExperimentConfig &cfg, const Corpus &corpus, UbmTrainLog *log) {
  const auto feats = DevFeatures(cfg, corpus);
  return TrainUbm(feats, cfg.speaker.ubm_components, cfg.speaker.ubm_iters, log);
}

TotalVariabilityModel TrainSpeakerTv(const ExperimentConfig &cfg, const Corpus &corpus,
                                     const GmmUbm &ubm, int rank, TvTrainLog *log) {
  const auto stats = DevStats(cfg, corpus, ubm);
  return TrainTv(stats, ubm, rank, cfg.speaker.tv_iters, cfg.speaker.seed, log);
}

LdaProjection TrainSpeakerLda(const ExperimentConfig &cfg, const Corpus &corpus,
                              const GmmUbm &ubm, const TotalVariabilityModel &tv, int lda_dim) {
  const auto dev = DevelopmentSet(corpus);
  const auto stats = DevStats(cfg, corpus, ubm);
  std::vector<VectorXd> ivs(stats.size());
  std::vector<int> labels(stats.size());
  ParallelFor(stats.size(), cfg.pipeline.jobs, [&](std::size_t i) {
    ivs[i] = ExtractIvector(tv, stats[i]);
    labels[i] = dev[i]->speaker;
  });
  return TrainLda(ivs, labels, lda_dim);
}

std::vector<SpeakerModel> EnrollSpeakers(const SpeakerSystem &system, const Corpus &corpus) {
  const auto enroll = corpus.WithRole(UtteranceRole::kEnroll);
  Require(!enroll.empty(), "corpus has no enrollment utterances");
  std::vector<VectorXd> ivs;
  std::vector<int> labels;
  for (const auto *u : enroll) {
    ivs.push_back(Embed(system, u->wave));
    labels.push_back(u->speaker);
  }
  return AverageBySpeaker(ivs, labels);
}

// ---------------------------------------------------------------------------

SeparationOutput Separate(const SeparationModel &model, const Waveform &mixture,
                          const MatrixXd &ivectors, const DspConfig &dsp,
                          const SeparationOptions &opts) {
  const NetworkConfig &net = model.network.config;
  Require(net.freq_bins == dsp.window_len / 2, "model does not match the STFT framing");
  Require(ivectors.size() == net.ivector_width,
          "separation: model expects " + std::to_string(net.ivector_width) +
              " i-vector inputs, got " + std::to_string(ivectors.size()),
          Error::Kind::kDependency);
  const Spectrogram X = Stft(mixture, dsp.window_len, dsp.hop);
  const FeatureMatrix feats = LogMagnitude(X, &model.features);
  const MatrixXd iv = ivectors.size() > 0 ? NormalizeIvectors(model.ivectors, ivectors) : MatrixXd();
  const RowMatrixXd V = Forward(model.network, feats.rows, iv);
  Require(V.allFinite(), "separation: non-finite embeddings", Error::Kind::kNumeric);

  SeparationOutput out;
  out.bins = ComputeBinMask(X, opts.bin_threshold_db);
  Require(out.bins.retained() >= opts.num_sources, "separation: too few bins above threshold");
  const RowMatrixXd points = SelectRows(V, out.bins.Flatten());
  out.assignment = KMeansCosine(points, opts.num_sources, opts.kmeans_restarts, opts.seed);
  out.masks = MasksFromAssignment(out.assignment, out.bins, opts.excluded, &V);
  for (const auto &m : out.masks.masks) {
    Waveform w = Istft(ApplyMask(X, m));
    if (w.size() < mixture.size()) {
      const Index n = w.size();
      w.samples.conservativeResize(mixture.size());
      w.samples.tail(mixture.size() - n).setZero();
    }
    out.estimates.push_back(std::move(w));
  }
  return out;
}

MatrixXd OrderIvectors(const std::vector<Waveform> &signals, const std::vector<VectorXd> &ivectors) {
  Require(!signals.empty() && signals.size() == ivectors.size(),
          "order_ivectors: one i-vector per signal required");
  std::vector<std::size_t> idx(signals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> energy(signals.size());
  std::vector<std::uint64_t> hash(signals.size());
  for (std::size_t i = 0; i < signals.size(); ++i) {
    energy[i] = Energy(signals[i]);
    hash[i] = Fnv1a(signals[i].samples.data(),
                    static_cast<std::size_t>(signals[i].size()) * sizeof(double));
  }
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (energy[a] != energy[b]) return energy[a] > energy[b];
    return hash[a] < hash[b];
  });
  MatrixXd out(static_cast<Index>(signals.size()), ivectors[0].size());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = ivectors[idx[r]].transpose();
  return out;
}

std::uint64_t MixtureSeed(std::uint64_t seed, const std::string &mixture_id) {
  return DeriveSeed(seed, Fnv1a(mixture_id.data(), mixture_id.size()));
}

// ---------------------------------------------------------------------------

std::string SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "tr";
    case Split::kValidation: return "cv";
    case Split::kTest: return "tt";
  }
  return "";
}

std::string ModeName(IvectorMode m) { return m == IvectorMode::kOracle ? "oracle" : "realistic"; }

IvectorMode ParseMode(const std::string &s) {
  if (s == "oracle") return IvectorMode::kOracle;
  if (s == "realistic") return IvectorMode::kRealistic;
  throw Error("unknown mode '" + s + "' (expected oracle or realistic)", Error::Kind::kUsage);
}

std::string LevelTag(IvectorMode mode, int level, int ivec_dim) {
  if (level == 0) return "baseline";
  return ModeName(mode) + "_d" + std::to_string(ivec_dim);
}

Experiment::Experiment(ExperimentConfig config, Corpus corpus, std::ostream *log)
    : config_(std::move(config)), corpus_(std::move(corpus)), log_(log) {
  config_.Validate();
  const DspConfig &dsp = config_.dsp;
  PerSplit<std::vector<FeatureMatrix>> raw;
  for (Split s : kSplits) {
    const auto &mix = mixtures(s);
    Require(!mix.empty(), "corpus split " + SplitName(s) + " is empty");
    raw[s].resize(mix.size());
    examples_[s].resize(mix.size());
    ParallelFor(mix.size(), config_.pipeline.jobs, [&](std::size_t i) {
      const Spectrogram X = Stft(mix[i].mixture, dsp.window_len, dsp.hop);
      raw[s][i] = LogMagnitude(X);
      std::vector<Spectrogram> src;
      for (const auto &w : mix[i].sources) src.push_back(Stft(w, dsp.window_len, dsp.hop));
      examples_[s][i].target = BuildTargets(src, ComputeBinMask(X, dsp.bin_threshold_db));
    });
  }
  feature_stats_ = ComputeNormalization(raw[Split::kTrain]);
  for (Split s : kSplits)
    for (std::size_t i = 0; i < raw[s].size(); ++i) {
      Normalize(feature_stats_, &raw[s][i]);
      examples_[s][i].features = std::move(raw[s][i].rows);
    }
}

const std::vector<MixtureRecord> &Experiment::mixtures(Split s) const {
  switch (s) {
    case Split::kTrain: return corpus_.train;
    case Split::kValidation: return corpus_.validation;
    case Split::kTest: return corpus_.test;
  }
  return corpus_.test;
}

SeparationOptions Experiment::separation_options() const {
  SeparationOptions o;
  o.num_sources = config_.pipeline.num_sources;
  o.bin_threshold_db = config_.dsp.bin_threshold_db;
  o.kmeans_restarts = config_.pipeline.kmeans_restarts;
  o.excluded = config_.pipeline.excluded_bins;
  o.seed = config_.pipeline.seed;
  return o;
}

TrainingExample Experiment::Example(Split s, std::size_t i) const { return examples_[s].at(i); }

double LevelArtifacts::MeanImprovement() const {
  Require(!test_reports.empty(), "level has no test reports");
  double acc = 0.0;
  for (const auto &r : test_reports) acc += r.MeanImprovement();
  return acc / static_cast<double>(test_reports.size());
}

namespace {

IvectorSet IvectorsOf(const Experiment &exp, const SpeakerSystem &system,
                      const PerSplit<std::vector<const std::vector<Waveform> *>> &signals) {
  IvectorSet out;
  for (Split s : kSplits) {
    const auto &set = signals[s];
    out[s].resize(set.size());
    ParallelFor(set.size(), exp.config().pipeline.jobs, [&](std::size_t i) {
      std::vector<VectorXd> ivs;
      for (const auto &w : *set[i]) ivs.push_back(Embed(system, w));
      out[s][i] = OrderIvectors(*set[i], ivs);
    });
  }
  return out;
}

}  // namespace

IvectorSet OracleIvectors(const Experiment &exp, const SpeakerSystem &system) {
  PerSplit<std::vector<const std::vector<Waveform> *>> signals;
  for (Split s : kSplits)
    for (const auto &m : exp.mixtures(s)) signals[s].push_back(&m.sources);
  return IvectorsOf(exp, system, signals);
}

IvectorSet EstimateIvectors(const Experiment &exp, const SpeakerSystem &system,
                            const EstimateSet &estimates) {
  PerSplit<std::vector<const std::vector<Waveform> *>> signals;
  for (Split s : kSplits)
    for (const auto &e : estimates[s]) signals[s].push_back(&e);
  return IvectorsOf(exp, system, signals);
}

EstimateSet SeparateSplits(const Experiment &exp, const SeparationModel &model,
                           const IvectorSet *inputs, bool all_splits) {
  EstimateSet out;
  const SeparationOptions base = exp.separation_options();
  for (Split s : kSplits) {
    if (!all_splits && s != Split::kTest) continue;
    const auto &mix = exp.mixtures(s);
    if (inputs != nullptr)
      Require((*inputs)[s].size() == mix.size(),
              "missing input i-vectors for split " + SplitName(s), Error::Kind::kDependency);
    out[s].resize(mix.size());
    ParallelFor(mix.size(), exp.config().pipeline.jobs, [&](std::size_t i) {
      SeparationOptions opts = base;
      opts.seed = MixtureSeed(base.seed, mix[i].id);
      out[s][i] = Separate(model, mix[i].mixture, inputs ? (*inputs)[s][i] : MatrixXd(),
                           exp.config().dsp, opts)
                      .estimates;
    });
  }
  return out;
}

std::vector<SdrReport> ScoreTest(const Experiment &exp, const EstimateSet &estimates) {
  const auto &mix = exp.mixtures(Split::kTest);
  Require(estimates[Split::kTest].size() == mix.size(), "test estimates missing");
  std::vector<SdrReport> out(mix.size());
  for (std::size_t i = 0; i < mix.size(); ++i)
    out[i] = SdrImprovement(estimates[Split::kTest][i], mix[i].sources, mix[i].mixture);
  return out;
}

LevelArtifacts RunLevel(const Experiment &exp, const LevelRequest &req) {
  const ExperimentConfig &cfg = exp.config();
  Require(req.level >= 0, "level must be non-negative", Error::Kind::kUsage);
  if (req.level == 0) {
    Require(req.prev == nullptr, "level 0 takes no previous level", Error::Kind::kUsage);
  } else {
    Require(req.prev != nullptr,
            "level " + std::to_string(req.level) + " needs the level " +
                std::to_string(req.level - 1) + " artifacts",
            Error::Kind::kDependency);
    Require(req.system != nullptr || req.inputs != nullptr,
            "level " + std::to_string(req.level) + " needs speaker models",
            Error::Kind::kDependency);
  }
  LevelArtifacts out;
  out.level = req.level;
  out.mode = req.mode;
  const std::string tag = "level " + std::to_string(req.level) +
                          (req.level > 0 ? " (" + ModeName(req.mode) + ")" : "");

  NetworkConfig net = cfg.net;
  net.freq_bins = cfg.dsp.window_len / 2;
  std::optional<NetworkParameters> init;
  if (req.level > 0) {
    if (req.inputs != nullptr) {
      out.inputs = *req.inputs;
    } else if (req.mode == IvectorMode::kOracle) {
      out.inputs = OracleIvectors(exp, *req.system);
    } else {
      for (Split s : {Split::kTrain, Split::kValidation, Split::kTest})
        Require(req.prev->estimates[s].size() == exp.mixtures(s).size(),
                "level " + std::to_string(req.level - 1) + " estimates missing for split " +
                    SplitName(s),
                Error::Kind::kDependency);
      out.inputs = EstimateIvectors(exp, *req.system, req.prev->estimates);
    }
    Log(exp, tag + ": input i-vectors ready");
    net.ivector_width = static_cast<int>(out.inputs[Split::kTrain].at(0).size());
    out.model.ivectors = IvectorStats(out.inputs[Split::kTrain]);
    const NetworkParameters &base = req.init != nullptr ? *req.init : req.prev->model.network;
    if (base.config.ivector_width == net.ivector_width) init = base;
    else if (base.config.ivector_width == 0) init = WidenInput(base, net.ivector_width);
    else throw Error("initial network has an incompatible i-vector input width");
  }

  PerSplit<std::vector<TrainingExample>> sets;
  for (Split s : {Split::kTrain, Split::kValidation}) {
    const auto &mix = exp.mixtures(s);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      TrainingExample ex = exp.Example(s, i);
      if (req.level > 0) ex.ivectors = NormalizeIvectors(out.model.ivectors, out.inputs[s][i]);
      sets[s].push_back(std::move(ex));
    }
  }
  Log(exp, tag + ": training");
  out.training = Train(cfg.trainer, net, sets[Split::kTrain], sets[Split::kValidation],
                       init ? &*init : nullptr);
  out.model.network = out.training.params;
  out.model.features = exp.feature_stats();
  out.model.level = req.level;
  Log(exp, tag + ": best validation loss " + FormatDouble(out.training.validation_loss));

  out.estimates = SeparateSplits(exp, out.model, req.level > 0 ? &out.inputs : nullptr,
                                 req.separate_all);
  out.test_reports = ScoreTest(exp, out.estimates);
  Log(exp, tag + ": mean test SDR improvement " + Fixed(out.MeanImprovement()) + " dB");
  return out;
}

// ---------------------------------------------------------------------------

IdReport EstimateIdentification(const Experiment &exp, const SpeakerSystem &system,
                                const std::vector<SpeakerModel> &models,
                                const LevelArtifacts &level) {
  const auto &mix = exp.mixtures(Split::kTest);
  Require(level.test_reports.size() == mix.size(), "level has no test reports");
  std::vector<VectorXd> probes;
  std::vector<int> labels;
  for (std::size_t m = 0; m < mix.size(); ++m)
    for (std::size_t r = 0; r < mix[m].sources.size(); ++r) {
      const int e = level.test_reports[m].permutation[r];
      probes.push_back(Embed(system, level.estimates[Split::kTest][m][e]));
      labels.push_back(mix[m].speakers[r]);
    }
  return SpeakerIdEval(models, probes, labels);
}

ExperimentResult RunExperiment(const Experiment &exp) {
  const ExperimentConfig &cfg = exp.config();
  const int L = cfg.pipeline.levels;
  ExperimentResult result;
  result.level0 = RunLevel(exp, {0, IvectorMode::kOracle, nullptr, nullptr, nullptr, nullptr,
                                 L >= 1 && cfg.pipeline.run_realistic});

  Log(exp, "speaker models: training UBM");
  UbmTrainLog ubm_log;
  const GmmUbm ubm = TrainSpeakerUbm(cfg, exp.corpus(), &ubm_log);
  for (int dim : cfg.pipeline.ivector_dims) {
    DimensionResult d;
    d.ivec_dim = dim;
    d.ubm_log = ubm_log;
    d.system.ubm = ubm;
    d.system.mfcc = cfg.dsp.mfcc;
    d.system.vad_threshold_db = cfg.dsp.vad_threshold_db;
    Log(exp, "speaker models: total variability, rank " + std::to_string(TvRankFor(cfg, dim)));
    d.system.tv = TrainSpeakerTv(cfg, exp.corpus(), ubm, TvRankFor(cfg, dim), &d.tv_log);
    if (cfg.speaker.use_lda) d.system.lda = TrainSpeakerLda(cfg, exp.corpus(), ubm, d.system.tv, dim);

    const auto models = EnrollSpeakers(d.system, exp.corpus());
    {
      std::vector<VectorXd> probes;
      std::vector<int> labels;
      for (const auto &u : exp.corpus().utterances)
        if (u.role == UtteranceRole::kTest) {
          probes.push_back(Embed(d.system, u.wave));
          labels.push_back(u.speaker);
        }
      d.clean_id = SpeakerIdEval(models, probes, labels);
    }
    d.baseline_id = EstimateIdentification(exp, d.system, models, result.level0);
    Log(exp, "d=" + std::to_string(dim) + ": clean id " + Fixed(d.clean_id.accuracy) +
                 ", level-0 estimate id " + Fixed(d.baseline_id.accuracy));

    for (int l = 1; l <= L && cfg.pipeline.run_oracle; ++l) {
      const LevelArtifacts *prev = l == 1 ? &result.level0 : &d.oracle.back();
      d.oracle.push_back(RunLevel(exp, {l, IvectorMode::kOracle, prev, &d.system, nullptr,
                                        nullptr, false}));
    }
    for (int l = 1; l <= L && cfg.pipeline.run_realistic; ++l) {
      const LevelArtifacts *prev = l == 1 ? &result.level0 : &d.realistic.back();
      const NetworkParameters *init =
          cfg.pipeline.run_oracle ? &d.oracle[l - 1].model.network : nullptr;
      d.realistic.push_back(RunLevel(exp, {l, IvectorMode::kRealistic, prev, &d.system, init,
                                           nullptr, l < L}));
    }
    if (!d.oracle.empty()) d.oracle_id = EstimateIdentification(exp, d.system, models, d.oracle[0]);
    if (!d.realistic.empty())
      d.realistic_id = EstimateIdentification(exp, d.system, models, d.realistic[0]);
    if (!d.oracle.empty() && !d.realistic.empty())
      d.representation = RepresentationAnalysis(BuildSourceRecords(
          d.realistic[0].test_reports, d.oracle[0].test_reports, d.baseline_id.outcomes));
    result.dims.push_back(std::move(d));
  }
  return result;
}

// ---------------------------------------------------------------------------

namespace {

void WriteText(const fs::path &p, const std::string &text) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  Require(os.good(), "cannot write " + p.string(), Error::Kind::kIo);
  os << text;
}

nlohmann::json LevelJson(const LevelArtifacts &a) {
  nlohmann::json j;
  j["level"] = a.level;
  j["mode"] = a.level == 0 ? "baseline" : ModeName(a.mode);
  j["mean_sdr_improvement_db"] = a.MeanImprovement();
  j["validation_loss"] = a.training.validation_loss;
  j["best_run"] = a.training.best_run;
  nlohmann::json per = nlohmann::json::array();
  for (const auto &r : a.test_reports) per.push_back(r.improvement);
  j["test_improvements_db"] = per;
  return j;
}

nlohmann::json IdJson(const IdReport &r) {
  nlohmann::json j;
  j["accuracy"] = r.accuracy;
  j["correct"] = r.correct;
  j["total"] = r.total;
  nlohmann::json conf = nlohmann::json::array();
  for (const auto &[k, v] : r.confusion) conf.push_back({k.first, k.second, v});
  j["confusion"] = conf;
  return j;
}

std::string TrainLog(const TrainResult &t) {
  std::string s;
  for (const auto &e : t.log) s += e.Format() + "\n";
  return s;
}

}  // namespace

void WriteReports(const ExperimentResult &result, const std::string &dir) {
  const fs::path root(dir);
  const double base = result.level0.MeanImprovement();
  auto level1 = [](const std::vector<LevelArtifacts> &v) {
    return v.empty() ? std::nan("") : v[0].MeanImprovement();
  };

  std::string fig2 =
      "ivec_dim\tbaseline_sdri\toracle_sdri\trealistic_sdri\toracle_gain\trealistic_gain\n";
  std::string fig3 = "ivec_dim\tmode\tlevel\tsdri\n";
  std::string tab1 = "ivec_dim\tclean\tbaseline\toracle\trealistic\n";
  std::string tab2 = "ivec_dim\tgroup\tcount\tsdri\toracle_incr\n";
  nlohmann::json summary;
  summary["level0"] = LevelJson(result.level0);
  summary["dims"] = nlohmann::json::array();

  for (const auto &d : result.dims) {
    const std::string dim = std::to_string(d.ivec_dim);
    const double o = level1(d.oracle), r = level1(d.realistic);
    fig2 += dim + "\t" + Fixed(base) + "\t" + Fixed(o) + "\t" + Fixed(r) + "\t" + Fixed(o - base) +
            "\t" + Fixed(r - base) + "\n";
    for (const auto *chain : {&d.oracle, &d.realistic}) {
      const std::string mode = chain == &d.oracle ? "oracle" : "realistic";
      if (chain->empty()) continue;
      fig3 += dim + "\t" + mode + "\t0\t" + Fixed(base) + "\n";
      for (const auto &a : *chain)
        fig3 += dim + "\t" + mode + "\t" + std::to_string(a.level) + "\t" +
                Fixed(a.MeanImprovement()) + "\n";
    }
    tab1 += dim + "\t" + Fixed(d.clean_id.accuracy) + "\t" + Fixed(d.baseline_id.accuracy) + "\t" +
            (d.oracle_id ? Fixed(d.oracle_id->accuracy) : "nan") + "\t" +
            (d.realistic_id ? Fixed(d.realistic_id->accuracy) : "nan") + "\n";

    nlohmann::json dj;
    dj["ivec_dim"] = d.ivec_dim;
    dj["clean_id"] = IdJson(d.clean_id);
    dj["baseline_id"] = IdJson(d.baseline_id);
    if (d.oracle_id) dj["oracle_id"] = IdJson(*d.oracle_id);
    if (d.realistic_id) dj["realistic_id"] = IdJson(*d.realistic_id);
    dj["ubm_log_likelihood"] = d.ubm_log.log_likelihood;
    dj["tv_objective"] = d.tv_log.objective;
    for (const auto *chain : {&d.oracle, &d.realistic}) {
      nlohmann::json levels = nlohmann::json::array();
      for (const auto &a : *chain) levels.push_back(LevelJson(a));
      dj[chain == &d.oracle ? "oracle" : "realistic"] = levels;
    }
    if (d.representation) {
      nlohmann::json rep;
      for (const auto &[name, group] :
           {std::pair{"correct_id", d.representation->correct},
            std::pair{"false_id", d.representation->incorrect}}) {
        if (group) {
          tab2 += dim + "\t" + name + "\t" + std::to_string(group->count) + "\t" +
                  Fixed(group->mean_improvement) + "\t" + Fixed(group->oracle_increase) + "\n";
          rep[name] = {{"count", group->count},
                       {"sdri", group->mean_improvement},
                       {"oracle_incr", group->oracle_increase}};
        } else {
          tab2 += dim + "\t" + name + "\t0\t-\t-\n";
          rep[name] = nullptr;
        }
      }
      dj["representation"] = rep;
    }
    summary["dims"].push_back(dj);
  }
  WriteText(root / "fig2_sdr.tsv", fig2);
  WriteText(root / "fig3_levels.tsv", fig3);
  WriteText(root / "table1_speaker_id.tsv", tab1);
  WriteText(root / "table2_representation.tsv", tab2);
  WriteText(root / "summary.json", summary.dump(2) + "\n");
  WriteText(root / "logs" / "train_baseline.log", TrainLog(result.level0.training));
  for (const auto &d : result.dims)
    for (const auto *chain : {&d.oracle, &d.realistic})
      for (const auto &a : *chain)
        WriteText(root / "logs" /
                      ("train_level" + std::to_string(a.level) + "_" +
                       LevelTag(a.mode, a.level, d.ivec_dim) + ".log"),
                  TrainLog(a.training));
}

ModelContainer EstimatesToContainer(const EstimateSet &estimates) {
  ModelContainer c;
  c.metadata["kind"] = "estimates";
  for (Split s : kSplits) {
    c.metadata["count." + SplitName(s)] = std::to_string(estimates[s].size());
    for (std::size_t m = 0; m < estimates[s].size(); ++m)
      for (std::size_t k = 0; k < estimates[s][m].size(); ++k)
        c.Put(SplitName(s) + "/" + std::to_string(m) + "/" + std::to_string(k),
              estimates[s][m][k].samples);
  }
  return c;
}

EstimateSet EstimatesFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "estimates", "container does not hold estimates", Error::Kind::kIo);
  EstimateSet out;
  for (Split s : kSplits) {
    const std::size_t n = std::stoul(c.Meta("count." + SplitName(s)));
    out[s].resize(n);
    for (std::size_t m = 0; m < n; ++m)
      for (int k = 0;; ++k) {
        const std::string name = SplitName(s) + "/" + std::to_string(m) + "/" + std::to_string(k);
        if (!c.Has(name)) break;
        Waveform w;
        w.samples = c.GetVector(name);
        out[s][m].push_back(std::move(w));
      }
  }
  return out;
}

ModelContainer IvectorsToContainer(const IvectorSet &ivectors) {
  ModelContainer c;
  c.metadata["kind"] = "ivectors";
  for (Split s : kSplits) {
    c.metadata["count." + SplitName(s)] = std::to_string(ivectors[s].size());
    for (std::size_t m = 0; m < ivectors[s].size(); ++m)
      c.Put(SplitName(s) + "/" + std::to_string(m), ivectors[s][m]);
  }
  return c;
}

IvectorSet IvectorsFromContainer(const ModelContainer &c) {
  Require(c.Meta("kind") == "ivectors", "container does not hold i-vectors", Error::Kind::kIo);
  IvectorSet out;
  for (Split s : kSplits) {
    const std::size_t n = std::stoul(c.Meta("count." + SplitName(s)));
    for (std::size_t m = 0; m < n; ++m)
      out[s].push_back(c.GetMatrix(SplitName(s) + "/" + std::to_string(m)));
  }
  return out;
}

void WriteArtifacts(const Experiment &exp, const ExperimentResult &result,
                    const std::string &dir) {
  const fs::path root(dir);
  auto save_level = [&](const LevelArtifacts &a, int dim) {
    const std::string lvl = "level" + std::to_string(a.level);
    const std::string tag = LevelTag(a.mode, a.level, dim);
    fs::create_directories(root / "models" / lvl);
    fs::create_directories(root / "estimates" / lvl);
    ModelContainer model = ToContainer(a.model);
    model.metadata["trainer_seed"] = std::to_string(exp.config().trainer.seed);
    model.Save((root / "models" / lvl / (tag + ".bin")).string());
    EstimatesToContainer(a.estimates).Save((root / "estimates" / lvl / (tag + ".bin")).string());
    const auto &mix = exp.mixtures(Split::kTest);
    for (std::size_t m = 0; m < a.estimates[Split::kTest].size(); ++m) {
      const fs::path d = root / "estimates" / lvl / tag / mix[m].id;
      fs::create_directories(d);
      for (std::size_t k = 0; k < a.estimates[Split::kTest][m].size(); ++k)
        WriteWav((d / ("est_" + std::to_string(k) + ".wav")).string(),
                 a.estimates[Split::kTest][m][k]);
    }
    if (a.level > 0) {
      fs::create_directories(root / "ivectors" / lvl);
      IvectorsToContainer(a.inputs).Save((root / "ivectors" / lvl / (tag + ".bin")).string());
    }
  };
  save_level(result.level0, 0);
  fs::create_directories(root / "models" / "speaker");
  const std::string seed = std::to_string(exp.config().speaker.seed);
  std::string ubm_hash;
  if (!result.dims.empty()) {
    ModelContainer ubm = ToContainer(result.dims[0].system.ubm);
    ubm.metadata["seed"] = seed;
    ubm.Save((root / "models" / "speaker" / "ubm.bin").string());
    ubm_hash = ubm.Hash();
  }
  for (const auto &d : result.dims) {
    const std::string suffix = "_d" + std::to_string(d.ivec_dim) + ".bin";
    ModelContainer tv = ToContainer(d.system.tv);
    tv.metadata["ubm_hash"] = ubm_hash;
    tv.metadata["seed"] = seed;
    tv.Save((root / "models" / "speaker" / ("tv" + suffix)).string());
    if (d.system.lda) {
      ModelContainer lda = ToContainer(*d.system.lda);
      lda.metadata["tv_hash"] = tv.Hash();
      lda.Save((root / "models" / "speaker" / ("lda" + suffix)).string());
    }
    for (const auto *chain : {&d.oracle, &d.realistic})
      for (const auto &a : *chain) save_level(a, d.ivec_dim);
  }
}

}  // namespace dcsep

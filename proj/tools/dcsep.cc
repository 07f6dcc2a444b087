// tools/dcsep.cc

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

// Command-line driver: corpus generation, staged training, separation of a
// single mixture, evaluation and the full experiment.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "dcsep/pipeline.h"

using namespace dcsep;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string work = "work";
  std::vector<std::string> overrides;
  int jobs = 0;
};

void AddCommon(CLI::App *cmd, Common *c) {
  cmd->add_option("--work", c->work, "experiment directory")->capture_default_str();
  cmd->add_option("--set", c->overrides, "override a config key (key=value)");
  cmd->add_option("--jobs", c->jobs, "worker threads (default: all cores)");
}

int DefaultJobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentConfig LoadConfig(const std::string &path, const Common &c) {
  Require(fs::exists(path), "missing artifact " + path, Error::Kind::kDependency);
  Config cfg = Config::Load(path);
  for (const auto &kv : c.overrides) {
    const auto eq = kv.find('=');
    Require(eq != std::string::npos, "--set expects key=value, got '" + kv + "'",
            Error::Kind::kUsage);
    cfg.Set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.Set("pipeline.jobs", std::to_string(c.jobs > 0 ? c.jobs : DefaultJobs()));
  return ExperimentConfig::FromConfig(cfg);
}

ExperimentConfig WorkConfig(const Common &c) {
  return LoadConfig((fs::path(c.work) / "config.cfg").string(), c);
}

fs::path Need(const fs::path &p) {
  Require(fs::exists(p), "missing artifact " + p.string(), Error::Kind::kDependency);
  return p;
}

void Say(const std::string &msg) { std::cerr << "dcsep: " << msg << std::endl; }

void WriteFile(const fs::path &p, const std::string &text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  Require(os.good(), "cannot write " + p.string(), Error::Kind::kIo);
  os << text;
}

fs::path SpeakerDir(const Common &c) { return fs::path(c.work) / "models" / "speaker"; }

SpeakerSystem LoadSpeakerSystem(const Common &c, const ExperimentConfig &cfg, int dim) {
  SpeakerSystem s;
  const auto ubm_c = ModelContainer::Load(Need(SpeakerDir(c) / "ubm.bin").string());
  s.ubm = UbmFromContainer(ubm_c);
  const std::string suffix = "_d" + std::to_string(dim) + ".bin";
  const auto tv_c = ModelContainer::Load(Need(SpeakerDir(c) / ("tv" + suffix)).string());
  Require(tv_c.Meta("ubm_hash") == ubm_c.Hash(),
          "tv" + suffix + " was trained on a different UBM; retrain the tv stage",
          Error::Kind::kDependency);
  s.tv = TvFromContainer(tv_c);
  if (cfg.speaker.use_lda)
    s.lda = LdaFromContainer(ModelContainer::Load(Need(SpeakerDir(c) / ("lda" + suffix)).string()));
  s.mfcc = cfg.dsp.mfcc;
  s.vad_threshold_db = cfg.dsp.vad_threshold_db;
  return s;
}

int PickDim(const ExperimentConfig &cfg, int dim) {
  if (dim <= 0) return cfg.pipeline.ivector_dims.front();
  Require(std::find(cfg.pipeline.ivector_dims.begin(), cfg.pipeline.ivector_dims.end(), dim) !=
              cfg.pipeline.ivector_dims.end(),
          "--dim " + std::to_string(dim) + " is not in pipeline.ivector_dims", Error::Kind::kUsage);
  return dim;
}

fs::path ModelPath(const Common &c, int level, const std::string &tag) {
  return fs::path(c.work) / "models" / ("level" + std::to_string(level)) / (tag + ".bin");
}

fs::path EstimatePath(const Common &c, int level, const std::string &tag) {
  return fs::path(c.work) / "estimates" / ("level" + std::to_string(level)) / (tag + ".bin");
}

std::string TrainLogText(const TrainResult &t) {
  std::string s;
  for (const auto &e : t.log) s += e.Format() + "\n";
  return s;
}

// ---------------------------------------------------------------------------

int CmdCorpus(const std::string &config, const std::string &out, bool force, const Common &c) {
  const fs::path root(out);
  if (fs::exists(root / "corpus")) {
    Require(force, "corpus directory " + (root / "corpus").string() + " exists (use --force)",
            Error::Kind::kUsage);
    fs::remove_all(root / "corpus");
  }
  const ExperimentConfig cfg = LoadConfig(config, c);
  Say("generating corpus");
  const Corpus corpus = GenerateCorpus(cfg.corpus);
  SaveCorpus(corpus, (root / "corpus").string());
  ExperimentConfig stored = cfg;
  stored.pipeline.jobs = 1;
  WriteFile(root / "config.cfg", stored.ToText());
  Say("wrote " + std::to_string(corpus.utterances.size()) + " utterances and " +
      std::to_string(corpus.train.size() + corpus.validation.size() + corpus.test.size()) +
      " mixtures to " + root.string());
  return 0;
}

int CmdTrain(const std::string &stage, int level, const std::string &mode_name, int dim_flag,
             const Common &c) {
  const ExperimentConfig cfg = WorkConfig(c);
  const fs::path root(c.work);
  Need(root / "corpus" / "manifest.tsv");
  if (stage == "ubm") {
    const Corpus corpus = LoadCorpus((root / "corpus").string());
    UbmTrainLog log;
    const GmmUbm ubm = TrainSpeakerUbm(cfg, corpus, &log);
    fs::create_directories(SpeakerDir(c));
    ModelContainer m = ToContainer(ubm);
    m.metadata["seed"] = std::to_string(cfg.speaker.seed);
    m.Save((SpeakerDir(c) / "ubm.bin").string());
    std::string text;
    for (double v : log.log_likelihood) text += FormatDouble(v) + "\n";
    WriteFile(root / "logs" / "ubm.log", text);
    Say("UBM with " + std::to_string(ubm.num_components()) + " components written, hash " +
        m.Hash());
    return 0;
  }
  if (stage == "tv" || stage == "lda") {
    const auto ubm_c = ModelContainer::Load(Need(SpeakerDir(c) / "ubm.bin").string());
    const GmmUbm ubm = UbmFromContainer(ubm_c);
    if (stage == "lda")
      Require(cfg.speaker.use_lda, "the lda stage needs speaker.use_lda = true",
              Error::Kind::kUsage);
    const Corpus corpus = LoadCorpus((root / "corpus").string());
    for (int dim : cfg.pipeline.ivector_dims) {
      if (dim_flag > 0 && dim != dim_flag) continue;
      const std::string suffix = "_d" + std::to_string(dim) + ".bin";
      if (stage == "tv") {
        TvTrainLog log;
        ModelContainer m =
            ToContainer(TrainSpeakerTv(cfg, corpus, ubm, TvRankFor(cfg, dim), &log));
        m.metadata["ubm_hash"] = ubm_c.Hash();
        m.metadata["seed"] = std::to_string(cfg.speaker.seed);
        m.Save((SpeakerDir(c) / ("tv" + suffix)).string());
        std::string text;
        for (double v : log.objective) text += FormatDouble(v) + "\n";
        WriteFile(root / "logs" / ("tv_d" + std::to_string(dim) + ".log"), text);
        Say("TV model tv" + suffix + " written (UBM " + ubm_c.Hash() + ")");
      } else {
        const auto tv_c = ModelContainer::Load(Need(SpeakerDir(c) / ("tv" + suffix)).string());
        Require(tv_c.Meta("ubm_hash") == ubm_c.Hash(),
                "tv" + suffix + " was trained on a different UBM", Error::Kind::kDependency);
        ModelContainer m =
            ToContainer(TrainSpeakerLda(cfg, corpus, ubm, TvFromContainer(tv_c), dim));
        m.metadata["tv_hash"] = tv_c.Hash();
        m.Save((SpeakerDir(c) / ("lda" + suffix)).string());
        Say("LDA lda" + suffix + " written");
      }
    }
    return 0;
  }
  Require(stage == "net", "unknown stage '" + stage + "' (ubm, tv, lda or net)",
          Error::Kind::kUsage);
  Require(level >= 0, "--level must be non-negative", Error::Kind::kUsage);
  const IvectorMode mode = ParseMode(mode_name);
  const int dim = PickDim(cfg, dim_flag);
  const std::string tag = LevelTag(mode, level, dim);

  LevelArtifacts prev;
  std::optional<SpeakerSystem> system;
  std::optional<NetworkParameters> init;
  if (level > 0) {
    const std::string prev_tag = LevelTag(mode, level - 1, dim);
    prev.level = level - 1;
    prev.model = SeparationModelFromContainer(
        ModelContainer::Load(Need(ModelPath(c, level - 1, prev_tag)).string()));
    if (mode == IvectorMode::kRealistic)
      prev.estimates = EstimatesFromContainer(
          ModelContainer::Load(Need(EstimatePath(c, level - 1, prev_tag)).string()));
    system = LoadSpeakerSystem(c, cfg, dim);
    const fs::path oracle = ModelPath(c, level, LevelTag(IvectorMode::kOracle, level, dim));
    if (mode == IvectorMode::kRealistic && fs::exists(oracle)) {
      init = SeparationModelFromContainer(ModelContainer::Load(oracle.string())).network;
      Say("initializing from " + oracle.string());
    }
  }
  const Experiment exp(cfg, LoadCorpus((root / "corpus").string()), &std::cerr);
  LevelRequest req;
  req.level = level;
  req.mode = mode;
  req.prev = level > 0 ? &prev : nullptr;
  req.system = system ? &*system : nullptr;
  req.init = init ? &*init : nullptr;
  req.separate_all = true;
  const LevelArtifacts out = RunLevel(exp, req);

  ModelContainer m = ToContainer(out.model);
  m.metadata["trainer_seed"] = std::to_string(cfg.trainer.seed);
  m.Save(ModelPath(c, level, tag).string());
  fs::create_directories(EstimatePath(c, level, tag).parent_path());
  EstimatesToContainer(out.estimates).Save(EstimatePath(c, level, tag).string());
  if (level > 0) {
    const fs::path iv = root / "ivectors" / ("level" + std::to_string(level)) / (tag + ".bin");
    fs::create_directories(iv.parent_path());
    IvectorsToContainer(out.inputs).Save(iv.string());
  }
  WriteFile(root / "logs" / ("train_level" + std::to_string(level) + "_" + tag + ".log"),
            TrainLogText(out.training));
  Say(tag + " level " + std::to_string(level) + ": mean test SDR improvement " +
      FormatDouble(out.MeanImprovement()) + " dB");
  return 0;
}

void DumpMask(const fs::path &p, const MatrixXb &mask) {
  // Plain PGM, frequency on the vertical axis with low bins at the bottom.
  std::string s = "P2\n" + std::to_string(mask.rows()) + " " + std::to_string(mask.cols()) + "\n1\n";
  for (Index f = mask.cols() - 1; f >= 0; --f) {
    for (Index t = 0; t < mask.rows(); ++t) s += mask(t, f) ? (t ? " 1" : "1") : (t ? " 0" : "0");
    s += "\n";
  }
  WriteFile(p, s);
}

int CmdSeparate(const std::string &mixture_path, const std::string &out_dir, int level,
                const std::string &mode_name, int dim_flag, std::uint64_t seed, bool have_seed,
                const Common &c) {
  const ExperimentConfig cfg = WorkConfig(c);
  const IvectorMode mode = ParseMode(mode_name);
  const int dim = PickDim(cfg, dim_flag);
  const Waveform mix = ReadWav(Need(mixture_path).string());
  SeparationOptions opts;
  opts.num_sources = cfg.pipeline.num_sources;
  opts.bin_threshold_db = cfg.dsp.bin_threshold_db;
  opts.kmeans_restarts = cfg.pipeline.kmeans_restarts;
  opts.excluded = cfg.pipeline.excluded_bins;
  opts.seed = have_seed ? seed : MixtureSeed(cfg.pipeline.seed, fs::path(mixture_path).string());

  std::optional<SpeakerSystem> system;
  if (level > 0) system = LoadSpeakerSystem(c, cfg, dim);
  SeparationOutput out;
  MatrixXd ivectors;
  for (int l = 0; l <= level; ++l) {
    const std::string tag = LevelTag(mode, l, dim);
    const SeparationModel model = SeparationModelFromContainer(
        ModelContainer::Load(Need(ModelPath(c, l, tag)).string()));
    if (l > 0) {
      std::vector<VectorXd> ivs;
      for (const auto &e : out.estimates) ivs.push_back(Embed(*system, e));
      ivectors = OrderIvectors(out.estimates, ivs);
      Say("level " + std::to_string(l) + ": extracted " + std::to_string(ivs.size()) +
          " i-vectors from the level " + std::to_string(l - 1) + " estimates");
    }
    out = Separate(model, mix, ivectors, cfg.dsp, opts);
    Say("level " + std::to_string(l) + " pass with " + ModelPath(c, l, tag).string());
  }
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  for (std::size_t k = 0; k < out.estimates.size(); ++k) {
    WriteWav((dir / ("est_" + std::to_string(k) + ".wav")).string(), out.estimates[k]);
    DumpMask(dir / ("mask_" + std::to_string(k) + ".pgm"), out.masks.masks[k]);
  }
  Say("wrote " + std::to_string(out.estimates.size()) + " estimates to " + dir.string());
  return 0;
}

int CmdEvaluateDirs(const std::string &est_dir, const std::string &ref_dir,
                    const std::string &mixture_flag, const std::string &out_dir) {
  std::vector<Waveform> est, refs;
  for (int k = 0;; ++k) {
    const fs::path p = fs::path(est_dir) / ("est_" + std::to_string(k) + ".wav");
    if (!fs::exists(p)) break;
    est.push_back(ReadWav(p.string()));
  }
  Require(!est.empty(), "no est_0.wav in " + est_dir, Error::Kind::kDependency);
  for (std::size_t k = 0; k < est.size(); ++k) {
    const fs::path p = fs::path(ref_dir) / ("s" + std::to_string(k) + ".wav");
    Require(fs::exists(p), "missing reference file " + p.string(), Error::Kind::kDependency);
    refs.push_back(ReadWav(p.string()));
  }
  const fs::path mix_path = mixture_flag.empty() ? fs::path(ref_dir) / "mix.wav" : fs::path(mixture_flag);
  Require(fs::exists(mix_path), "missing mixture file " + mix_path.string(),
          Error::Kind::kDependency);
  const SdrReport rep = SdrImprovement(est, refs, ReadWav(mix_path.string()));
  std::string tsv = "reference\testimate\tsdr\tmixture_sdr\timprovement\n";
  nlohmann::json j;
  for (std::size_t r = 0; r < refs.size(); ++r) {
    char line[256];
    std::snprintf(line, sizeof(line), "s%zu\test_%d\t%.4f\t%.4f\t%.4f\n", r, rep.permutation[r],
                  rep.sdr[r], rep.mixture_sdr[r], rep.improvement[r]);
    tsv += line;
  }
  j["sdr"] = rep.sdr;
  j["mixture_sdr"] = rep.mixture_sdr;
  j["improvement"] = rep.improvement;
  j["permutation"] = rep.permutation;
  j["mean_improvement"] = rep.MeanImprovement();
  WriteFile(fs::path(out_dir) / "sdr.tsv", tsv);
  WriteFile(fs::path(out_dir) / "sdr.json", j.dump(2) + "\n");
  std::cout << tsv;
  return 0;
}

// Scores every stored estimate set of the experiment directory against the
// corpus test references.
int CmdEvaluateWork(const Common &c) {
  const ExperimentConfig cfg = WorkConfig(c);
  const fs::path root(c.work);
  const Corpus corpus = LoadCorpus(Need(root / "corpus").string());
  const Experiment exp(cfg, corpus);
  std::string fig2 = "ivec_dim\tbaseline_sdri\toracle_sdri\trealistic_sdri\toracle_gain\trealistic_gain\n";
  std::string fig3 = "ivec_dim\tmode\tlevel\tsdri\n";
  auto score = [&](int level, const std::string &tag) -> std::optional<double> {
    const fs::path p = EstimatePath(c, level, tag);
    if (!fs::exists(p)) return std::nullopt;
    LevelArtifacts a;
    a.test_reports = ScoreTest(exp, EstimatesFromContainer(ModelContainer::Load(p.string())));
    return a.MeanImprovement();
  };
  Need(EstimatePath(c, 0, "baseline"));
  const double b = *score(0, "baseline");
  auto fmt = [](std::optional<double> v) {
    char buf[32];
    if (!v) return std::string("nan");
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return std::string(buf);
  };
  for (int dim : cfg.pipeline.ivector_dims) {
    const auto o = score(1, LevelTag(IvectorMode::kOracle, 1, dim));
    const auto r = score(1, LevelTag(IvectorMode::kRealistic, 1, dim));
    fig2 += std::to_string(dim) + "\t" + fmt(b) + "\t" + fmt(o) + "\t" + fmt(r) + "\t" +
            fmt(o ? std::optional(*o - b) : std::nullopt) + "\t" +
            fmt(r ? std::optional(*r - b) : std::nullopt) + "\n";
    for (IvectorMode m : {IvectorMode::kOracle, IvectorMode::kRealistic}) {
      fig3 += std::to_string(dim) + "\t" + ModeName(m) + "\t0\t" + fmt(b) + "\n";
      for (int l = 1;; ++l) {
        const auto v = score(l, LevelTag(m, l, dim));
        if (!v) break;
        fig3 += std::to_string(dim) + "\t" + ModeName(m) + "\t" + std::to_string(l) + "\t" +
                fmt(v) + "\n";
      }
    }
  }
  WriteFile(root / "reports" / "fig2_sdr.tsv", fig2);
  WriteFile(root / "reports" / "fig3_levels.tsv", fig3);
  std::cout << fig2;
  return 0;
}

int CmdRun(const std::string &config, bool force, const Common &c) {
  const fs::path root(c.work);
  if (!config.empty()) {
    if (fs::exists(root / "config.cfg") && !force)
      throw Error(root.string() + " exists (use --force)", Error::Kind::kUsage);
    CmdCorpus(config, c.work, force, c);
  }
  const ExperimentConfig cfg = WorkConfig(c);
  const Experiment exp(cfg, LoadCorpus(Need(root / "corpus").string()), &std::cerr);
  const ExperimentResult result = RunExperiment(exp);
  WriteArtifacts(exp, result, c.work);
  WriteReports(result, (root / "reports").string());
  std::ifstream fig2(root / "reports" / "fig2_sdr.tsv");
  std::cout << fig2.rdbuf();
  return 0;
}

int ExitCode(const Error &e) {
  switch (e.kind()) {
    case Error::Kind::kUsage: return 2;
    case Error::Kind::kDependency: return 3;
    case Error::Kind::kNumeric: return 4;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"dcsep: deep-clustering separation with i-vector adapted networks"};
  app.require_subcommand(1);
  Common common;

  auto *corpus = app.add_subcommand("corpus", "generate the synthetic corpus");
  std::string config, out;
  bool force = false;
  corpus->add_option("--config", config, "experiment config file")->required();
  corpus->add_option("--out", out, "output directory")->required();
  corpus->add_flag("--force", force, "overwrite an existing corpus");
  corpus->add_option("--set", common.overrides, "override a config key (key=value)");
  corpus->add_option("--jobs", common.jobs, "worker threads (default: all cores)");

  auto *train = app.add_subcommand("train", "train one stage");
  std::string stage, mode = "realistic";
  int level = 0, dim = 0;
  train->add_option("--stage", stage, "ubm, tv, lda or net")->required();
  train->add_option("--level", level, "network level")->capture_default_str();
  train->add_option("--mode", mode, "oracle or realistic (level >= 1)")->capture_default_str();
  train->add_option("--dim", dim, "i-vector dimension (default: first configured)");
  AddCommon(train, &common);

  auto *separate = app.add_subcommand("separate", "separate one mixture");
  std::string mixture, est_out;
  std::uint64_t seed = 0;
  separate->add_option("--mixture", mixture, "mixture WAV")->required();
  separate->add_option("--out", est_out, "output directory")->required();
  separate->add_option("--level", level, "network level")->capture_default_str();
  separate->add_option("--mode", mode, "oracle or realistic")->capture_default_str();
  separate->add_option("--dim", dim, "i-vector dimension");
  auto *seed_opt = separate->add_option("--seed", seed, "K-means seed");
  AddCommon(separate, &common);

  auto *evaluate = app.add_subcommand("evaluate", "score estimates against references");
  std::string est_dir, ref_dir, eval_mix, eval_out = ".";
  auto *est_opt = evaluate->add_option("--estimates", est_dir, "directory with est_k.wav");
  evaluate->add_option("--references", ref_dir, "directory with s0.wav, s1.wav [, mix.wav]")
      ->needs(est_opt);
  evaluate->add_option("--mixture", eval_mix, "mixture WAV (default: references/mix.wav)");
  evaluate->add_option("--out", eval_out, "report directory")->capture_default_str();
  AddCommon(evaluate, &common);

  auto *preset = app.add_subcommand("config", "print a preset configuration");
  std::string preset_name = "desk";
  preset->add_option("--preset", preset_name, "desk or paper")->capture_default_str();

  auto *run = app.add_subcommand("run", "full experiment: corpus, speaker models, all levels");
  std::string run_config;
  run->add_option("--config", run_config, "config file (generates the corpus first)");
  run->add_flag("--force", force, "overwrite an existing experiment directory");
  AddCommon(run, &common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*preset) {
      Require(preset_name == "desk" || preset_name == "paper",
              "unknown preset '" + preset_name + "'", Error::Kind::kUsage);
      std::cout << (preset_name == "desk" ? DeskPreset() : PaperPreset()).ToText();
      return 0;
    }
    if (*corpus) return CmdCorpus(config, out, force, common);
    if (*train) return CmdTrain(stage, level, mode, dim, common);
    if (*separate)
      return CmdSeparate(mixture, est_out, level, mode, dim, seed, seed_opt->count() > 0, common);
    if (*evaluate) {
      if (!est_dir.empty()) {
        Require(!ref_dir.empty(), "--estimates needs --references", Error::Kind::kUsage);
        return CmdEvaluateDirs(est_dir, ref_dir, eval_mix, eval_out);
      }
      return CmdEvaluateWork(common);
    }
    if (*run) return CmdRun(run_config, force, common);
  } catch (const Error &e) {
    std::cerr << "dcsep: error: " << e.what() << std::endl;
    return ExitCode(e);
  } catch (const std::exception &e) {
    std::cerr << "dcsep: error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}

// src/config.cc

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

#include "dcsep/config.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dcsep/container.h"

namespace dcsep {

namespace {

std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename F>
auto Convert(const std::string &key, const std::string &value, F f) {
  try {
    std::size_t used = 0;
    auto v = f(value, &used);
    Require(used == value.size(), "");
    return v;
  } catch (const std::exception &) {
    throw Error("config: bad value '" + value + "' for " + key, Error::Kind::kUsage);
  }
}

}  // namespace

Config Config::Parse(const std::string &text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    Require(eq != std::string::npos,
            "config line " + std::to_string(lineno) + ": expected key = value", Error::Kind::kUsage);
    const std::string key = Trim(line.substr(0, eq));
    Require(!key.empty(), "config line " + std::to_string(lineno) + ": empty key",
            Error::Kind::kUsage);
    c.values_[key] = Trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::Load(const std::string &path) {
  std::ifstream is(path);
  Require(is.good(), "cannot open config " + path, Error::Kind::kUsage);
  std::stringstream ss;
  ss << is.rdbuf();
  return Parse(ss.str());
}

std::string Config::GetString(const std::string &key, const std::string &fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

int Config::GetInt(const std::string &key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return Convert(key, it->second, [](const std::string &s, std::size_t *u) { return std::stoi(s, u); });
}

double Config::GetDouble(const std::string &key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return Convert(key, it->second, [](const std::string &s, std::size_t *u) { return std::stod(s, u); });
}

bool Config::GetBool(const std::string &key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw Error("config: bad boolean '" + it->second + "' for " + key, Error::Kind::kUsage);
}

std::uint64_t Config::GetSeed(const std::string &key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  return Convert(key, it->second,
                 [](const std::string &s, std::size_t *u) { return std::stoull(s, u); });
}

std::vector<int> Config::GetIntList(const std::string &key, const std::vector<int> &fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<int> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    out.push_back(Convert(key, item, [](const std::string &s, std::size_t *u) { return std::stoi(s, u); }));
  }
  Require(!out.empty(), "config: empty list for " + key, Error::Kind::kUsage);
  return out;
}

void Config::CheckKeys(const std::vector<std::string> &known) const {
  for (const auto &[k, v] : values_)
    Require(std::find(known.begin(), known.end(), k) != known.end(),
            "config: unknown key '" + k + "'", Error::Kind::kUsage);
}

void CorpusSpec::Validate() const {
  Require(n_speakers >= 2, "corpus: need at least two speakers", Error::Kind::kUsage);
  Require(utterances_per_speaker > enroll_utterances + 1 && enroll_utterances >= 0,
          "corpus: too few utterances per speaker", Error::Kind::kUsage);
  Require(utterance_seconds > 0.1 && sample_rate > 0, "corpus: invalid utterance length",
          Error::Kind::kUsage);
  Require(snr_min_db <= snr_max_db, "corpus: invalid snr range", Error::Kind::kUsage);
  Require(test_fraction > 0.0 && test_fraction < 1.0, "corpus: invalid test fraction",
          Error::Kind::kUsage);
  Require(train_mixtures > 0 && validation_mixtures > 0 && test_mixtures > 0,
          "corpus: mixture counts must be positive", Error::Kind::kUsage);
  Require(dev_speakers >= 0 && dev_utterances >= 1, "corpus: invalid development set",
          Error::Kind::kUsage);
}

std::vector<std::string> KnownConfigKeys() {
  return {"corpus.n_speakers", "corpus.utterances_per_speaker", "corpus.utterance_seconds",
          "corpus.snr_min_db", "corpus.snr_max_db", "corpus.enroll_utterances",
          "corpus.test_fraction", "corpus.train_mixtures", "corpus.validation_mixtures",
          "corpus.test_mixtures", "corpus.dev_speakers", "corpus.dev_utterances",
          "corpus.sample_rate", "corpus.seed",
          "dsp.window_len", "dsp.hop", "dsp.bin_threshold_db", "dsp.vad_threshold_db",
          "dsp.mfcc_coeffs", "dsp.mel_filters", "dsp.mfcc_frame_len", "dsp.mfcc_hop",
          "dsp.mfcc_fft_len",
          "net.cell", "net.hidden", "net.layers", "net.embedding_dim",
          "trainer.initial_lr", "trainer.beta1", "trainer.beta2", "trainer.epsilon",
          "trainer.batch_size", "trainer.validation_interval_batches", "trainer.patience",
          "trainer.input_noise_std", "trainer.curriculum_segment_frames", "trainer.restarts",
          "trainer.max_epochs", "trainer.seed",
          "speaker.ubm_components", "speaker.ubm_iters", "speaker.tv_rank", "speaker.tv_iters",
          "speaker.use_lda", "speaker.lda_dim", "speaker.seed",
          "pipeline.levels", "pipeline.run_oracle", "pipeline.run_realistic",
          "pipeline.ivector_dims", "pipeline.kmeans_restarts", "pipeline.excluded_bins",
          "pipeline.num_sources", "pipeline.seed", "pipeline.jobs"};
}

ExperimentConfig ExperimentConfig::FromConfig(const Config &c) {
  c.CheckKeys(KnownConfigKeys());
  ExperimentConfig e = DeskPreset();
  CorpusSpec &k = e.corpus;
  k.n_speakers = c.GetInt("corpus.n_speakers", k.n_speakers);
  k.utterances_per_speaker = c.GetInt("corpus.utterances_per_speaker", k.utterances_per_speaker);
  k.utterance_seconds = c.GetDouble("corpus.utterance_seconds", k.utterance_seconds);
  k.snr_min_db = c.GetDouble("corpus.snr_min_db", k.snr_min_db);
  k.snr_max_db = c.GetDouble("corpus.snr_max_db", k.snr_max_db);
  k.enroll_utterances = c.GetInt("corpus.enroll_utterances", k.enroll_utterances);
  k.test_fraction = c.GetDouble("corpus.test_fraction", k.test_fraction);
  k.train_mixtures = c.GetInt("corpus.train_mixtures", k.train_mixtures);
  k.validation_mixtures = c.GetInt("corpus.validation_mixtures", k.validation_mixtures);
  k.test_mixtures = c.GetInt("corpus.test_mixtures", k.test_mixtures);
  k.dev_speakers = c.GetInt("corpus.dev_speakers", k.dev_speakers);
  k.dev_utterances = c.GetInt("corpus.dev_utterances", k.dev_utterances);
  k.sample_rate = c.GetInt("corpus.sample_rate", k.sample_rate);
  k.seed = c.GetSeed("corpus.seed", k.seed);

  DspConfig &d = e.dsp;
  d.window_len = c.GetInt("dsp.window_len", d.window_len);
  d.hop = c.GetInt("dsp.hop", d.hop);
  d.bin_threshold_db = c.GetDouble("dsp.bin_threshold_db", d.bin_threshold_db);
  d.vad_threshold_db = c.GetDouble("dsp.vad_threshold_db", d.vad_threshold_db);
  d.mfcc.num_coeffs = c.GetInt("dsp.mfcc_coeffs", d.mfcc.num_coeffs);
  d.mfcc.num_filters = c.GetInt("dsp.mel_filters", d.mfcc.num_filters);
  d.mfcc.frame_len = c.GetInt("dsp.mfcc_frame_len", d.mfcc.frame_len);
  d.mfcc.hop = c.GetInt("dsp.mfcc_hop", d.mfcc.hop);
  d.mfcc.fft_len = c.GetInt("dsp.mfcc_fft_len", d.mfcc.fft_len);

  NetworkConfig &n = e.net;
  n.cell = ParseCellType(c.GetString("net.cell", CellTypeName(n.cell)));
  n.hidden = c.GetInt("net.hidden", n.hidden);
  n.layers = c.GetInt("net.layers", n.layers);
  n.embedding_dim = c.GetInt("net.embedding_dim", n.embedding_dim);
  n.freq_bins = d.window_len / 2;

  TrainerConfig &t = e.trainer;
  t.initial_lr = c.GetDouble("trainer.initial_lr", t.initial_lr);
  t.beta1 = c.GetDouble("trainer.beta1", t.beta1);
  t.beta2 = c.GetDouble("trainer.beta2", t.beta2);
  t.epsilon = c.GetDouble("trainer.epsilon", t.epsilon);
  t.batch_size = c.GetInt("trainer.batch_size", t.batch_size);
  t.validation_interval_batches =
      c.GetInt("trainer.validation_interval_batches", t.validation_interval_batches);
  t.patience = c.GetInt("trainer.patience", t.patience);
  t.input_noise_std = c.GetDouble("trainer.input_noise_std", t.input_noise_std);
  t.curriculum_segment_frames =
      c.GetInt("trainer.curriculum_segment_frames", t.curriculum_segment_frames);
  t.restarts = c.GetInt("trainer.restarts", t.restarts);
  t.max_epochs = c.GetInt("trainer.max_epochs", t.max_epochs);
  t.seed = c.GetSeed("trainer.seed", t.seed);

  SpeakerConfig &s = e.speaker;
  s.ubm_components = c.GetInt("speaker.ubm_components", s.ubm_components);
  s.ubm_iters = c.GetInt("speaker.ubm_iters", s.ubm_iters);
  s.tv_rank = c.GetInt("speaker.tv_rank", s.tv_rank);
  s.tv_iters = c.GetInt("speaker.tv_iters", s.tv_iters);
  s.use_lda = c.GetBool("speaker.use_lda", s.use_lda);
  s.lda_dim = c.GetInt("speaker.lda_dim", s.lda_dim);
  s.seed = c.GetSeed("speaker.seed", s.seed);

  PipelineConfig &p = e.pipeline;
  p.levels = c.GetInt("pipeline.levels", p.levels);
  p.run_oracle = c.GetBool("pipeline.run_oracle", p.run_oracle);
  p.run_realistic = c.GetBool("pipeline.run_realistic", p.run_realistic);
  p.ivector_dims = c.GetIntList("pipeline.ivector_dims", p.ivector_dims);
  p.kmeans_restarts = c.GetInt("pipeline.kmeans_restarts", p.kmeans_restarts);
  const std::string policy = c.GetString("pipeline.excluded_bins", "zero");
  Require(policy == "zero" || policy == "nearest",
          "config: pipeline.excluded_bins must be zero or nearest", Error::Kind::kUsage);
  p.excluded_bins = policy == "zero" ? ExcludedBins::kZero : ExcludedBins::kNearestCentroid;
  p.num_sources = c.GetInt("pipeline.num_sources", p.num_sources);
  p.seed = c.GetSeed("pipeline.seed", p.seed);
  p.jobs = c.GetInt("pipeline.jobs", p.jobs);
  t.jobs = p.jobs;
  e.Validate();
  return e;
}

void ExperimentConfig::Validate() const {
  corpus.Validate();
  trainer.Validate();
  Require(dsp.window_len > 0 && dsp.hop > 0 && dsp.hop <= dsp.window_len &&
              dsp.window_len % 2 == 0,
          "config: invalid STFT framing", Error::Kind::kUsage);
  Require(dsp.bin_threshold_db < 0 && dsp.vad_threshold_db < 0,
          "config: thresholds must be negative dB", Error::Kind::kUsage);
  Require(net.hidden > 0 && net.layers > 0 && net.embedding_dim > 0,
          "config: invalid network size", Error::Kind::kUsage);
  Require(speaker.ubm_components >= 1 && speaker.tv_rank >= 1 && speaker.lda_dim >= 1,
          "config: invalid speaker model size", Error::Kind::kUsage);
  Require(pipeline.levels >= 0 && pipeline.kmeans_restarts >= 1 && pipeline.num_sources == 2 &&
              pipeline.jobs >= 1,
          "config: invalid pipeline settings (only two-source mixtures are generated)",
          Error::Kind::kUsage);
  for (int d : pipeline.ivector_dims) Require(d >= 1, "config: ivector dims must be positive",
                                              Error::Kind::kUsage);
}

std::string ExperimentConfig::ToText() const {
  std::ostringstream os;
  auto put = [&](const std::string &k, const auto &v) { os << k << " = " << v << "\n"; };
  auto num = [](double v) { return FormatDouble(v); };
  put("corpus.n_speakers", corpus.n_speakers);
  put("corpus.utterances_per_speaker", corpus.utterances_per_speaker);
  put("corpus.utterance_seconds", num(corpus.utterance_seconds));
  put("corpus.snr_min_db", num(corpus.snr_min_db));
  put("corpus.snr_max_db", num(corpus.snr_max_db));
  put("corpus.enroll_utterances", corpus.enroll_utterances);
  put("corpus.test_fraction", num(corpus.test_fraction));
  put("corpus.train_mixtures", corpus.train_mixtures);
  put("corpus.validation_mixtures", corpus.validation_mixtures);
  put("corpus.test_mixtures", corpus.test_mixtures);
  put("corpus.dev_speakers", corpus.dev_speakers);
  put("corpus.dev_utterances", corpus.dev_utterances);
  put("corpus.sample_rate", corpus.sample_rate);
  put("corpus.seed", corpus.seed);
  put("dsp.window_len", dsp.window_len);
  put("dsp.hop", dsp.hop);
  put("dsp.bin_threshold_db", num(dsp.bin_threshold_db));
  put("dsp.vad_threshold_db", num(dsp.vad_threshold_db));
  put("dsp.mfcc_coeffs", dsp.mfcc.num_coeffs);
  put("dsp.mel_filters", dsp.mfcc.num_filters);
  put("dsp.mfcc_frame_len", dsp.mfcc.frame_len);
  put("dsp.mfcc_hop", dsp.mfcc.hop);
  put("dsp.mfcc_fft_len", dsp.mfcc.fft_len);
  put("net.cell", CellTypeName(net.cell));
  put("net.hidden", net.hidden);
  put("net.layers", net.layers);
  put("net.embedding_dim", net.embedding_dim);
  put("trainer.initial_lr", num(trainer.initial_lr));
  put("trainer.beta1", num(trainer.beta1));
  put("trainer.beta2", num(trainer.beta2));
  put("trainer.epsilon", num(trainer.epsilon));
  put("trainer.batch_size", trainer.batch_size);
  put("trainer.validation_interval_batches", trainer.validation_interval_batches);
  put("trainer.patience", trainer.patience);
  put("trainer.input_noise_std", num(trainer.input_noise_std));
  put("trainer.curriculum_segment_frames", trainer.curriculum_segment_frames);
  put("trainer.restarts", trainer.restarts);
  put("trainer.max_epochs", trainer.max_epochs);
  put("trainer.seed", trainer.seed);
  put("speaker.ubm_components", speaker.ubm_components);
  put("speaker.ubm_iters", speaker.ubm_iters);
  put("speaker.tv_rank", speaker.tv_rank);
  put("speaker.tv_iters", speaker.tv_iters);
  put("speaker.use_lda", speaker.use_lda ? "true" : "false");
  put("speaker.lda_dim", speaker.lda_dim);
  put("speaker.seed", speaker.seed);
  put("pipeline.levels", pipeline.levels);
  put("pipeline.run_oracle", pipeline.run_oracle ? "true" : "false");
  put("pipeline.run_realistic", pipeline.run_realistic ? "true" : "false");
  std::string dims;
  for (std::size_t i = 0; i < pipeline.ivector_dims.size(); ++i)
    dims += (i ? "," : "") + std::to_string(pipeline.ivector_dims[i]);
  put("pipeline.ivector_dims", dims);
  put("pipeline.kmeans_restarts", pipeline.kmeans_restarts);
  put("pipeline.excluded_bins",
      pipeline.excluded_bins == ExcludedBins::kZero ? "zero" : "nearest");
  put("pipeline.num_sources", pipeline.num_sources);
  put("pipeline.seed", pipeline.seed);
  put("pipeline.jobs", pipeline.jobs);
  return os.str();
}

ExperimentConfig DeskPreset() {
  ExperimentConfig e;
  e.net.freq_bins = e.dsp.window_len / 2;
  e.net.embedding_dim = 20;
  e.net.hidden = 32;
  e.net.layers = 2;
  e.net.cell = CellType::kGru;
  e.trainer.batch_size = 8;
  e.trainer.restarts = 1;
  e.trainer.max_epochs = 8;
  return e;
}

ExperimentConfig PaperPreset() {
  ExperimentConfig e = DeskPreset();
  e.net.hidden = 600;
  e.net.cell = CellType::kLstm;
  e.trainer = TrainerConfig{};
  e.trainer.max_epochs = 200;
  e.speaker.ubm_components = 256;
  e.speaker.tv_rank = 400;
  e.speaker.tv_iters = 10;
  e.pipeline.ivector_dims = {5, 10, 20, 40};
  e.corpus.train_mixtures = 20000;
  e.corpus.validation_mixtures = 1500;
  e.corpus.test_mixtures = 3000;
  return e;
}

}  // namespace dcsep

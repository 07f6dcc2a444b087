// dcsep/config.h

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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcsep/clustering.h"
#include "dcsep/common.h"
#include "dcsep/dsp.h"
#include "dcsep/network.h"
#include "dcsep/trainer.h"

namespace dcsep {

/// Flat "key = value" settings; '#' starts a comment.  Later assignments
/// override earlier ones.
class Config {
 public:
  static Config Parse(const std::string &text);
  static Config Load(const std::string &path);

  void Set(const std::string &key, const std::string &value) { values_[key] = value; }
  bool Has(const std::string &key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string> &values() const { return values_; }

  std::string GetString(const std::string &key, const std::string &fallback) const;
  int GetInt(const std::string &key, int fallback) const;
  double GetDouble(const std::string &key, double fallback) const;
  bool GetBool(const std::string &key, bool fallback) const;
  std::uint64_t GetSeed(const std::string &key, std::uint64_t fallback) const;
  std::vector<int> GetIntList(const std::string &key, const std::vector<int> &fallback) const;

  /// Every key must belong to a known key set.
  void CheckKeys(const std::vector<std::string> &known) const;

 private:
  std::map<std::string, std::string> values_;
};

struct CorpusSpec {
  int n_speakers = 4;
  int utterances_per_speaker = 100;
  double utterance_seconds = 3.0;
  double snr_min_db = 0.0;
  double snr_max_db = 10.0;
  int enroll_utterances = 5;  // per speaker, kept out of every mixture
  double test_fraction = 0.25;
  int train_mixtures = 80;
  int validation_mixtures = 16;
  int test_mixtures = 20;
  int dev_speakers = 8;     // extra speakers used only for the speaker models
  int dev_utterances = 20;  // per development speaker
  int sample_rate = 8000;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct DspConfig {
  int window_len = 512;
  int hop = 128;
  double bin_threshold_db = -40.0;
  double vad_threshold_db = -40.0;
  MfccOptions mfcc;
};

struct SpeakerConfig {
  int ubm_components = 16;
  int ubm_iters = 10;
  int tv_rank = 10;
  int tv_iters = 10;
  bool use_lda = false;
  int lda_dim = 5;
  std::uint64_t seed = 3;
};

enum class IvectorMode { kOracle, kRealistic };

struct PipelineConfig {
  int levels = 1;
  bool run_oracle = true;
  bool run_realistic = true;
  std::vector<int> ivector_dims = {10};
  int kmeans_restarts = 10;
  ExcludedBins excluded_bins = ExcludedBins::kZero;
  int num_sources = 2;
  std::uint64_t seed = 5;
  int jobs = 1;
};

struct ExperimentConfig {
  CorpusSpec corpus;
  DspConfig dsp;
  NetworkConfig net;
  TrainerConfig trainer;
  SpeakerConfig speaker;
  PipelineConfig pipeline;

  static ExperimentConfig FromConfig(const Config &c);
  /// Canonical text form; parsing it back gives the same configuration.
  std::string ToText() const;
  void Validate() const;
};

/// Desk-scale preset (default values above) and paper-scale preset.
ExperimentConfig DeskPreset();
ExperimentConfig PaperPreset();

std::vector<std::string> KnownConfigKeys();

}  // namespace dcsep

// dcsep/pipeline.h

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

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dcsep/clustering.h"
#include "dcsep/config.h"
#include "dcsep/container.h"
#include "dcsep/corpus.h"
#include "dcsep/evaluation.h"
#include "dcsep/gmm.h"
#include "dcsep/ivector.h"
#include "dcsep/trainer.h"

namespace dcsep {

// ---------------------------------------------------------------------------
// Speaker representation chain.

struct SpeakerSystem {
  GmmUbm ubm;
  TotalVariabilityModel tv;
  std::optional<LdaProjection> lda;
  MfccOptions mfcc;
  double vad_threshold_db = -40.0;

  Index dim() const { return lda ? lda->output_dim() : tv.rank(); }
};

/// MFCCs of the voiced frames.
FeatureMatrix SpeakerFeatures(const Waveform &w, const MfccOptions &mfcc, double vad_db);

/// i-vector, projected by the LDA when the system has one.  A waveform with
/// no voiced frame maps to the zero vector.
VectorXd Embed(const SpeakerSystem &system, const Waveform &w);

/// Development utterances (development speakers plus the training pool of
/// the corpus speakers) with their speaker labels.
std::vector<const Utterance *> DevelopmentSet(const Corpus &corpus);

/// TV rank used for a given i-vector input width.
int TvRankFor(const ExperimentConfig &cfg, int ivec_dim);

GmmUbm TrainSpeakerUbm(const ExperimentConfig &cfg, const Corpus &corpus, UbmTrainLog *log);
TotalVariabilityModel TrainSpeakerTv(const ExperimentConfig &cfg, const Corpus &corpus,
                                     const GmmUbm &ubm, int rank, TvTrainLog *log);
LdaProjection TrainSpeakerLda(const ExperimentConfig &cfg, const Corpus &corpus,
                              const GmmUbm &ubm, const TotalVariabilityModel &tv, int lda_dim);

/// Speaker models averaged over the enrollment utterances.
std::vector<SpeakerModel> EnrollSpeakers(const SpeakerSystem &system, const Corpus &corpus);

// ---------------------------------------------------------------------------
// Separation.

struct SeparationOptions {
  int num_sources = 2;
  double bin_threshold_db = -40.0;
  int kmeans_restarts = 10;
  ExcludedBins excluded = ExcludedBins::kZero;
  std::uint64_t seed = 0;
};

struct SeparationOutput {
  std::vector<Waveform> estimates;
  BinaryMaskSet masks;
  BinMask bins;
  ClusterAssignment assignment;
};

/// STFT, normalized log-magnitude, network, K-means on the retained bins,
/// binary masks, masked inverse STFT.  `ivectors` (C x dim, canonical slot
/// order, not normalized) must be empty for a level-0 model.
SeparationOutput Separate(const SeparationModel &model, const Waveform &mixture,
                          const MatrixXd &ivectors, const DspConfig &dsp,
                          const SeparationOptions &opts);

/// Stacks the i-vectors of C signals in descending signal energy; equal
/// energies are ordered by the FNV-1a hash of the samples.
MatrixXd OrderIvectors(const std::vector<Waveform> &signals, const std::vector<VectorXd> &ivectors);

/// Per-mixture K-means seed, stable across runs and splits.
std::uint64_t MixtureSeed(std::uint64_t seed, const std::string &mixture_id);

// ---------------------------------------------------------------------------
// Levels.

enum class Split { kTrain = 0, kValidation = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kSplits = {Split::kTrain, Split::kValidation, Split::kTest};
std::string SplitName(Split s);  // tr, cv, tt

template <typename T>
struct PerSplit {
  std::array<T, 3> data;
  T &operator[](Split s) { return data[static_cast<int>(s)]; }
  const T &operator[](Split s) const { return data[static_cast<int>(s)]; }
};

using EstimateSet = PerSplit<std::vector<std::vector<Waveform>>>;  // [split][mixture][source]
using IvectorSet = PerSplit<std::vector<MatrixXd>>;                // [split][mixture] C x dim

std::string ModeName(IvectorMode m);
IvectorMode ParseMode(const std::string &s);

/// Corpus plus the per-mixture quantities every level shares.
class Experiment {
 public:
  Experiment(ExperimentConfig config, Corpus corpus, std::ostream *log = nullptr);

  const ExperimentConfig &config() const { return config_; }
  const Corpus &corpus() const { return corpus_; }
  const std::vector<MixtureRecord> &mixtures(Split s) const;
  const NormalizationStats &feature_stats() const { return feature_stats_; }
  SeparationOptions separation_options() const;
  std::ostream *log() const { return log_; }

  /// Normalized features and dominance target of one mixture.
  TrainingExample Example(Split s, std::size_t i) const;

 private:
  ExperimentConfig config_;
  Corpus corpus_;
  std::ostream *log_;
  NormalizationStats feature_stats_;
  PerSplit<std::vector<TrainingExample>> examples_;
};

struct LevelArtifacts {
  int level = 0;
  IvectorMode mode = IvectorMode::kOracle;
  SeparationModel model;
  TrainResult training;
  IvectorSet inputs;       // empty at level 0
  EstimateSet estimates;   // splits not separated stay empty
  std::vector<SdrReport> test_reports;

  double MeanImprovement() const;
};

/// i-vectors of clean scaled sources, canonical order.
IvectorSet OracleIvectors(const Experiment &exp, const SpeakerSystem &system);

/// i-vectors of separated estimates, canonical order.  Splits without
/// estimates are left empty.
IvectorSet EstimateIvectors(const Experiment &exp, const SpeakerSystem &system,
                            const EstimateSet &estimates);

struct LevelRequest {
  int level = 0;
  IvectorMode mode = IvectorMode::kOracle;
  const LevelArtifacts *prev = nullptr;  // level l-1, required for l >= 1
  const SpeakerSystem *system = nullptr;  // required for l >= 1
  /// Network to start from instead of widening prev's (the oracle network
  /// of the same level when running in realistic mode).
  const NetworkParameters *init = nullptr;
  /// When set, used as input i-vectors instead of deriving them.
  const IvectorSet *inputs = nullptr;
  bool separate_all = true;  // otherwise only the test split is separated
};

/// Trains the level network, separates the mixtures and scores the test
/// split.  Level 0 takes no i-vectors; level l >= 1 takes i-vectors of the
/// clean sources (oracle) or of prev's estimates (realistic).
LevelArtifacts RunLevel(const Experiment &exp, const LevelRequest &req);

EstimateSet SeparateSplits(const Experiment &exp, const SeparationModel &model,
                           const IvectorSet *inputs, bool all_splits);

std::vector<SdrReport> ScoreTest(const Experiment &exp, const EstimateSet &estimates);

// ---------------------------------------------------------------------------
// Whole experiment.

struct DimensionResult {
  int ivec_dim = 0;
  SpeakerSystem system;
  std::vector<LevelArtifacts> oracle;     // index l-1 holds level l
  std::vector<LevelArtifacts> realistic;  // index l-1 holds level l
  IdReport clean_id;       // clean test-pool utterances
  IdReport baseline_id;    // level-0 estimates
  std::optional<IdReport> oracle_id;     // oracle level-1 estimates
  std::optional<IdReport> realistic_id;  // realistic level-1 estimates
  std::optional<RepresentationTable> representation;
  UbmTrainLog ubm_log;
  TvTrainLog tv_log;
};

struct ExperimentResult {
  LevelArtifacts level0;
  std::vector<DimensionResult> dims;
};

/// Identification of the estimates matched to each test reference
/// (mixture-major order); also the per-reference outcomes.
IdReport EstimateIdentification(const Experiment &exp, const SpeakerSystem &system,
                                const std::vector<SpeakerModel> &models,
                                const LevelArtifacts &level);

ExperimentResult RunExperiment(const Experiment &exp);

/// fig2_sdr.tsv, fig3_levels.tsv, table1_speaker_id.tsv,
/// table2_representation.tsv, summary.json and per-network training logs.
void WriteReports(const ExperimentResult &result, const std::string &dir);

/// Persists models, test estimates and input i-vectors under
/// models/level{l}/, estimates/level{l}/ and ivectors/level{l}/.
void WriteArtifacts(const Experiment &exp, const ExperimentResult &result,
                    const std::string &dir);

// ---------------------------------------------------------------------------
// On-disk helpers shared with the command-line driver.

ModelContainer EstimatesToContainer(const EstimateSet &estimates);
EstimateSet EstimatesFromContainer(const ModelContainer &c);
ModelContainer IvectorsToContainer(const IvectorSet &ivectors);
IvectorSet IvectorsFromContainer(const ModelContainer &c);

std::string LevelTag(IvectorMode mode, int level, int ivec_dim);  // e.g. "oracle_d10"

}  // namespace dcsep

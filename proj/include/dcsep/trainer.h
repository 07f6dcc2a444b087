// dcsep/trainer.h

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
#include <string>
#include <vector>

#include "dcsep/affinity.h"
#include "dcsep/network.h"

namespace dcsep {

struct TrainerConfig {
  double initial_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 128;
  int validation_interval_batches = 10;
  int patience = 3;  // consecutive validation increases before stopping
  double input_noise_std = 0.6;
  int curriculum_segment_frames = 100;  // 0 disables the segment stage
  int restarts = 6;
  int max_epochs = 50;  // per stage
  int jobs = 1;
  std::uint64_t seed = 1;

  void Validate() const;
};

/// One utterance: normalized features, its (normalized) i-vector block,
/// and the dominance target.
struct TrainingExample {
  MatrixXd features;  // T x F
  MatrixXd ivectors;  // C x ivec_dim, or empty
  AffinityTarget target;

  RowMatrixXd Input() const { return AssembleInput(features, ivectors); }
};

/// Non-overlapping fixed-length segments; a shorter tail is dropped unless
/// the utterance itself is shorter than one segment.
std::vector<TrainingExample> Segment(const std::vector<TrainingExample> &set, int frames);

/// Affinity loss divided by the squared retained-bin count.
double NormalizedLoss(const NetworkParameters &params, const TrainingExample &ex);
double MeanNormalizedLoss(const NetworkParameters &params,
                          const std::vector<TrainingExample> &set);

struct TrainLogEntry {
  int run = 0;
  std::string stage;  // "segments" or "full"
  int step = 0;       // batches seen in this stage
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double best_validation_loss = 0.0;
  std::string event;  // init, accept, restore, stop, diverged, done

  std::string Format() const;
};

struct TrainResult {
  NetworkParameters params;
  double validation_loss = 0.0;
  int best_run = 0;
  std::vector<TrainLogEntry> log;
};

/// Adam with the validation-driven schedule: every
/// `validation_interval_batches` batches the validation loss is measured; an
/// increase restores the previous validated model and halves the learning
/// rate, `patience` consecutive increases stop the stage.  With a segment
/// stage configured, the full-utterance stage starts from its result.  Of
/// `restarts` independent runs the one with the lowest validation loss is
/// returned.  `init`, when given, replaces random initialisation.
TrainResult Train(const TrainerConfig &config, const NetworkConfig &net,
                  const std::vector<TrainingExample> &train_set,
                  const std::vector<TrainingExample> &validation_set,
                  const NetworkParameters *init = nullptr);

}  // namespace dcsep

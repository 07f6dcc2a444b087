// src/trainer.cc

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

#include "dcsep/trainer.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <thread>

namespace dcsep {

namespace {

struct AdamState {
  VectorXd m, v;
  long step = 0;
};

struct Checkpoint {
  VectorXd theta;
  AdamState adam;
};

struct StageOutcome {
  bool diverged = false;
  double best_validation = 0.0;
};

StageOutcome RunStage(const TrainerConfig &cfg, int run, const std::string &stage,
                      const std::vector<TrainingExample> &train,
                      const std::vector<TrainingExample> &val, NetworkParameters *params,
                      std::mt19937_64 *rng, std::vector<TrainLogEntry> *log) {
  const Index P = params->theta.size();
  AdamState adam{VectorXd::Zero(P), VectorXd::Zero(P), 0};
  double lr = cfg.initial_lr;
  double last_val = MeanNormalizedLoss(*params, val);
  Checkpoint ckpt{params->theta, adam};
  int consecutive = 0, step = 0;
  double train_acc = 0.0;
  int train_count = 0;
  log->push_back({run, stage, 0, lr, std::nan(""), last_val, last_val, "init"});

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::normal_distribution<double> noise(0.0, cfg.input_noise_std);
  VectorXd grad(P);
  bool stop = false;
  for (int epoch = 0; epoch < cfg.max_epochs && !stop; ++epoch) {
    std::shuffle(order.begin(), order.end(), *rng);
    for (std::size_t start = 0; start < order.size() && !stop; start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      grad.setZero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < end; ++b) {
        const TrainingExample &ex = train[order[b]];
        RowMatrixXd x = ex.Input();
        if (cfg.input_noise_std > 0.0)
          for (Index i = 0; i < x.size(); ++i) x.data()[i] += noise(*rng);
        const double r = static_cast<double>(ex.target.retained.count());
        if (r == 0.0) continue;
        batch_loss += LossAndGradient(*params, x, ex.target, inv_batch / (r * r), &grad);
      }
      if (!std::isfinite(batch_loss) || !grad.allFinite()) {
        log->push_back({run, stage, step, lr, batch_loss, std::nan(""), last_val, "diverged"});
        return {true, last_val};
      }
      ++adam.step;
      adam.m = cfg.beta1 * adam.m + (1.0 - cfg.beta1) * grad;
      adam.v = cfg.beta2 * adam.v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.step));
      params->theta.array() -=
          lr * (adam.m.array() / c1) / ((adam.v.array() / c2).sqrt() + cfg.epsilon);
      ++step;
      train_acc += batch_loss;
      ++train_count;

      if (step % cfg.validation_interval_batches != 0) continue;
      const double val_loss = MeanNormalizedLoss(*params, val);
      const double train_mean = train_acc / train_count;
      train_acc = 0.0;
      train_count = 0;
      if (!std::isfinite(val_loss)) {
        log->push_back({run, stage, step, lr, train_mean, val_loss, last_val, "diverged"});
        return {true, last_val};
      }
      if (val_loss > last_val) {
        params->theta = ckpt.theta;
        adam = ckpt.adam;
        lr *= 0.5;
        ++consecutive;
        stop = consecutive >= cfg.patience;
        log->push_back({run, stage, step, lr, train_mean, val_loss, last_val,
                        stop ? "stop" : "restore"});
      } else {
        last_val = val_loss;
        ckpt = {params->theta, adam};
        consecutive = 0;
        log->push_back({run, stage, step, lr, train_mean, val_loss, last_val, "accept"});
      }
    }
  }
  params->theta = ckpt.theta;
  if (!stop) log->push_back({run, stage, step, lr, std::nan(""), last_val, last_val, "done"});
  return {false, last_val};
}

struct RunResult {
  NetworkParameters params;
  double validation = 0.0;
  bool diverged = false;
  std::vector<TrainLogEntry> log;
};

RunResult TrainOneRun(const TrainerConfig &cfg, const NetworkConfig &net, int run,
                      const std::vector<TrainingExample> &train,
                      const std::vector<TrainingExample> &val, const NetworkParameters *init) {
  const std::uint64_t seed = DeriveSeed(cfg.seed, static_cast<std::uint64_t>(run));
  RunResult r;
  r.params = init != nullptr ? *init : InitNetwork(net, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  if (cfg.curriculum_segment_frames > 0) {
    const auto seg_train = Segment(train, cfg.curriculum_segment_frames);
    const auto seg_val = Segment(val, cfg.curriculum_segment_frames);
    const auto out = RunStage(cfg, run, "segments", seg_train, seg_val, &r.params, &rng, &r.log);
    if (out.diverged) {
      r.diverged = true;
      return r;
    }
  }
  const auto out = RunStage(cfg, run, "full", train, val, &r.params, &rng, &r.log);
  r.diverged = out.diverged;
  r.validation = out.best_validation;
  return r;
}

}  // namespace

void TrainerConfig::Validate() const {
  Require(initial_lr > 0 && beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && epsilon > 0,
          "trainer: invalid optimizer settings", Error::Kind::kUsage);
  Require(batch_size > 0 && validation_interval_batches > 0 && patience >= 1 && restarts >= 1 &&
              max_epochs >= 1 && input_noise_std >= 0 && curriculum_segment_frames >= 0 &&
              jobs >= 1,
          "trainer: invalid schedule settings", Error::Kind::kUsage);
}

std::vector<TrainingExample> Segment(const std::vector<TrainingExample> &set, int frames) {
  std::vector<TrainingExample> out;
  for (const auto &ex : set) {
    const Index T = ex.features.rows(), F = ex.features.cols();
    if (T <= frames) {
      out.push_back(ex);
      continue;
    }
    for (Index start = 0; start + frames <= T; start += frames) {
      TrainingExample s;
      s.features = ex.features.middleRows(start, frames);
      s.ivectors = ex.ivectors;
      s.target.Y = ex.target.Y.middleRows(start * F, frames * F);
      s.target.retained = ex.target.retained.segment(start * F, frames * F);
      out.push_back(std::move(s));
    }
  }
  return out;
}

double NormalizedLoss(const NetworkParameters &params, const TrainingExample &ex) {
  const double r = static_cast<double>(ex.target.retained.count());
  if (r == 0.0) return 0.0;
  return AffinityLoss(Forward(params, ex.Input()), ex.target) / (r * r);
}

double MeanNormalizedLoss(const NetworkParameters &params,
                          const std::vector<TrainingExample> &set) {
  Require(!set.empty(), "empty evaluation set");
  double acc = 0.0;
  for (const auto &ex : set) acc += NormalizedLoss(params, ex);
  return acc / static_cast<double>(set.size());
}

std::string TrainLogEntry::Format() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "run=%d stage=%s step=%d lr=%.6g train_loss=%.8g val_loss=%.8g best_val=%.8g "
                "event=%s",
                run, stage.c_str(), step, learning_rate, train_loss, validation_loss,
                best_validation_loss, event.c_str());
  return buf;
}

TrainResult Train(const TrainerConfig &config, const NetworkConfig &net,
                  const std::vector<TrainingExample> &train_set,
                  const std::vector<TrainingExample> &validation_set,
                  const NetworkParameters *init) {
  config.Validate();
  Require(!train_set.empty() && !validation_set.empty(), "training needs non-empty sets");
  if (init != nullptr)
    Require(init->config.input_dim() == net.input_dim() &&
                init->config.output_dim() == net.output_dim(),
            "initial network does not match the configured topology");

  std::vector<RunResult> runs(config.restarts);
  const int jobs = std::max(1, std::min(config.jobs, config.restarts));
  for (int first = 0; first < config.restarts; first += jobs) {
    std::vector<std::thread> pool;
    const int last = std::min(config.restarts, first + jobs);
    for (int r = first; r < last; ++r)
      pool.emplace_back([&, r] {
        runs[r] = TrainOneRun(config, net, r, train_set, validation_set, init);
      });
    for (auto &t : pool) t.join();
  }

  TrainResult result;
  int best = -1;
  for (int r = 0; r < config.restarts; ++r) {
    result.log.insert(result.log.end(), runs[r].log.begin(), runs[r].log.end());
    if (runs[r].diverged) continue;
    if (best < 0 || runs[r].validation < runs[best].validation) best = r;
  }
  Require(best >= 0, "training diverged in every run", Error::Kind::kNumeric);
  result.params = std::move(runs[best].params);
  result.validation_loss = runs[best].validation;
  result.best_run = best;
  return result;
}

}  // namespace dcsep

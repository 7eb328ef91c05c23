// Copyright 2026 The attnscope Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnscope/model/model.hpp"
#include "attnscope/train/synth.hpp"

namespace attnscope::train {

struct TrainConfig {
  std::size_t epochs = 15;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 7;  // model initialization and batch order

  // Throws ConfigError. learning_rate may be zero; everything else positive.
  void validate() const;
};

// Flat key=value text with the field names above; unknown keys are errors.
TrainConfig parse_train_config(const std::string& text);
std::string train_config_text(const TrainConfig& config);

// Mean over tags of -[y log p + (1-y) log(1-p)], p clamped to
// [1e-7, 1 - 1e-7]. Throws ShapeError on a length mismatch.
double bce_loss(std::span<const float> probabilities, std::span<const float> labels);
double bce_loss(std::span<const float> probabilities, const Label& label);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct StepInfo {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch = 0;  // 0-based within the epoch
  std::size_t step = 0;   // 0-based over the run
  double loss = 0.0;      // mean BCE over the batch
};

struct TrainResult {
  model::Model model;  // parameters with the lowest validation loss
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

using StepCallback = std::function<void(const StepInfo&)>;

// Minibatch Adam on the train split. Batch order reshuffles every epoch from
// cfg.seed; validation loss is the mean BCE over the valid split (train loss
// when the valid split is empty). Single-threaded and deterministic.
// Throws NumericError naming epoch and batch when a loss is not finite,
// ContractError when the label width differs from the model's tag count.
TrainResult train(const model::Model& initial, const Dataset& data,
                  const TrainConfig& cfg, const StepCallback& on_step = {});

// CSV epoch,train_loss,valid_loss with six decimals.
std::string history_csv(const std::vector<EpochRecord>& history);

// ROC-AUC by the rank statistic, ties counting 1/2; nullopt when the labels
// are all positive or all negative.
std::optional<double> roc_auc(std::span<const float> scores,
                              std::span<const std::uint8_t> labels);

// Mean BCE of the model over a split.
double evaluate_loss(const model::Model& model, const Dataset& data, Split split);

// Per-tag AUC over one split (the test split by default).
std::vector<std::optional<double>> evaluate_auc(const model::Model& model,
                                                const Dataset& data,
                                                Split split = Split::kTest);
// Mean over tags that have an AUC; nullopt when none does.
std::optional<double> macro_auc(const std::vector<std::optional<double>>& aucs);

}  // namespace attnscope::train

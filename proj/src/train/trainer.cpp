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

#include "attnscope/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <numeric>

#include "attnscope/error.hpp"
#include "attnscope/model/forward.hpp"
#include "attnscope/util/float_env.hpp"
#include "attnscope/util/rng.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::train {
namespace {

ad::Tensor label_tensor(const Label& label) {
  ad::Tensor t({1, kNumTags});
  for (std::size_t i = 0; i < kNumTags; ++i) t[i] = label[i];
  return t;
}

void check_labels(const model::Model& m) {
  if (m.config().n_tags() != kNumTags) {
    throw ContractError("model predicts " + std::to_string(m.config().n_tags()) +
                        " tags but labels have " + std::to_string(kNumTags));
  }
}

// Adam moments for one parameter tensor.
struct Moments {
  std::vector<float> m, v;
};

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig c;
  for (const auto& [key, value] : util::parse_key_values(text)) {
    auto count = [&] {
      const long long n = util::parse_int(value, key);
      if (n <= 0) throw ConfigError(key + " must be positive");
      return static_cast<std::size_t>(n);
    };
    if (key == "epochs") {
      c.epochs = count();
    } else if (key == "batch_size") {
      c.batch_size = count();
    } else if (key == "learning_rate") {
      c.learning_rate = util::parse_double(value, key);
    } else if (key == "beta1") {
      c.beta1 = util::parse_double(value, key);
    } else if (key == "beta2") {
      c.beta2 = util::parse_double(value, key);
    } else if (key == "epsilon") {
      c.epsilon = util::parse_double(value, key);
    } else if (key == "seed") {
      const long long s = util::parse_int(value, key);
      if (s < 0) throw ConfigError("seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(s);
    } else {
      throw ConfigError("unknown training config key \"" + key + "\"");
    }
  }
  c.validate();
  return c;
}

std::string train_config_text(const TrainConfig& c) {
  const auto real = util::format_shortest;
  return "epochs = " + std::to_string(c.epochs) + "\n" +
         "batch_size = " + std::to_string(c.batch_size) + "\n" +
         "learning_rate = " + real(c.learning_rate) + "\n" +
         "beta1 = " + real(c.beta1) + "\n" + "beta2 = " + real(c.beta2) + "\n" +
         "epsilon = " + real(c.epsilon) + "\n" +
         "seed = " + std::to_string(c.seed) + "\n";
}

double bce_loss(std::span<const float> p, std::span<const float> y) {
  if (p.size() != y.size() || p.empty()) {
    throw ShapeError("bce_loss: " + std::to_string(p.size()) +
                     " probabilities vs " + std::to_string(y.size()) + " labels");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], ad::kBceClampLow, ad::kBceClampHigh);
    sum -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
  }
  return sum / static_cast<double>(p.size());
}

double bce_loss(std::span<const float> p, const Label& label) {
  std::array<float, kNumTags> y{};
  for (std::size_t i = 0; i < kNumTags; ++i) y[i] = label[i];
  return bce_loss(p, std::span<const float>(y));
}

TrainResult train(const model::Model& initial, const Dataset& data,
                  const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  check_labels(initial);
  const util::ScopedFlushDenormals flush_denormals;
  const auto train_idx = data.indices(Split::kTrain);
  if (train_idx.empty()) throw ContractError("the train split is empty");
  const bool has_valid = !data.indices(Split::kValid).empty();

  model::Model current = initial;
  model::ParameterMap params = initial.parameters();
  std::map<std::string, Moments> moments;
  for (const auto& [name, t] : params) {
    moments[name] = {std::vector<float>(t.size(), 0.0f),
                     std::vector<float>(t.size(), 0.0f)};
  }

  TrainResult result{initial, {}, 0};
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    util::Engine shuffle(util::derive_seed(cfg.seed, 0x65706f6368ULL + epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          std::floor(util::uniform(shuffle, 0.0, static_cast<double>(i))));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    const std::size_t n_batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const float weight = 1.0f / static_cast<float>(end - begin);
      ad::Gradients grads;
      double batch_loss = 0.0;
      for (std::size_t s = begin; s < end; ++s) {
        const Example& ex = data.items[order[s]];
        ad::Graph g;
        const auto nodes = model::bind_parameters(g, current);
        const auto trace = model::build_forward(g, current, nodes, ex.input);
        const ad::NodeId loss =
            g.bce(trace.probabilities, g.constant(label_tensor(ex.label)));
        const double value = g.value(loss)[0];
        if (!std::isfinite(value)) {
          throw NumericError("non-finite loss in epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b) + " (clip seed " +
                             std::to_string(ex.seed) + ")");
        }
        batch_loss += value;
        ad::backward_accumulate(g, loss, weight, grads);
      }
      epoch_loss += batch_loss;
      batch_loss /= static_cast<double>(end - begin);

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (auto& [name, tensor] : params) {
        const ad::Tensor& g = grads.at(name);
        Moments& mo = moments.at(name);
        float* p = tensor.raw();
        for (std::size_t i = 0; i < tensor.size(); ++i) {
          const double gi = g[i];
          const double m = cfg.beta1 * mo.m[i] + (1.0 - cfg.beta1) * gi;
          const double v = cfg.beta2 * mo.v[i] + (1.0 - cfg.beta2) * gi * gi;
          mo.m[i] = static_cast<float>(m);
          mo.v[i] = static_cast<float>(v);
          const double update =
              cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
          p[i] = static_cast<float>(static_cast<double>(p[i]) - update);
        }
      }
      try {
        current.set_parameters(params);
      } catch (const NumericError& e) {
        throw NumericError("update diverged in epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b) + ": " + e.what());
      }
      if (on_step) on_step({epoch, b, step - 1, batch_loss});
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(order.size());
    rec.valid_loss = has_valid ? evaluate_loss(current, data, Split::kValid)
                               : rec.train_loss;
    if (!std::isfinite(rec.valid_loss)) {
      throw NumericError("non-finite validation loss after epoch " +
                         std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (rec.valid_loss < best_valid) {
      best_valid = rec.valid_loss;
      result.best_epoch = epoch;
      result.model = current;
    }
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,valid_loss\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + util::format_fixed(r.train_loss) + "," +
           util::format_fixed(r.valid_loss) + "\n";
  }
  return out;
}

std::optional<double> roc_auc(std::span<const float> scores,
                              std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average 1-based ranks over tie groups; a tie then contributes exactly 1/2.
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        positive_rank_sum += rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

double evaluate_loss(const model::Model& m, const Dataset& data, Split split) {
  check_labels(m);
  const auto idx = data.indices(split);
  if (idx.empty()) throw ContractError(std::string("the ") + split_name(split) +
                                       " split is empty");
  double sum = 0.0;
  for (std::size_t i : idx) {
    const auto pred = model::predict_tags(m, data.items[i].input);
    sum += bce_loss(pred.probabilities, data.items[i].label);
  }
  return sum / static_cast<double>(idx.size());
}

std::vector<std::optional<double>> evaluate_auc(const model::Model& m,
                                                const Dataset& data, Split split) {
  check_labels(m);
  const auto idx = data.indices(split);
  if (idx.empty()) throw ContractError(std::string("the ") + split_name(split) +
                                       " split is empty");
  std::vector<std::vector<float>> scores(kNumTags);
  std::vector<std::vector<std::uint8_t>> labels(kNumTags);
  for (std::size_t i : idx) {
    const auto pred = model::predict_tags(m, data.items[i].input);
    for (std::size_t t = 0; t < kNumTags; ++t) {
      scores[t].push_back(pred.probabilities[t]);
      labels[t].push_back(data.items[i].label[t]);
    }
  }
  std::vector<std::optional<double>> out;
  for (std::size_t t = 0; t < kNumTags; ++t) out.push_back(roc_auc(scores[t], labels[t]));
  return out;
}

std::optional<double> macro_auc(const std::vector<std::optional<double>>& aucs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : aucs) {
    if (a) {
      sum += *a;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace attnscope::train

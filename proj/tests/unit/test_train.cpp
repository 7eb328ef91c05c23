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

// Loss, AUC, and the minibatch Adam loop.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "attnscope/error.hpp"
#include "attnscope/model/model.hpp"
#include "attnscope/train/trainer.hpp"
#include "attnscope/util/float_env.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using model::ModelConfig;
using testing::oracle;

// Tiny-model inputs whose mean level encodes the loud/quiet pair.
train::Dataset toy_dataset(std::size_t n_train, std::size_t n_valid, std::uint64_t seed) {
  const auto c = ModelConfig::tiny();
  train::Dataset d;
  for (std::size_t i = 0; i < n_train + n_valid; ++i) {
    train::Example ex;
    ex.label = train::label_from_combination(static_cast<unsigned>(i % 16));
    ex.input = testing::random_tensor({c.n_mels, c.frames}, seed + i, 0.5);
    const float shift = ex.label[0] ? 1.0f : -1.0f;
    for (float& v : ex.input.data()) v += shift;
    ex.split = i < n_train ? train::Split::kTrain : train::Split::kValid;
    ex.seed = seed + i;
    d.items.push_back(std::move(ex));
  }
  return d;
}

TEST(Loss, BceMatchesTheOracle) {
  const auto& fx = oracle()["bce"];
  const std::vector<float> p = fx["p"];
  const std::vector<float> y = fx["y"];
  EXPECT_NEAR(train::bce_loss(p, y), fx["loss"].get<double>(), 1e-7);
  const std::vector<float> short_y = {1.0f};
  EXPECT_THROW(train::bce_loss(p, short_y), ShapeError);
}

TEST(Auc, RankStatisticMatchesTheOracle) {
  const auto& fx = oracle()["auc"];
  const std::vector<float> scores = fx["scores"];
  const std::vector<std::uint8_t> labels = fx["labels"];
  EXPECT_DOUBLE_EQ(*train::roc_auc(scores, labels), fx["value"].get<double>());
}

TEST(Auc, TiesCountHalfAndDegenerateLabelsHaveNoAuc) {
  const std::vector<float> tied = {0.5f, 0.5f, 0.5f, 0.5f};
  const std::vector<std::uint8_t> labels = {0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(*train::roc_auc(tied, labels), 0.5);
  const std::vector<std::uint8_t> all_one = {1, 1, 1, 1};
  EXPECT_FALSE(train::roc_auc(tied, all_one).has_value());
  EXPECT_DOUBLE_EQ(*train::macro_auc({0.5, std::nullopt, 1.0}), 0.75);
  EXPECT_FALSE(train::macro_auc({std::nullopt}).has_value());
}

TEST(Config, TextRoundTripAndValidation) {
  train::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0025;
  cfg.seed = 42;
  const auto back = train::parse_train_config(train::train_config_text(cfg));
  EXPECT_EQ(back.epochs, 3u);
  EXPECT_EQ(back.learning_rate, 0.0025);
  EXPECT_EQ(back.seed, 42u);
  EXPECT_THROW(train::parse_train_config("epochs = 0\n"), ConfigError);
  EXPECT_THROW(train::parse_train_config("momentum = 0.9\n"), ConfigError);
  EXPECT_THROW(train::parse_train_config("learning_rate = -1\n"), ConfigError);
  EXPECT_NO_THROW(train::parse_train_config("learning_rate = 0\n"));
}

#if defined(__x86_64__)
TEST(FloatEnv, FlushesSubnormalsInsideTheScopeOnly) {
  volatile float tiny = 1e-30f;
  volatile float scale = 1e-10f;
  {
    const util::ScopedFlushDenormals guard;
    const float product = tiny * scale;
    EXPECT_EQ(product, 0.0f);
  }
  const float product = tiny * scale;
  EXPECT_GT(product, 0.0f);
}
#endif

TEST(Trainer, OneItemRepeatedFiftyTimesOverfitsMonotonically) {
  const auto one = toy_dataset(1, 0, 10).items.front();
  train::Dataset data;
  data.items.assign(50, one);
  const auto init = model::build_model(ModelConfig::tiny(), 1);
  train::TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  std::vector<double> losses;
  train::train(init, data, cfg, [&](const train::StepInfo& s) { losses.push_back(s.loss); });
  ASSERT_EQ(losses.size(), 50u);
  for (std::size_t i = 1; i < losses.size(); ++i) {
    EXPECT_LT(losses[i], losses[i - 1]) << "step " << i;
  }
}

TEST(Trainer, ZeroLearningRateKeepsTheInitialization) {
  const auto data = toy_dataset(20, 4, 20);
  const auto init = model::build_model(ModelConfig::tiny(), 2);
  train::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.0;
  const auto r = train::train(init, data, cfg);
  for (const auto& [name, value] : init.parameters()) {
    EXPECT_TRUE(std::ranges::equal(value.data(), r.model.parameter(name).data())) << name;
  }
}

TEST(Trainer, DeterministicAndKeepsTheBestEpoch) {
  const auto data = toy_dataset(32, 8, 30);
  const auto init = model::build_model(ModelConfig::tiny(), 3);
  train::TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.learning_rate = 0.01;
  const auto a = train::train(init, data, cfg);
  const auto b = train::train(init, data, cfg);
  ASSERT_EQ(a.history.size(), 4u);
  for (const auto& [name, value] : a.model.parameters()) {
    EXPECT_TRUE(std::ranges::equal(value.data(), b.model.parameter(name).data())) << name;
  }
  const auto best = std::min_element(a.history.begin(), a.history.end(),
                                     [](const auto& x, const auto& y) {
                                       return x.valid_loss < y.valid_loss;
                                     });
  EXPECT_EQ(a.best_epoch, best->epoch);
  EXPECT_NEAR(train::evaluate_loss(a.model, data, train::Split::kValid), best->valid_loss,
              1e-6);
}

TEST(Trainer, HistoryCsvLayout) {
  const std::vector<train::EpochRecord> h = {{1, 0.5, 0.25}, {2, 0.125, 0.0625}};
  EXPECT_EQ(train::history_csv(h),
            "epoch,train_loss,valid_loss\n1,0.500000,0.250000\n2,0.125000,0.062500\n");
}

TEST(Trainer, DivergenceIsANumericError) {
  const auto data = toy_dataset(8, 0, 40);
  train::TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e30;
  try {
    train::train(model::build_model(ModelConfig::tiny(), 4), data, cfg);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  }
}

TEST(Trainer, LabelWidthMustMatchTheModel) {
  auto c = ModelConfig::tiny();
  c.tag_names = {"a", "b"};
  train::TrainConfig cfg;
  cfg.epochs = 1;
  EXPECT_THROW(train::train(model::build_model(c, 0), toy_dataset(4, 0, 1), cfg), ContractError);
}

}  // namespace
}  // namespace attnscope

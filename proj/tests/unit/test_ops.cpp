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

// Op catalog: forward fixtures, algebraic properties and per-op gradient checks.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "attnscope/ad/grad_check.hpp"
#include "attnscope/ad/graph.hpp"
#include "attnscope/error.hpp"
#include "grad_cases.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;
using testing::oracle;
using testing::random_tensor;
using testing::weighted_sum;

TEST(OpFixtures, ConvolutionOfOnesIsFours) {
  const Tensor x({1, 3, 3}, 1.0f);
  const Tensor w({1, 1, 2, 2}, 1.0f);
  const Tensor b({1}, 0.0f);
  const Tensor y = ad::forward_op(ad::OpKind::kConv2dValid, std::vector<Tensor>{x, w, b});
  ASSERT_EQ(y.shape(), (ad::Shape{1, 2, 2}));
  const auto& want = oracle()["conv_ones"]["output"];
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_EQ(y[i * 2 + j], want[i][j].get<float>());
    }
  }
}

TEST(OpFixtures, ThreeFrameAttentionCellMatchesHandSoftmax) {
  const auto& fx = oracle()["attention_t3"];
  auto matrix = [](const nlohmann::json& rows) {
    Tensor t({rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < rows[i].size(); ++j) t[i * rows[i].size() + j] = rows[i][j];
    }
    return t;
  };
  Graph g;
  const NodeId q = g.constant(matrix(fx["q"]));
  const NodeId k = g.constant(matrix(fx["k"]));
  const NodeId v = g.constant(matrix(fx["v"]));
  const NodeId scores =
      g.softmax_lastdim(g.scale(g.matmul(q, k, true), 1.0f / std::sqrt(2.0f)));
  const NodeId out = g.matmul(scores, v);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(g.value(scores)[i * 3 + j], fx["scores"][i][j].get<double>(), 1e-6);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(g.value(out)[i * 2 + j], fx["output"][i][j].get<double>(), 1e-6);
    }
  }
}

TEST(OpFixtures, BceOfConfidentPredictions) {
  const auto& fx = oracle()["bce"];
  const Tensor p({1, 2}, {0.9f, 0.1f});
  const Tensor y({1, 2}, {1.0f, 0.0f});
  const Tensor loss = ad::forward_op(ad::OpKind::kBce, std::vector<Tensor>{p, y});
  EXPECT_NEAR(loss[0], fx["loss"].get<double>(), 1e-6);
  EXPECT_NEAR(loss[0], 0.10536, 1e-5);
}

TEST(OpFixtures, BceClampsSaturatedProbabilities) {
  const Tensor p({1, 2}, {0.0f, 1.0f});
  const Tensor y({1, 2}, {1.0f, 0.0f});
  const Tensor loss = ad::forward_op(ad::OpKind::kBce, std::vector<Tensor>{p, y});
  EXPECT_TRUE(std::isfinite(loss[0]));
  // The bounds are float constants: 1 - 1e-7 rounds to 1 - 2^-23.
  const double lo = ad::kBceClampLow;
  const double hi = ad::kBceClampHigh;
  EXPECT_NEAR(loss[0], -(std::log(lo) + std::log(1.0 - hi)) / 2.0, 1e-4);
}

TEST(OpProperties, SoftmaxRowsSumToOneAndIgnoreShifts) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor x = random_tensor({4, 9}, seed, 3.0);
    Tensor shifted = x;
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 9; ++c) shifted[r * 9 + c] += 2.5f * static_cast<float>(r);
    }
    const Tensor a = ad::forward_op(ad::OpKind::kSoftmaxLastDim, std::vector<Tensor>{x});
    const Tensor b = ad::forward_op(ad::OpKind::kSoftmaxLastDim, std::vector<Tensor>{shifted});
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        sum += a[r * 9 + c];
        EXPECT_NEAR(a[r * 9 + c], b[r * 9 + c], 1e-6);
      }
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(OpProperties, MaxPoolTakesFirstMaximumOnTies) {
  Graph g;
  const NodeId x = g.parameter("x", Tensor({1, 2, 2}, 1.0f));
  const NodeId y = g.maxpool2d(x, 2, 2);
  const auto grads = ad::backward(g, g.reshape(y, {1}));
  EXPECT_EQ(grads.at("x")[0], 1.0f);
  EXPECT_EQ(grads.at("x")[1], 0.0f);
  EXPECT_EQ(grads.at("x")[2], 0.0f);
  EXPECT_EQ(grads.at("x")[3], 0.0f);
}

TEST(OpProperties, SumGradientIsAllOnes) {
  Graph g;
  const NodeId p = g.parameter("p", random_tensor({2, 3}, 5));
  const NodeId loss = g.matmul(g.reshape(p, {1, 6}), g.constant(Tensor({6, 1}, 1.0f)));
  const auto grads = ad::backward(g, loss);
  for (float v : grads.at("p").data()) EXPECT_EQ(v, 1.0f);
}

TEST(OpProperties, SigmoidSlopeAtZeroIsOneQuarter) {
  Graph g;
  const NodeId z = g.parameter("z", Tensor({1}, 0.0f));
  const NodeId loss = g.scale(g.sigmoid(z), 3.0f);
  EXPECT_FLOAT_EQ(ad::backward(g, loss).at("z")[0], 0.75f);
}

TEST(OpProperties, DuplicatedParameterUseAccumulates) {
  const Tensor w0 = random_tensor({3, 3}, 11);
  const Tensor x0 = random_tensor({2, 3}, 12);
  // Same leaf used twice.
  Graph shared;
  const NodeId w = shared.parameter("w", w0);
  const NodeId x = shared.constant(x0);
  const NodeId twice = shared.matmul(shared.relu(shared.matmul(x, w)), w);
  const auto g1 = ad::backward(shared, weighted_sum(shared, twice, 3));
  // Manually cloned leaves.
  Graph cloned;
  const NodeId wa = cloned.parameter("wa", w0);
  const NodeId wb = cloned.parameter("wb", w0);
  const NodeId xc = cloned.constant(x0);
  const NodeId out = cloned.matmul(cloned.relu(cloned.matmul(xc, wa)), wb);
  const auto g2 = ad::backward(cloned, weighted_sum(cloned, out, 3));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(g1.at("w")[i], g2.at("wa")[i] + g2.at("wb")[i], 1e-5);
  }
}

TEST(OpProperties, ShapeFunctionsAreTotalOnConformingShapes) {
  util::Engine e(99);
  auto dim = [&](std::size_t hi) {
    return 1 + static_cast<std::size_t>(util::uniform(e, 0.0, static_cast<double>(hi)));
  };
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = dim(6), k = dim(6), n = dim(6);
    const Tensor a = random_tensor({m, k}, trial);
    const Tensor b = random_tensor({k, n}, trial + 1);
    EXPECT_EQ(ad::forward_op(ad::OpKind::kMatmul, std::vector<Tensor>{a, b}).shape(),
              (ad::Shape{m, n}));
    const std::size_t c = dim(3), h = dim(6) + 2, w = dim(6) + 2;
    const std::size_t kh = dim(h) , kw = dim(w);
    const Tensor x = random_tensor({c, h, w}, trial + 2);
    const Tensor wt = random_tensor({2, c, std::min(kh, h), std::min(kw, w)}, trial + 3);
    const Tensor bias({2});
    EXPECT_EQ(ad::forward_op(ad::OpKind::kConv2dSameTime, std::vector<Tensor>{x, wt, bias})
                  .shape(),
              (ad::Shape{2, h - std::min(kh, h) + 1, w}));
    EXPECT_EQ(ad::forward_op(ad::OpKind::kConv2dValid, std::vector<Tensor>{x, wt, bias}).shape(),
              (ad::Shape{2, h - std::min(kh, h) + 1, w - std::min(kw, w) + 1}));
    ad::OpAttrs mean_attrs;
    mean_attrs.axis = trial % 3;
    ad::Shape reduced = x.shape();
    reduced[mean_attrs.axis] = 1;
    EXPECT_EQ(ad::forward_op(ad::OpKind::kMeanAxis, std::vector<Tensor>{x}, mean_attrs).shape(),
              reduced);
  }
}

TEST(OpProperties, NonConformingShapesThrowShapeError) {
  const Tensor a({2, 3});
  const Tensor b({4, 5});
  EXPECT_THROW(ad::forward_op(ad::OpKind::kMatmul, std::vector<Tensor>{a, b}), ShapeError);
  EXPECT_THROW(ad::forward_op(ad::OpKind::kAdd, std::vector<Tensor>{a, b}), ShapeError);
  const Tensor x({1, 3, 3});
  const Tensor w({1, 1, 4, 2});
  EXPECT_THROW(
      ad::forward_op(ad::OpKind::kConv2dValid, std::vector<Tensor>{x, w, Tensor({1})}),
      ShapeError);
  ad::OpAttrs bad_reshape;
  bad_reshape.shape = {7};
  EXPECT_THROW(ad::forward_op(ad::OpKind::kReshape, std::vector<Tensor>{a}, bad_reshape),
               ShapeError);
}

TEST(GradCheck, LinearGraphIsExact) {
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({3, 4}, 1));
  const NodeId x = g.constant(random_tensor({2, 3}, 2));
  const NodeId loss = weighted_sum(g, g.matmul(x, w), 3);
  ad::GradCheckOptions opt;
  opt.fraction = 1.0;
  EXPECT_LT(ad::grad_check(g, loss, opt).max_relative_error, 1e-6);
}

TEST(GradCheck, LeavesGraphValuesUnchanged) {
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({3, 3}, 1));
  const NodeId y = g.softmax_lastdim(g.matmul(g.constant(random_tensor({2, 3}, 2)), w));
  const NodeId loss = weighted_sum(g, y, 4);
  const Tensor before = g.value(loss);
  const Tensor w_before = g.value(w);
  ad::grad_check(g, loss);
  EXPECT_EQ(g.value(loss).data()[0], before.data()[0]);
  EXPECT_TRUE(std::equal(w_before.data().begin(), w_before.data().end(),
                         g.value(w).data().begin()));
}

TEST(GradCheck, Float32OracleAgreesOnSmoothGraphs) {
  Graph g;
  const NodeId w = g.parameter("w", random_tensor({4}, 9));
  const NodeId loss = weighted_sum(g, g.sigmoid(w), 10);
  ad::GradCheckOptions opt;
  opt.fraction = 1.0;
  opt.oracle = ad::FiniteDifference::kFloat32;
  const auto good = ad::grad_check(g, loss, opt);
  EXPECT_LT(good.max_relative_error, 1e-2);
}

class GradCheckPerOp : public ::testing::TestWithParam<testing::GradCase> {};

TEST_P(GradCheckPerOp, TwentySeedsAgreeWithFiniteDifferences) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 0; seed < testing::kGradCheckSeeds; ++seed) {
    const auto r = testing::run_grad_case(c, seed);
    ASSERT_GT(r.coordinates_checked, 0u);
    EXPECT_LT(r.max_relative_error, testing::kGradCheckTolerance)
        << c.name << " seed " << seed << ": " << r.worst_parameter << "[" << r.worst_index
        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

INSTANTIATE_TEST_SUITE_P(Catalog, GradCheckPerOp, ::testing::ValuesIn(testing::grad_cases()),
                         [](const auto& info) { return info.param.test_name; });

TEST(GradCheckModel, TinyTaggerTwentySeeds) {
  const auto c = testing::tiny_model_case();
  for (std::uint64_t seed = 0; seed < testing::kGradCheckSeeds; ++seed) {
    const auto r = testing::run_grad_case(c, seed);
    EXPECT_LT(r.max_relative_error, testing::kGradCheckTolerance)
        << "seed " << seed << ": " << r.worst_parameter << "[" << r.worst_index
        << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric;
  }
}

}  // namespace
}  // namespace attnscope

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

#include "grad_cases.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "attnscope/model/forward.hpp"
#include "attnscope/util/rng.hpp"

namespace attnscope::testing {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

namespace {

Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  util::Engine e(seed);
  for (float& v : t.data()) v = static_cast<float>(scale * util::gaussian(e));
  return t;
}

std::vector<GradCase> build_cases() {
  std::vector<GradCase> cases;
  auto add = [&](std::string name, std::string test_name, GraphBuilder build) {
    cases.push_back({std::move(name), std::move(test_name), std::move(build)});
  };

  add("matmul", "Matmul", [](Graph& g, std::uint64_t s) {
    const NodeId a = g.parameter("a", random_tensor({5, 7}, s));
    const NodeId b = g.parameter("b", random_tensor({7, 6}, s + 100));
    return weighted_sum(g, g.matmul(a, b), s + 200);
  });
  add("matmul_t", "MatmulTransposed", [](Graph& g, std::uint64_t s) {
    const NodeId a = g.parameter("a", random_tensor({5, 7}, s));
    const NodeId b = g.parameter("b", random_tensor({6, 7}, s + 100));
    return weighted_sum(g, g.matmul(a, b, true), s + 200);
  });
  add("add", "AddSameShapeAndRowBroadcast", [](Graph& g, std::uint64_t s) {
    const NodeId a = g.parameter("a", random_tensor({4, 5}, s));
    const NodeId b = g.parameter("b", random_tensor({4, 5}, s + 1));
    const NodeId r = g.parameter("row", random_tensor({5}, s + 2));
    return weighted_sum(g, g.add(g.add(a, b), r), s + 3);
  });
  add("relu", "Relu", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", away_from_zero({6, 7}, s));
    return weighted_sum(g, g.relu(x), s + 1);
  });
  add("sigmoid", "Sigmoid", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({6, 7}, s, 2.0));
    return weighted_sum(g, g.sigmoid(x), s + 1);
  });
  add("softmax_lastdim", "SoftmaxLastDim", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({5, 8}, s, 2.0));
    return weighted_sum(g, g.softmax_lastdim(x), s + 1);
  });
  add("layer_norm_lastdim", "LayerNormLastDim", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({5, 8}, s, 2.0));
    const NodeId gamma = g.parameter("gamma", random_tensor({8}, s + 1));
    const NodeId beta = g.parameter("beta", random_tensor({8}, s + 2));
    return weighted_sum(g, g.layer_norm_lastdim(x, gamma, beta), s + 3);
  });
  add("conv2d_valid", "Conv2dValid", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({2, 6, 7}, s));
    const NodeId w = g.parameter("w", random_tensor({3, 2, 3, 2}, s + 1));
    const NodeId b = g.parameter("b", random_tensor({3}, s + 2));
    return weighted_sum(g, g.conv2d_valid(x, w, b), s + 3);
  });
  add("conv2d_same_time", "Conv2dSameTime", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({2, 6, 9}, s));
    const NodeId w = g.parameter("w", random_tensor({3, 2, 4, 5}, s + 1));
    const NodeId b = g.parameter("b", random_tensor({3}, s + 2));
    return weighted_sum(g, g.conv2d_same_time(x, w, b), s + 3);
  });
  // A strongly negative bias leaves few active ReLUs, which drives the
  // convolution's sparse weight-gradient path.
  add("conv2d+relu+mean", "ConvReluMeanWithSparseUpstream", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({2, 8, 12}, s));
    Tensor w0 = random_tensor({4, 2, 5, 3}, s + 1, 0.3);
    const NodeId w = g.parameter("w", w0);
    const Tensor pre = ad::forward_op(
        ad::OpKind::kConv2dSameTime,
        std::vector<Tensor>{g.value(x), w0, Tensor({4}, 0.0f)});
    // Bias each channel so about 15% of its outputs stay positive.
    Tensor bias({4});
    const std::size_t per = pre.size() / 4;
    for (std::size_t c = 0; c < 4; ++c) {
      std::vector<float> vals(pre.raw() + c * per, pre.raw() + (c + 1) * per);
      std::sort(vals.begin(), vals.end());
      bias[c] = -vals[static_cast<std::size_t>(0.85 * per)] + 0.01f;
    }
    const NodeId b = g.parameter("b", bias);
    const NodeId act = g.relu(g.conv2d_same_time(x, w, b));
    return g.reshape(g.mean_axis(g.mean_axis(g.mean_axis(act, 0), 1), 2), {1});
  });
  add("maxpool2d", "MaxPool2d", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", distinct_values({2, 6, 6}, s));
    return weighted_sum(g, g.maxpool2d(x, 3, 2), s + 1);
  });
  add("mean_axis", "MeanAxis", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({3, 4, 5}, s));
    const NodeId y = g.concat_axis({g.reshape(g.mean_axis(x, 0), {20}),
                                    g.reshape(g.mean_axis(x, 1), {15}),
                                    g.reshape(g.mean_axis(x, 2), {12})},
                                   0);
    return weighted_sum(g, y, s + 1);
  });
  add("concat_axis", "ConcatAxis", [](Graph& g, std::uint64_t s) {
    const NodeId a = g.parameter("a", random_tensor({3, 2}, s));
    const NodeId b = g.parameter("b", random_tensor({3, 4}, s + 1));
    return weighted_sum(g, g.concat_axis({a, b, a}, 1), s + 2);
  });
  add("scale", "Scale", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({4, 4}, s));
    return weighted_sum(g, g.scale(x, -0.37f), s + 1);
  });
  add("reshape", "Reshape", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({4, 6}, s));
    return weighted_sum(g, g.reshape(x, {2, 3, 4}), s + 1);
  });
  add("transpose2d", "Transpose2d", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.parameter("x", random_tensor({3, 5}, s));
    const NodeId w = g.constant(random_tensor({3, 2}, s + 1));
    return weighted_sum(g, g.matmul(g.transpose2d(x), w), s + 2);
  });
  add("bce", "Bce", [](Graph& g, std::uint64_t s) {
    Tensor p({1, 8});
    Tensor y({1, 8});
    util::Engine e(s);
    for (std::size_t i = 0; i < 8; ++i) {
      p[i] = static_cast<float>(util::uniform(e, 0.05, 0.95));
      y[i] = util::uniform(e, 0.0, 1.0) < 0.5 ? 0.0f : 1.0f;
    }
    return g.bce(g.parameter("p", p), g.constant(y));
  });
  add("softmax+matmul attention", "AttentionCell", [](Graph& g, std::uint64_t s) {
    const NodeId q = g.parameter("q", random_tensor({6, 4}, s));
    const NodeId k = g.parameter("k", random_tensor({6, 4}, s + 1));
    const NodeId v = g.parameter("v", random_tensor({6, 4}, s + 2));
    const NodeId scores = g.softmax_lastdim(g.scale(g.matmul(q, k, true), 0.5f));
    return weighted_sum(g, g.matmul(scores, v), s + 3);
  });
  add("matmul+relu chain", "TwoLayerMatmulReluChain", [](Graph& g, std::uint64_t s) {
    const NodeId x = g.constant(random_tensor({4, 5}, s));
    const NodeId w1 = g.parameter("w1", random_tensor({5, 6}, s + 1));
    const NodeId w2 = g.parameter("w2", random_tensor({6, 3}, s + 2));
    const NodeId h = g.relu(g.matmul(x, w1));
    return weighted_sum(g, g.matmul(h, w2), s + 3);
  });
  return cases;
}

}  // namespace

NodeId weighted_sum(Graph& g, NodeId x, std::uint64_t seed) {
  const std::size_t n = g.value(x).size();
  const NodeId row = g.reshape(x, {1, n});
  return g.matmul(row, g.constant(random_tensor({n, 1}, seed)));
}

Tensor away_from_zero(ad::Shape shape, std::uint64_t seed, float margin) {
  Tensor t = random_tensor(std::move(shape), seed);
  for (float& v : t.data()) v = std::copysign(margin + std::abs(v), v);
  return t;
}

Tensor distinct_values(ad::Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  std::vector<std::size_t> order(t.size());
  std::iota(order.begin(), order.end(), 0);
  util::Engine e(seed);
  std::shuffle(order.begin(), order.end(), e);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = 0.05f * static_cast<float>(order[i]) - 1.0f;
  }
  return t;
}

const std::vector<GradCase>& grad_cases() {
  static const std::vector<GradCase> cases = build_cases();
  return cases;
}

GradCase tiny_model_case() {
  GradCase c{"tiny tagger", "TinyTagger", [](Graph& g, std::uint64_t s) {
               const auto config = model::ModelConfig::tiny();
               const auto m = model::build_model(config, s);
               const auto params = model::bind_parameters(g, m);
               const auto trace = model::build_forward(
                   g, m, params, random_tensor({config.n_mels, config.frames}, s + 100));
               Tensor labels({1, config.n_tags()});
               for (std::size_t i = 0; i < config.n_tags(); i += 2) labels[i] = 1.0f;
               return g.bce(trace.probabilities, g.constant(labels));
             }};
  c.eps = kModelGradCheckEps;
  return c;
}

ad::GradCheckResult run_grad_case(const GradCase& c, std::uint64_t seed) {
  Graph g;
  const NodeId loss = c.build(g, seed);
  ad::GradCheckOptions options;
  options.seed = seed;
  options.eps = c.eps;
  return ad::grad_check(g, loss, options);
}

}  // namespace attnscope::testing

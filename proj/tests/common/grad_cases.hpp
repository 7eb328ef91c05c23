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

// Gradient-check cases shared by the unit tests and the acceptance run.

#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "attnscope/ad/grad_check.hpp"
#include "attnscope/ad/graph.hpp"

namespace attnscope::testing {

inline constexpr std::uint64_t kGradCheckSeeds = 20;
inline constexpr double kGradCheckTolerance = 1e-2;

// Central-difference step for the whole tiny model. The default 1e-3 lets a
// probe cross ReLU and max-pool switch points inside the deep graph; 1e-4
// keeps the difference on one linear piece.
inline constexpr double kModelGradCheckEps = 1e-4;

using GraphBuilder = std::function<ad::NodeId(ad::Graph&, std::uint64_t seed)>;

struct GradCase {
  std::string name;       // human-readable
  std::string test_name;  // identifier-safe
  GraphBuilder build;     // returns a scalar loss node
  double eps = 1e-3;
};

// Keeps gtest from dumping the raw bytes of a case into test names.
inline void PrintTo(const GradCase& c, std::ostream* os) { *os << c.name; }

// Random linear functional of `x`, so every output element gets its own
// non-trivial upstream gradient: reshape to a row, multiply by a fixed column.
ad::NodeId weighted_sum(ad::Graph& g, ad::NodeId x, std::uint64_t seed);

// Gaussian values pushed at least `margin` away from zero, so a finite
// difference never straddles a ReLU kink.
ad::Tensor away_from_zero(ad::Shape shape, std::uint64_t seed, float margin = 0.1f);

// Distinct values on a coarse grid in random order, so max-pool windows
// never hold near-ties.
ad::Tensor distinct_values(ad::Shape shape, std::uint64_t seed);

// Every catalog op in isolation, plus small compositions.
const std::vector<GradCase>& grad_cases();

// Binary cross-entropy of the whole tiny-config tagger on a random input.
GradCase tiny_model_case();

// 5% coordinate sample, seeded by `seed`.
ad::GradCheckResult run_grad_case(const GradCase& c, std::uint64_t seed);

}  // namespace attnscope::testing

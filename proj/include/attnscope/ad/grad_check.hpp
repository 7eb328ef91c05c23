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
#include <string>

#include "attnscope/ad/graph.hpp"

namespace attnscope::ad {

// How the finite differences are evaluated. kFloat64 re-evaluates the
// recorded graph in double precision, so the oracle is not limited by the
// float32 resolution of the loss (about 3e-5 in gradient units at eps=1e-3
// for a loss near 1, which swamps coordinates whose true gradient is zero or
// tiny, such as attention key biases). kFloat32 replays the graph itself.
enum class FiniteDifference : std::uint8_t { kFloat64, kFloat32 };

struct GradCheckOptions {
  double eps = 1e-3;
  FiniteDifference oracle = FiniteDifference::kFloat64;
  // Fraction of each parameter's coordinates probed (at least one each).
  double fraction = 0.05;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  // The coordinate behind max_relative_error, for diagnostics.
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Central-difference check of backward() on a random coordinate subsample:
// n = (f(x+eps) - f(x-eps)) / (2 eps), a = the float32 analytic gradient, and
// the relative error per coordinate is |a - n| / max(1e-6, |a| + |n|). Leaves
// the graph with its original leaf values (and replayed).
GradCheckResult grad_check(Graph& graph, NodeId loss,
                           const GradCheckOptions& options = {});

}  // namespace attnscope::ad

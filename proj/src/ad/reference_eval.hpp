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

#include <cstddef>
#include <vector>

#include "attnscope/ad/graph.hpp"

namespace attnscope::ad::detail {

// Float64 re-evaluation of a recorded graph, used as the finite-difference
// oracle. It shares no code with the float kernels, so it also cross-checks
// the forward pass. Leaf values are read from the graph; `leaf_override`
// replaces one coordinate of the listed leaves with an exact double.
struct LeafOverride {
  std::vector<NodeId> leaves;
  std::size_t coord = 0;
  double value = 0.0;
};

double reference_scalar(const Graph& graph, NodeId output,
                        const LeafOverride* leaf_override = nullptr);

}  // namespace attnscope::ad::detail

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

#include "attnscope/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <numeric>
#include <random>

#include "reference_eval.hpp"

namespace attnscope::ad {

GradCheckResult grad_check(Graph& graph, NodeId loss,
                           const GradCheckOptions& options) {
  const Gradients analytic = backward(graph, loss);

  std::map<std::string, std::vector<NodeId>> leaves_by_name;
  for (NodeId id : graph.parameter_ids()) {
    leaves_by_name[graph.name(id)].push_back(id);
  }

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  auto eval = [&] {
    graph.replay();
    return static_cast<double>(graph.value(loss)[0]);
  };

  for (const auto& [name, ids] : leaves_by_name) {
    const std::size_t n = graph.value(ids.front()).size();
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(options.fraction * n)));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> picked;
    std::sample(all.begin(), all.end(), std::back_inserter(picked), want, rng);

    const Tensor& grad = analytic.at(name);
    for (std::size_t coord : picked) {
      const float original = graph.value(ids.front())[coord];
      double numeric = 0.0;
      if (options.oracle == FiniteDifference::kFloat64) {
        detail::LeafOverride probe{ids, coord, original + options.eps};
        const double f_up = detail::reference_scalar(graph, loss, &probe);
        probe.value = original - options.eps;
        const double f_down = detail::reference_scalar(graph, loss, &probe);
        numeric = (f_up - f_down) / (2.0 * options.eps);
      } else {
        const float up = static_cast<float>(original + options.eps);
        const float down = static_cast<float>(original - options.eps);
        for (NodeId id : ids) graph.mutable_leaf(id)[coord] = up;
        const double f_up = eval();
        for (NodeId id : ids) graph.mutable_leaf(id)[coord] = down;
        const double f_down = eval();
        for (NodeId id : ids) graph.mutable_leaf(id)[coord] = original;
        numeric = (f_up - f_down) /
                  (static_cast<double>(up) - static_cast<double>(down));
      }
      const double a = grad[coord];
      const double rel =
          std::abs(a - numeric) / std::max(1e-6, std::abs(a) + std::abs(numeric));
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = rel;
        result.worst_parameter = name;
        result.worst_index = coord;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
      ++result.coordinates_checked;
    }
  }
  graph.replay();
  return result;
}

}  // namespace attnscope::ad

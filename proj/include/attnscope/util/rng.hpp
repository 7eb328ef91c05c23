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
#include <random>

namespace attnscope::util {

// splitmix64 finalizer; maps (base, index) to a well-mixed child seed so
// per-item generators are independent of iteration order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

using Engine = std::mt19937_64;

// Uniform in [lo, hi) from the top 53 bits; identical on every platform.
double uniform(Engine& engine, double lo, double hi);

// Box-Muller on uniform(); identical on every platform.
double gaussian(Engine& engine);

}  // namespace attnscope::util

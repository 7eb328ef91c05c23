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

#include <atomic>
#include <cstdlib>
#include <string>

#include "attnscope/error.hpp"
#include "attnscope/simd/kernels.hpp"

namespace attnscope::simd {
namespace {

const Kernels* select_default() {
  if (const char* env = std::getenv("ATTNSCOPE_SIMD")) {
    const std::string level(env);
    if (level == "scalar") return &scalar_kernels();
    if (level == "avx2" && avx2_kernels()) return avx2_kernels();
  }
  if (const Kernels* widest = avx512_kernels()) return widest;
  if (const Kernels* wide = avx2_kernels()) return wide;
  return &scalar_kernels();
}

std::atomic<const Kernels*>& current() {
  static std::atomic<const Kernels*> table{select_default()};
  return table;
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::kScalar: return "scalar";
    case Level::kAvx2: return "avx2";
    case Level::kAvx512: return "avx512";
  }
  return "unknown";
}

const Kernels& active() { return *current().load(std::memory_order_acquire); }

void force_level(Level level) {
  const Kernels* table = nullptr;
  switch (level) {
    case Level::kScalar: table = &scalar_kernels(); break;
    case Level::kAvx2: table = avx2_kernels(); break;
    case Level::kAvx512: table = avx512_kernels(); break;
  }
  if (table == nullptr) {
    throw ContractError("SIMD level " + std::string(to_string(level)) +
                        " is not available on this CPU");
  }
  current().store(table, std::memory_order_release);
}

}  // namespace attnscope::simd

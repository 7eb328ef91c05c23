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

// Throughput of the dispatched kernels at the shapes the tagging model uses.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "attnscope/simd/kernels.hpp"

namespace {

struct GemmCase {
  const char* label;
  bool ta, tb;
  std::size_t m, n, k;
};

double bench_gemm(const attnscope::simd::Kernels& kern, const GemmCase& c) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  std::vector<float> a(c.m * c.k), b(c.k * c.n), out(c.m * c.n);
  for (float& v : a) v = dist(rng);
  for (float& v : b) v = dist(rng);
  const std::size_t lda = c.ta ? c.m : c.k;
  const std::size_t ldb = c.tb ? c.k : c.n;
  int reps = 0;
  const auto start = std::chrono::steady_clock::now();
  double elapsed = 0.0;
  do {
    kern.gemm(c.ta, c.tb, c.m, c.n, c.k, 1.0f, a.data(), lda, b.data(), ldb,
              0.0f, out.data(), c.n);
    ++reps;
    elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            start).count();
  } while (elapsed < 0.3);
  return static_cast<double>(c.m * c.n * c.k) * reps / elapsed * 1e-9;
}

}  // namespace

int main() {
  const GemmCase cases[] = {
      {"vertical conv fwd", false, false, 64, 2816, 602},
      {"head projection", false, false, 256, 16, 128},
      {"scores q.k^T", false, true, 256, 256, 16},
      {"attend p.v", false, false, 256, 16, 256},
      {"feed-forward", false, false, 256, 256, 128},
      {"ff weight grad", true, false, 128, 256, 256},
  };
  std::vector<const attnscope::simd::Kernels*> tables{
      &attnscope::simd::scalar_kernels()};
  if (auto* wide = attnscope::simd::avx2_kernels()) tables.push_back(wide);
  if (auto* widest = attnscope::simd::avx512_kernels()) tables.push_back(widest);
  for (const auto* table : tables) {
    for (const GemmCase& c : cases) {
      std::printf("%-7s %-20s %6.2f GMAC/s\n",
                  std::string(attnscope::simd::to_string(table->level)).c_str(),
                  c.label, bench_gemm(*table, c));
    }
  }
  return 0;
}

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

// Every vector kernel table must agree with the scalar reference.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "attnscope/error.hpp"
#include "attnscope/simd/kernels.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using simd::Kernels;
using testing::random_vector;

std::vector<const Kernels*> vector_tables() {
  std::vector<const Kernels*> out;
  if (const Kernels* k = simd::avx2_kernels()) out.push_back(k);
  if (const Kernels* k = simd::avx512_kernels()) out.push_back(k);
  return out;
}

void expect_close(const std::vector<float>& ref, const std::vector<float>& got,
                  float rel, const std::string& what) {
  ASSERT_EQ(ref.size(), got.size()) << what;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ASSERT_NEAR(ref[i], got[i], rel * (1.0f + std::abs(ref[i])))
        << what << " at " << i;
  }
}

TEST(Simd, ActiveTableIsOneOfTheBuiltLevels) {
  const Kernels& k = simd::active();
  EXPECT_TRUE(k.level == simd::Level::kScalar || k.level == simd::Level::kAvx2 ||
              k.level == simd::Level::kAvx512);
  EXPECT_EQ(simd::to_string(simd::scalar_kernels().level), "scalar");
}

TEST(Simd, GemmMatchesScalarForAllTransposesAndEdgeTiles) {
  const Kernels& ref = simd::scalar_kernels();
  const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> sizes = {
      {1, 1, 1},   {3, 5, 7},    {8, 16, 16},  {9, 17, 33},  {16, 32, 64},
      {17, 33, 5}, {64, 31, 96}, {31, 64, 70}, {130, 70, 260}, {8, 600, 40}};
  std::uint64_t seed = 1;
  for (const Kernels* k : vector_tables()) {
    for (const auto& [m, n, kk] : sizes) {
      for (int ta = 0; ta < 2; ++ta) {
        for (int tb = 0; tb < 2; ++tb) {
          for (float beta : {0.0f, 1.0f, 0.5f}) {
            const auto a = random_vector(m * kk, ++seed);
            const auto b = random_vector(kk * n, ++seed);
            const auto c0 = random_vector(m * n, ++seed);
            const std::size_t lda = ta ? m : kk;
            const std::size_t ldb = tb ? kk : n;
            auto want = c0;
            auto got = c0;
            if (beta == 0.0f) {
              // beta == 0 must not read C, so NaN garbage may not leak.
              std::fill(got.begin(), got.end(), std::numeric_limits<float>::quiet_NaN());
            }
            ref.gemm(ta, tb, m, n, kk, 0.75f, a.data(), lda, b.data(), ldb, beta,
                     want.data(), n);
            k->gemm(ta, tb, m, n, kk, 0.75f, a.data(), lda, b.data(), ldb, beta,
                    got.data(), n);
            expect_close(want, got, 2e-5f * std::sqrt(static_cast<float>(kk)),
                         std::string(simd::to_string(k->level)) + " gemm " +
                             std::to_string(m) + "x" + std::to_string(n) + "x" +
                             std::to_string(kk) + " ta=" + std::to_string(ta) +
                             " tb=" + std::to_string(tb));
          }
        }
      }
    }
  }
}

TEST(Simd, ElementwiseKernelsMatchScalarBitwise) {
  const Kernels& ref = simd::scalar_kernels();
  for (const Kernels* k : vector_tables()) {
    for (std::size_t n : {1u, 7u, 8u, 15u, 16u, 33u, 1000u}) {
      const auto x = random_vector(n, n);
      const auto y = random_vector(n, n + 100);
      std::vector<float> r1(n), r2(n);
      ref.add(x.data(), y.data(), r1.data(), n);
      k->add(x.data(), y.data(), r2.data(), n);
      EXPECT_EQ(r1, r2) << "add n=" << n;
      ref.scale(x.data(), -1.5f, r1.data(), n);
      k->scale(x.data(), -1.5f, r2.data(), n);
      EXPECT_EQ(r1, r2) << "scale n=" << n;
      ref.relu(x.data(), r1.data(), n);
      k->relu(x.data(), r2.data(), n);
      EXPECT_EQ(r1, r2) << "relu n=" << n;
    }
  }
}

TEST(Simd, ReductionsMatchScalarWithinRounding) {
  const Kernels& ref = simd::scalar_kernels();
  for (const Kernels* k : vector_tables()) {
    for (std::size_t n : {1u, 5u, 16u, 31u, 257u, 4096u}) {
      const auto x = random_vector(n, 7 * n);
      const auto y = random_vector(n, 7 * n + 1);
      const float d_ref = ref.dot(x.data(), y.data(), n);
      const float d_got = k->dot(x.data(), y.data(), n);
      EXPECT_NEAR(d_ref, d_got, 1e-5f * std::sqrt(static_cast<float>(n)) * (1 + std::abs(d_ref)));
      auto a1 = y;
      auto a2 = y;
      ref.axpy(n, 0.3f, x.data(), a1.data());
      k->axpy(n, 0.3f, x.data(), a2.data());
      expect_close(a1, a2, 1e-6f, "axpy");
    }
  }
}

TEST(Simd, SoftmaxAndLayerNormMatchScalar) {
  const Kernels& ref = simd::scalar_kernels();
  for (const Kernels* k : vector_tables()) {
    for (std::size_t cols : {1u, 3u, 8u, 16u, 17u, 128u, 256u}) {
      const std::size_t rows = 5;
      const auto x = random_vector(rows * cols, cols, 4.0);
      std::vector<float> s1(x.size()), s2(x.size());
      ref.softmax_rows(x.data(), s1.data(), rows, cols);
      k->softmax_rows(x.data(), s2.data(), rows, cols);
      expect_close(s1, s2, 1e-6f, "softmax cols=" + std::to_string(cols));

      const auto gamma = random_vector(cols, cols + 1);
      const auto beta = random_vector(cols, cols + 2);
      std::vector<float> m1(rows), m2(rows), r1(rows), r2(rows);
      ref.layer_norm_rows(x.data(), gamma.data(), beta.data(), 1e-5f, s1.data(),
                          m1.data(), r1.data(), rows, cols);
      k->layer_norm_rows(x.data(), gamma.data(), beta.data(), 1e-5f, s2.data(),
                         m2.data(), r2.data(), rows, cols);
      expect_close(s1, s2, 2e-5f, "layer_norm cols=" + std::to_string(cols));
      expect_close(m1, m2, 1e-5f, "layer_norm mean");
      expect_close(r1, r2, 1e-5f, "layer_norm rstd");
    }
  }
}

TEST(Simd, ForceLevelSwitchesTheActiveTable) {
  const simd::Level before = simd::active().level;
  simd::force_level(simd::Level::kScalar);
  EXPECT_EQ(simd::active().level, simd::Level::kScalar);
  if (simd::avx2_kernels() == nullptr) {
    EXPECT_THROW(simd::force_level(simd::Level::kAvx2), ContractError);
  }
  simd::force_level(before);
  EXPECT_EQ(simd::active().level, before);
}

}  // namespace
}  // namespace attnscope

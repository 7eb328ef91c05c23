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
#include <string_view>

// Data-parallel inner loops shared by the tensor core and the DSP code.
//
// Each instruction-set level provides the same table of entry points. The
// scalar table is the reference; wider tables must agree with it to within
// floating-point reassociation (see tests/unit/simd_equivalence_test.cpp).
// Results are bitwise reproducible for a fixed level.

namespace attnscope::simd {

enum class Level { kScalar, kAvx2, kAvx512 };

std::string_view to_string(Level level);

struct Kernels {
  Level level;

  // Row-major C[m,n] = alpha * op(A)[m,k] * op(B)[k,n] + beta * C.
  // op(X) is X^T when the matching trans flag is set. beta == 0 never reads C.
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
               std::size_t k, float alpha, const float* a, std::size_t lda,
               const float* b, std::size_t ldb, float beta, float* c,
               std::size_t ldc);

  float (*dot)(const float* x, const float* y, std::size_t n);
  // y += alpha * x
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  void (*add)(const float* x, const float* y, float* out, std::size_t n);
  void (*scale)(const float* x, float alpha, float* out, std::size_t n);
  void (*relu)(const float* x, float* out, std::size_t n);

  // Numerically stable softmax over each contiguous row of `cols` values.
  void (*softmax_rows)(const float* x, float* out, std::size_t rows,
                       std::size_t cols);

  // out = (x - mean) * rstd * gamma + beta per row; writes per-row mean and
  // rstd = 1/sqrt(var + eps) (biased variance) for the backward pass.
  void (*layer_norm_rows)(const float* x, const float* gamma,
                          const float* beta, float eps, float* out,
                          float* mean, float* rstd, std::size_t rows,
                          std::size_t cols);
};

const Kernels& scalar_kernels();

// nullptr when the build or the running CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();
// nullptr when the build or the running CPU lacks AVX-512F. Only gemm differs
// from the AVX2 table, and only for products at least 32 columns wide.
const Kernels* avx512_kernels();

// The table used by the library. Chosen once at startup: the widest level the
// CPU supports, unless ATTNSCOPE_SIMD is set to "scalar" or "avx2".
const Kernels& active();

// Test hook. Throws ContractError if the level is unavailable here.
void force_level(Level level);

bool cpu_has_avx2_fma();
bool cpu_has_avx512();

}  // namespace attnscope::simd

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

// AVX-512F GEMM. Only the matrix product gains from the wider registers at
// this library's sizes; every other entry point of the AVX-512 table is the
// AVX2 one. Like the AVX2 file, functions carry target attributes instead of
// the translation unit being compiled with -mavx512f.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "attnscope/simd/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define ATTNSCOPE_X86_AVX512 1
#include <immintrin.h>
#endif

namespace attnscope::simd {

#if ATTNSCOPE_X86_AVX512

#define AVX512_FN __attribute__((target("avx512f,avx2,fma")))

namespace {

constexpr std::size_t kMr = 8;
constexpr std::size_t kNr = 32;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 128;
constexpr std::size_t kNc = 512;
// Narrower products use the AVX2 kernel (a 32-wide tile would be half empty).
constexpr std::size_t kMinWidth = 32;

float* pack_buffer_a() {
  thread_local std::vector<float> buf(kMc * kKc);
  return buf.data();
}

float* pack_buffer_b() {
  thread_local std::vector<float> buf(kNc * kKc);
  return buf.data();
}

// Panels of kMr rows, laid out [panel][p][kMr], zero padded.
void pack_a(bool trans_a, const float* a, std::size_t lda, std::size_t i0,
            std::size_t mc, std::size_t p0, std::size_t kc, float* out) {
  for (std::size_t ip = 0; ip < mc; ip += kMr) {
    const std::size_t h = std::min(kMr, mc - ip);
    float* panel = out + ip * kc;
    if (!trans_a) {
      for (std::size_t r = 0; r < h; ++r) {
        const float* row = a + (i0 + ip + r) * lda + p0;
        for (std::size_t p = 0; p < kc; ++p) panel[p * kMr + r] = row[p];
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        const float* src = a + (p0 + p) * lda + i0 + ip;
        for (std::size_t r = 0; r < h; ++r) panel[p * kMr + r] = src[r];
      }
    }
    for (std::size_t r = h; r < kMr; ++r) {
      for (std::size_t p = 0; p < kc; ++p) panel[p * kMr + r] = 0.0f;
    }
  }
}

// Panels of kNr columns, laid out [panel][p][kNr], zero padded.
AVX512_FN void pack_b(bool trans_b, const float* b, std::size_t ldb,
                      std::size_t p0, std::size_t kc, std::size_t j0,
                      std::size_t nc, float* out) {
  for (std::size_t jp = 0; jp < nc; jp += kNr) {
    const std::size_t w = std::min(kNr, nc - jp);
    float* panel = out + jp * kc;
    if (!trans_b) {
      for (std::size_t p = 0; p < kc; ++p) {
        const float* src = b + (p0 + p) * ldb + j0 + jp;
        float* dst = panel + p * kNr;
        if (w == kNr) {
          _mm512_storeu_ps(dst, _mm512_loadu_ps(src));
          _mm512_storeu_ps(dst + 16, _mm512_loadu_ps(src + 16));
        } else {
          std::size_t j = 0;
          for (; j < w; ++j) dst[j] = src[j];
          for (; j < kNr; ++j) dst[j] = 0.0f;
        }
      }
    } else {
      for (std::size_t j = 0; j < w; ++j) {
        const float* src = b + (j0 + jp + j) * ldb + p0;
        for (std::size_t p = 0; p < kc; ++p) panel[p * kNr + j] = src[p];
      }
      for (std::size_t j = w; j < kNr; ++j) {
        for (std::size_t p = 0; p < kc; ++p) panel[p * kNr + j] = 0.0f;
      }
    }
  }
}

AVX512_FN inline void update_row(float* dst, __m512 acc, __m512 valpha,
                                 float beta) {
  if (beta == 0.0f) {
    _mm512_storeu_ps(dst, _mm512_mul_ps(acc, valpha));
  } else if (beta == 1.0f) {
    _mm512_storeu_ps(dst, _mm512_fmadd_ps(acc, valpha, _mm512_loadu_ps(dst)));
  } else {
    const __m512 old = _mm512_mul_ps(_mm512_loadu_ps(dst), _mm512_set1_ps(beta));
    _mm512_storeu_ps(dst, _mm512_fmadd_ps(acc, valpha, old));
  }
}

AVX512_FN void micro_8x32(std::size_t kc, const float* ap, const float* bp,
                          float* c, std::size_t ldc, float alpha, float beta,
                          std::size_t h, std::size_t w) {
  __m512 acc[kMr][2];
  for (auto& row : acc) row[0] = row[1] = _mm512_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m512 b0 = _mm512_loadu_ps(bp);
    const __m512 b1 = _mm512_loadu_ps(bp + 16);
#pragma GCC unroll 8
    for (std::size_t r = 0; r < kMr; ++r) {
      const __m512 av = _mm512_set1_ps(ap[r]);
      acc[r][0] = _mm512_fmadd_ps(av, b0, acc[r][0]);
      acc[r][1] = _mm512_fmadd_ps(av, b1, acc[r][1]);
    }
    ap += kMr;
    bp += kNr;
  }
  const __m512 valpha = _mm512_set1_ps(alpha);
  if (h == kMr && w == kNr) {
#pragma GCC unroll 8
    for (std::size_t r = 0; r < kMr; ++r) {
      update_row(c + r * ldc, acc[r][0], valpha, beta);
      update_row(c + r * ldc + 16, acc[r][1], valpha, beta);
    }
    return;
  }
  alignas(64) float tile[kMr * kNr];
  for (std::size_t r = 0; r < kMr; ++r) {
    _mm512_store_ps(tile + r * kNr, acc[r][0]);
    _mm512_store_ps(tile + r * kNr + 16, acc[r][1]);
  }
  for (std::size_t r = 0; r < h; ++r) {
    float* row = c + r * ldc;
    for (std::size_t j = 0; j < w; ++j) {
      const float v = alpha * tile[r * kNr + j];
      row[j] = beta == 0.0f ? v : beta * row[j] + v;
    }
  }
}

using GemmFn = decltype(Kernels::gemm);

GemmFn narrow_gemm = nullptr;

AVX512_FN void gemm_avx512(bool trans_a, bool trans_b, std::size_t m,
                           std::size_t n, std::size_t k, float alpha,
                           const float* a, std::size_t lda, const float* b,
                           std::size_t ldb, float beta, float* c,
                           std::size_t ldc) {
  if (n < kMinWidth || k == 0) {
    narrow_gemm(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
    return;
  }
  if (m == 0) return;
  float* apack = pack_buffer_a();
  float* bpack = pack_buffer_b();
  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      pack_b(trans_b, b, ldb, pc, kc, jc, nc, bpack);
      const float beta_eff = pc == 0 ? beta : 1.0f;
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        pack_a(trans_a, a, lda, ic, mc, pc, kc, apack);
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            micro_8x32(kc, apack + ir * kc, bpack + jr * kc,
                       c + (ic + ir) * ldc + jc + jr, ldc, alpha, beta_eff,
                       std::min(kMr, mc - ir), std::min(kNr, nc - jr));
          }
        }
      }
    }
  }
}

}  // namespace

bool cpu_has_avx512() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx512f") && cpu_has_avx2_fma();
  }();
  return supported;
}

const Kernels* avx512_kernels() {
  static const Kernels* table = []() -> const Kernels* {
    const Kernels* base = avx2_kernels();
    if (base == nullptr || !cpu_has_avx512()) return nullptr;
    static Kernels t = *base;
    narrow_gemm = base->gemm;
    t.level = Level::kAvx512;
    t.gemm = gemm_avx512;
    return &t;
  }();
  return table;
}

#else

const Kernels* avx512_kernels() { return nullptr; }
bool cpu_has_avx512() { return false; }

#endif

}  // namespace attnscope::simd

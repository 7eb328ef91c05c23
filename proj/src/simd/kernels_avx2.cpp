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

// AVX2 + FMA variants. Functions carry a target attribute instead of the whole
// translation unit being built with -mavx2, so no inline library code that
// other translation units share is ever emitted with wider instructions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "attnscope/simd/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define ATTNSCOPE_X86_AVX2 1
#include <immintrin.h>
#endif

namespace attnscope::simd {

#if ATTNSCOPE_X86_AVX2

#define AVX2_FN __attribute__((target("avx2,fma")))

namespace {

constexpr std::size_t kMr = 6;
constexpr std::size_t kNr = 16;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 120;
constexpr std::size_t kNc = 1024;

float* pack_buffer_a() {
  thread_local std::vector<float> buf(kMc * kKc);
  return buf.data();
}

float* pack_buffer_b() {
  thread_local std::vector<float> buf(kNc * kKc);
  return buf.data();
}

AVX2_FN inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_hadd_ps(lo, lo);
  lo = _mm_hadd_ps(lo, lo);
  return _mm_cvtss_f32(lo);
}

AVX2_FN inline float hmax(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_max_ps(lo, hi);
  lo = _mm_max_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_max_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

// Cephes-style expf; max relative error ~2 ulp on the clamped range.
AVX2_FN inline __m256 exp256(__m256 x) {
  x = _mm256_min_ps(x, _mm256_set1_ps(88.3762626647949f));
  x = _mm256_max_ps(x, _mm256_set1_ps(-87.3365478515625f));
  __m256 fx = _mm256_fmadd_ps(x, _mm256_set1_ps(1.44269504088896341f),
                              _mm256_set1_ps(0.5f));
  fx = _mm256_floor_ps(fx);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(0.693359375f), x);
  x = _mm256_fnmadd_ps(fx, _mm256_set1_ps(-2.12194440e-4f), x);
  __m256 y = _mm256_set1_ps(1.9875691500e-4f);
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.3981999507e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(8.3334519073e-3f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(4.1665795894e-2f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(1.6666665459e-1f));
  y = _mm256_fmadd_ps(y, x, _mm256_set1_ps(5.0000001201e-1f));
  const __m256 xx = _mm256_mul_ps(x, x);
  y = _mm256_fmadd_ps(y, xx, _mm256_add_ps(x, _mm256_set1_ps(1.0f)));
  __m256i n = _mm256_cvttps_epi32(fx);
  n = _mm256_add_epi32(n, _mm256_set1_epi32(127));
  n = _mm256_slli_epi32(n, 23);
  return _mm256_mul_ps(y, _mm256_castsi256_ps(n));
}

// Panels of kMr rows, laid out [panel][p][kMr], zero padded.
AVX2_FN void pack_a(bool trans_a, const float* a, std::size_t lda,
                    std::size_t i0, std::size_t mc, std::size_t p0,
                    std::size_t kc, float* out) {
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
AVX2_FN void pack_b(bool trans_b, const float* b, std::size_t ldb,
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
          _mm256_storeu_ps(dst, _mm256_loadu_ps(src));
          _mm256_storeu_ps(dst + 8, _mm256_loadu_ps(src + 8));
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

AVX2_FN inline void update_row(float* dst, __m256 acc, __m256 valpha,
                               float beta) {
  if (beta == 0.0f) {
    _mm256_storeu_ps(dst, _mm256_mul_ps(acc, valpha));
  } else if (beta == 1.0f) {
    _mm256_storeu_ps(dst, _mm256_fmadd_ps(acc, valpha, _mm256_loadu_ps(dst)));
  } else {
    const __m256 old = _mm256_mul_ps(_mm256_loadu_ps(dst), _mm256_set1_ps(beta));
    _mm256_storeu_ps(dst, _mm256_fmadd_ps(acc, valpha, old));
  }
}

AVX2_FN void micro_6x16(std::size_t kc, const float* ap, const float* bp,
                        float* c, std::size_t ldc, float alpha, float beta,
                        std::size_t h, std::size_t w) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 av = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
    ap += kMr;
    bp += kNr;
  }
  const __m256 valpha = _mm256_set1_ps(alpha);
  if (h == kMr && w == kNr) {
    update_row(c + 0 * ldc, c00, valpha, beta);
    update_row(c + 0 * ldc + 8, c01, valpha, beta);
    update_row(c + 1 * ldc, c10, valpha, beta);
    update_row(c + 1 * ldc + 8, c11, valpha, beta);
    update_row(c + 2 * ldc, c20, valpha, beta);
    update_row(c + 2 * ldc + 8, c21, valpha, beta);
    update_row(c + 3 * ldc, c30, valpha, beta);
    update_row(c + 3 * ldc + 8, c31, valpha, beta);
    update_row(c + 4 * ldc, c40, valpha, beta);
    update_row(c + 4 * ldc + 8, c41, valpha, beta);
    update_row(c + 5 * ldc, c50, valpha, beta);
    update_row(c + 5 * ldc + 8, c51, valpha, beta);
    return;
  }
  alignas(32) float tile[kMr * kNr];
  _mm256_store_ps(tile + 0 * kNr, c00);
  _mm256_store_ps(tile + 0 * kNr + 8, c01);
  _mm256_store_ps(tile + 1 * kNr, c10);
  _mm256_store_ps(tile + 1 * kNr + 8, c11);
  _mm256_store_ps(tile + 2 * kNr, c20);
  _mm256_store_ps(tile + 2 * kNr + 8, c21);
  _mm256_store_ps(tile + 3 * kNr, c30);
  _mm256_store_ps(tile + 3 * kNr + 8, c31);
  _mm256_store_ps(tile + 4 * kNr, c40);
  _mm256_store_ps(tile + 4 * kNr + 8, c41);
  _mm256_store_ps(tile + 5 * kNr, c50);
  _mm256_store_ps(tile + 5 * kNr + 8, c51);
  for (std::size_t r = 0; r < h; ++r) {
    float* row = c + r * ldc;
    for (std::size_t j = 0; j < w; ++j) {
      const float v = alpha * tile[r * kNr + j];
      row[j] = beta == 0.0f ? v : beta * row[j] + v;
    }
  }
}

AVX2_FN void gemm_avx2(bool trans_a, bool trans_b, std::size_t m,
                       std::size_t n, std::size_t k, float alpha,
                       const float* a, std::size_t lda, const float* b,
                       std::size_t ldb, float beta, float* c,
                       std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        c[i * ldc + j] = beta == 0.0f ? 0.0f : beta * c[i * ldc + j];
      }
    }
    return;
  }
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
            micro_6x16(kc, apack + ir * kc, bpack + jr * kc,
                       c + (ic + ir) * ldc + jc + jr, ldc, alpha, beta_eff,
                       std::min(kMr, mc - ir), std::min(kNr, nc - jr));
          }
        }
      }
    }
  }
}

AVX2_FN float dot_avx2(const float* x, const float* y, std::size_t n) {
  __m256 s0 = _mm256_setzero_ps();
  __m256 s1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
    s1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8),
                         _mm256_loadu_ps(y + i + 8), s1);
  }
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), s0);
  }
  float acc = hsum(_mm256_add_ps(s0, s1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

AVX2_FN void axpy_avx2(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

AVX2_FN void add_avx2(const float* x, const float* y, float* out,
                      std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

AVX2_FN void scale_avx2(const float* x, float alpha, float* out,
                        std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) out[i] = alpha * x[i];
}

AVX2_FN void relu_avx2(const float* x, float* out, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  }
  for (; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

AVX2_FN void softmax_rows_avx2(const float* x, float* out, std::size_t rows,
                               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x + r * cols;
    float* y = out + r * cols;
    std::size_t j = 0;
    float mx = in[0];
    if (cols >= 8) {
      __m256 vmax = _mm256_loadu_ps(in);
      for (j = 8; j + 8 <= cols; j += 8) {
        vmax = _mm256_max_ps(vmax, _mm256_loadu_ps(in + j));
      }
      mx = hmax(vmax);
    }
    for (; j < cols; ++j) mx = std::max(mx, in[j]);

    const __m256 vmx = _mm256_set1_ps(mx);
    __m256 vsum = _mm256_setzero_ps();
    for (j = 0; j + 8 <= cols; j += 8) {
      const __m256 e = exp256(_mm256_sub_ps(_mm256_loadu_ps(in + j), vmx));
      _mm256_storeu_ps(y + j, e);
      vsum = _mm256_add_ps(vsum, e);
    }
    float sum = hsum(vsum);
    if (j < cols) {
      alignas(32) float tail_in[8];
      alignas(32) float tail_out[8];
      const std::size_t rem = cols - j;
      for (std::size_t t = 0; t < 8; ++t) {
        tail_in[t] = t < rem ? in[j + t] - mx : -100.0f;
      }
      _mm256_store_ps(tail_out, exp256(_mm256_load_ps(tail_in)));
      for (std::size_t t = 0; t < rem; ++t) {
        y[j + t] = tail_out[t];
        sum += tail_out[t];
      }
    }
    const __m256 inv = _mm256_set1_ps(1.0f / sum);
    for (j = 0; j + 8 <= cols; j += 8) {
      _mm256_storeu_ps(y + j, _mm256_mul_ps(_mm256_loadu_ps(y + j), inv));
    }
    const float inv_s = 1.0f / sum;
    for (; j < cols; ++j) y[j] *= inv_s;
  }
}

AVX2_FN void layer_norm_rows_avx2(const float* x, const float* gamma,
                                  const float* beta, float eps, float* out,
                                  float* mean, float* rstd, std::size_t rows,
                                  std::size_t cols) {
  const float inv_n = 1.0f / static_cast<float>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x + r * cols;
    float* y = out + r * cols;
    __m256 vs = _mm256_setzero_ps();
    std::size_t j = 0;
    for (; j + 8 <= cols; j += 8) vs = _mm256_add_ps(vs, _mm256_loadu_ps(in + j));
    float s = hsum(vs);
    for (; j < cols; ++j) s += in[j];
    const float mu = s * inv_n;
    const __m256 vmu = _mm256_set1_ps(mu);
    __m256 vv = _mm256_setzero_ps();
    for (j = 0; j + 8 <= cols; j += 8) {
      const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(in + j), vmu);
      vv = _mm256_fmadd_ps(d, d, vv);
    }
    float v = hsum(vv);
    for (; j < cols; ++j) v += (in[j] - mu) * (in[j] - mu);
    const float rs = 1.0f / std::sqrt(v * inv_n + eps);
    const __m256 vrs = _mm256_set1_ps(rs);
    for (j = 0; j + 8 <= cols; j += 8) {
      const __m256 nrm =
          _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(in + j), vmu), vrs);
      _mm256_storeu_ps(y + j, _mm256_fmadd_ps(nrm, _mm256_loadu_ps(gamma + j),
                                              _mm256_loadu_ps(beta + j)));
    }
    for (; j < cols; ++j) y[j] = (in[j] - mu) * rs * gamma[j] + beta[j];
    mean[r] = mu;
    rstd[r] = rs;
  }
}

}  // namespace

const Kernels* avx2_kernels() {
  static const Kernels table{
      Level::kAvx2,      gemm_avx2,  dot_avx2,
      axpy_avx2,         add_avx2,   scale_avx2,
      relu_avx2,         softmax_rows_avx2,
      layer_norm_rows_avx2,
  };
  return cpu_has_avx2_fma() ? &table : nullptr;
}

bool cpu_has_avx2_fma() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return supported;
}

#else

const Kernels* avx2_kernels() { return nullptr; }
bool cpu_has_avx2_fma() { return false; }

#endif

}  // namespace attnscope::simd

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

#include <algorithm>
#include <cmath>

#include "attnscope/simd/kernels.hpp"

namespace attnscope::simd {
namespace {

void gemm_scalar(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
                 std::size_t k, float alpha, const float* a, std::size_t lda,
                 const float* b, std::size_t ldb, float beta, float* c,
                 std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      float& out = c[i * ldc + j];
      out = beta == 0.0f ? alpha * acc : beta * out + alpha * acc;
    }
  }
}

float dot_scalar(const float* x, const float* y, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add_scalar(const float* x, const float* y, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void scale_scalar(const float* x, float alpha, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void relu_scalar(const float* x, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void softmax_rows_scalar(const float* x, float* out, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x + r * cols;
    float* y = out + r * cols;
    const float mx = *std::max_element(in, in + cols);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(in[j] - mx);
      sum += y[j];
    }
    const float inv = static_cast<float>(1.0 / sum);
    for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
  }
}

void layer_norm_rows_scalar(const float* x, const float* gamma,
                            const float* beta, float eps, float* out,
                            float* mean, float* rstd, std::size_t rows,
                            std::size_t cols) {
  const float inv_n = 1.0f / static_cast<float>(cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x + r * cols;
    float* y = out + r * cols;
    float s = 0.0f;
    for (std::size_t j = 0; j < cols; ++j) s += in[j];
    const float mu = s * inv_n;
    float v = 0.0f;
    for (std::size_t j = 0; j < cols; ++j) {
      const float d = in[j] - mu;
      v += d * d;
    }
    const float rs = 1.0f / std::sqrt(v * inv_n + eps);
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = (in[j] - mu) * rs * gamma[j] + beta[j];
    }
    mean[r] = mu;
    rstd[r] = rs;
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels table{
      Level::kScalar,      gemm_scalar,  dot_scalar,
      axpy_scalar,         add_scalar,   scale_scalar,
      relu_scalar,         softmax_rows_scalar,
      layer_norm_rows_scalar,
  };
  return table;
}

}  // namespace attnscope::simd

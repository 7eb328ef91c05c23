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

#include "ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "attnscope/error.hpp"
#include "attnscope/simd/kernels.hpp"

namespace attnscope::ad::detail {
namespace {

const simd::Kernels& kernels() { return simd::active(); }

[[noreturn]] void shape_fail(OpKind kind, const std::string& detail,
                             std::span<const Tensor* const> in) {
  std::string msg = std::string(to_string(kind)) + ": " + detail +
                    " (input shapes:";
  for (const Tensor* t : in) msg += " " + shape_string(t->shape());
  throw ShapeError(msg + ")");
}

void expect_arity(OpKind kind, std::span<const Tensor* const> in,
                  std::size_t n) {
  if (in.size() != n) {
    shape_fail(kind,
               "expected " + std::to_string(n) + " inputs, got " +
                   std::to_string(in.size()),
               in);
  }
}

void expect_rank(OpKind kind, std::span<const Tensor* const> in,
                 std::size_t which, std::size_t rank) {
  if (in[which]->rank() != rank) {
    shape_fail(kind,
               "input " + std::to_string(which) + " must have rank " +
                   std::to_string(rank),
               in);
  }
}

// ------------------------------------------------------------- scratch ----

std::vector<std::vector<float>>& scratch_pool() {
  thread_local std::vector<std::vector<float>> pool;
  return pool;
}

constexpr std::size_t kScratchPoolLimit = 8;

// ---------------------------------------------------------------- conv ----

struct ConvGeometry {
  std::size_t c_in, h, w;
  std::size_t c_out, kh, kw;
  std::size_t h_out, w_out, pad_left;
  std::size_t positions, patch;
};

ConvGeometry conv_geometry(OpKind kind, std::span<const Tensor* const> in) {
  expect_arity(kind, in, 3);
  expect_rank(kind, in, 0, 3);
  expect_rank(kind, in, 1, 4);
  expect_rank(kind, in, 2, 1);
  const Tensor& x = *in[0];
  const Tensor& wt = *in[1];
  ConvGeometry g{};
  g.c_in = x.dim(0);
  g.h = x.dim(1);
  g.w = x.dim(2);
  g.c_out = wt.dim(0);
  g.kh = wt.dim(2);
  g.kw = wt.dim(3);
  if (wt.dim(1) != g.c_in) shape_fail(kind, "kernel input channels differ", in);
  if (in[2]->dim(0) != g.c_out) shape_fail(kind, "bias length differs", in);
  if (g.kh > g.h) shape_fail(kind, "kernel taller than input", in);
  if (kind == OpKind::kConv2dValid) {
    if (g.kw > g.w) shape_fail(kind, "kernel wider than input", in);
    g.w_out = g.w - g.kw + 1;
    g.pad_left = 0;
  } else {
    g.w_out = g.w;
    g.pad_left = (g.kw - 1) / 2;
  }
  g.h_out = g.h - g.kh + 1;
  g.positions = g.h_out * g.w_out;
  g.patch = g.c_in * g.kh * g.kw;
  return g;
}

// Input rows [0, h) of every channel restricted to the kw time steps that
// feed output column ow (zero outside the input): c_in strips of [h, kw].
void gather_strips(const ConvGeometry& g, const float* x, std::size_t ow,
                   float* strips) {
  const long start = static_cast<long>(ow) - static_cast<long>(g.pad_left);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t r = 0; r < g.h; ++r) {
      const float* src = x + (ci * g.h + r) * g.w;
      float* dst = strips + (ci * g.h + r) * g.kw;
      for (std::size_t s = 0; s < g.kw; ++s) {
        const long t = start + static_cast<long>(s);
        dst[s] = (t >= 0 && t < static_cast<long>(g.w)) ? src[t] : 0.0f;
      }
    }
  }
}

// Column matrix [patch, positions]: row (ci, r, s) holds, for every output
// (oh, ow), the input sample x[ci][oh + r][ow + s - pad_left] (zero outside
// the input). Every row segment for one oh is a shifted copy of an input row.
void im2col(const ConvGeometry& g, const float* x, float* col) {
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t r = 0; r < g.kh; ++r) {
      for (std::size_t s = 0; s < g.kw; ++s) {
        float* dst = col + ((ci * g.kh + r) * g.kw + s) * g.positions;
        const long shift = static_cast<long>(s) - static_cast<long>(g.pad_left);
        // Valid ow range: 0 <= ow + shift < w.
        const std::size_t lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
        const long hi_l = std::min<long>(static_cast<long>(g.w_out),
                                         static_cast<long>(g.w) - shift);
        const std::size_t hi = hi_l > static_cast<long>(lo)
                                   ? static_cast<std::size_t>(hi_l) : lo;
        for (std::size_t oh = 0; oh < g.h_out; ++oh) {
          const float* src = x + (ci * g.h + oh + r) * g.w;
          float* row = dst + oh * g.w_out;
          std::fill(row, row + lo, 0.0f);
          std::copy(src + static_cast<long>(lo) + shift,
                    src + static_cast<long>(hi) + shift, row + lo);
          std::fill(row + hi, row + g.w_out, 0.0f);
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const float* col, float* dx) {
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    for (std::size_t r = 0; r < g.kh; ++r) {
      for (std::size_t s = 0; s < g.kw; ++s) {
        const float* src = col + ((ci * g.kh + r) * g.kw + s) * g.positions;
        const long shift = static_cast<long>(s) - static_cast<long>(g.pad_left);
        for (std::size_t oh = 0; oh < g.h_out; ++oh) {
          float* dst = dx + (ci * g.h + oh + r) * g.w;
          for (std::size_t ow = 0; ow < g.w_out; ++ow) {
            const long t = static_cast<long>(ow) + shift;
            if (t >= 0 && t < static_cast<long>(g.w)) dst[t] += src[oh * g.w_out + ow];
          }
        }
      }
    }
  }
}

Tensor conv_forward(OpKind kind, std::span<const Tensor* const> in,
                    OpCache& cache) {
  const ConvGeometry g = conv_geometry(kind, in);
  cache.columns.resize(g.positions * g.patch);
  im2col(g, in[0]->raw(), cache.columns.data());
  Tensor out({g.c_out, g.h_out, g.w_out});
  kernels().gemm(false, false, g.c_out, g.positions, g.patch, 1.0f,
                 in[1]->raw(), g.patch, cache.columns.data(), g.positions, 0.0f,
                 out.raw(), g.positions);
  const float* bias = in[2]->raw();
  for (std::size_t c = 0; c < g.c_out; ++c) {
    float* row = out.raw() + c * g.positions;
    for (std::size_t p = 0; p < g.positions; ++p) row[p] += bias[c];
  }
  return out;
}

void conv_backward(OpKind kind, std::span<const Tensor* const> in,
                   const Tensor& dout, const OpCache& cache,
                   std::span<Tensor* const> din) {
  const ConvGeometry g = conv_geometry(kind, in);
  const float* dy = dout.raw();
  if (din[2]) {
    float* db = din[2]->raw();
    for (std::size_t c = 0; c < g.c_out; ++c) {
      float s = 0.0f;
      for (std::size_t p = 0; p < g.positions; ++p) s += dy[c * g.positions + p];
      db[c] += s;
    }
  }
  if (din[1]) {
    float* dw = din[1]->raw();
    const std::size_t total = g.c_out * g.positions;
    const std::size_t nonzero = static_cast<std::size_t>(
        std::count_if(dy, dy + total, [](float v) { return v != 0.0f; }));
    if (nonzero * 4 <= total) {
      // Gradients behind a max-pool are mostly zero; skip them. Receptive
      // fields are gathered from the (small, cache-resident) input one output
      // column at a time instead of streaming the whole column matrix.
      const std::size_t block = g.kh * g.kw;
      const float* x = in[0]->raw();
      std::vector<float> strip(g.c_in * g.h * g.kw);
      for (std::size_t ow = 0; ow < g.w_out; ++ow) {
        bool gathered = false;
        for (std::size_t c = 0; c < g.c_out; ++c) {
          for (std::size_t oh = 0; oh < g.h_out; ++oh) {
            const float v = dy[c * g.positions + oh * g.w_out + ow];
            if (v == 0.0f) continue;
            if (!gathered) {
              gather_strips(g, x, ow, strip.data());
              gathered = true;
            }
            for (std::size_t ci = 0; ci < g.c_in; ++ci) {
              kernels().axpy(block, v, strip.data() + ci * g.h * g.kw + oh * g.kw,
                             dw + c * g.patch + ci * block);
            }
          }
        }
      }
    } else {
      kernels().gemm(false, true, g.c_out, g.patch, g.positions, 1.0f, dy,
                     g.positions, cache.columns.data(), g.positions, 1.0f, dw,
                     g.patch);
    }
  }
  if (din[0]) {
    std::vector<float> dcol(g.patch * g.positions);
    kernels().gemm(true, false, g.patch, g.positions, g.c_out, 1.0f,
                   in[1]->raw(), g.patch, dy, g.positions, 0.0f, dcol.data(),
                   g.positions);
    col2im_add(g, dcol.data(), din[0]->raw());
  }
}

// ------------------------------------------------------------- helpers ----

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

float sigmoid_scalar(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

}  // namespace

ScratchBuffer::~ScratchBuffer() { release(); }

ScratchBuffer& ScratchBuffer::operator=(ScratchBuffer&& other) noexcept {
  if (this != &other) {
    release();
    storage_ = std::move(other.storage_);
  }
  return *this;
}

void ScratchBuffer::resize(std::size_t n) {
  if (storage_.capacity() < n) {
    auto& pool = scratch_pool();
    // Smallest pooled buffer that already has room.
    auto best = pool.end();
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (it->capacity() >= n &&
          (best == pool.end() || it->capacity() < best->capacity())) {
        best = it;
      }
    }
    if (best != pool.end()) {
      release();
      storage_ = std::move(*best);
      pool.erase(best);
    }
  }
  storage_.resize(n);
}

void ScratchBuffer::release() {
  if (storage_.capacity() == 0) return;
  auto& pool = scratch_pool();
  if (pool.size() < kScratchPoolLimit) pool.push_back(std::move(storage_));
  storage_ = {};
}

Tensor evaluate(OpKind kind, std::span<const Tensor* const> in,
                const OpAttrs& attrs, OpCache& cache) {
  switch (kind) {
    case OpKind::kLeaf:
      throw ContractError("leaf nodes are not evaluated");

    case OpKind::kMatmul: {
      expect_arity(kind, in, 2);
      expect_rank(kind, in, 0, 2);
      expect_rank(kind, in, 1, 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      const std::size_t m = a.dim(0), k = a.dim(1);
      const std::size_t bk = attrs.transpose_b ? b.dim(1) : b.dim(0);
      const std::size_t n = attrs.transpose_b ? b.dim(0) : b.dim(1);
      if (bk != k) shape_fail(kind, "inner dimensions differ", in);
      Tensor out({m, n});
      kernels().gemm(false, attrs.transpose_b, m, n, k, 1.0f, a.raw(), k,
                     b.raw(), b.dim(1), 0.0f, out.raw(), n);
      return out;
    }

    case OpKind::kAdd: {
      expect_arity(kind, in, 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      Tensor out(a.shape());
      if (a.shape() == b.shape()) {
        kernels().add(a.raw(), b.raw(), out.raw(), a.size());
      } else if (b.rank() == 1 && b.dim(0) == a.shape().back()) {
        const std::size_t n = b.dim(0);
        for (std::size_t r = 0; r < a.size() / n; ++r) {
          kernels().add(a.raw() + r * n, b.raw(), out.raw() + r * n, n);
        }
      } else {
        shape_fail(kind, "shapes must match or b must be a row vector", in);
      }
      return out;
    }

    case OpKind::kRelu: {
      expect_arity(kind, in, 1);
      Tensor out(in[0]->shape());
      kernels().relu(in[0]->raw(), out.raw(), out.size());
      return out;
    }

    case OpKind::kSigmoid: {
      expect_arity(kind, in, 1);
      Tensor out(in[0]->shape());
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sigmoid_scalar((*in[0])[i]);
      }
      return out;
    }

    case OpKind::kSoftmaxLastDim: {
      expect_arity(kind, in, 1);
      const std::size_t cols = in[0]->shape().back();
      Tensor out(in[0]->shape());
      kernels().softmax_rows(in[0]->raw(), out.raw(), out.size() / cols, cols);
      return out;
    }

    case OpKind::kLayerNormLastDim: {
      expect_arity(kind, in, 3);
      const Tensor& x = *in[0];
      const std::size_t cols = x.shape().back();
      if (in[1]->shape() != Shape{cols} || in[2]->shape() != Shape{cols}) {
        shape_fail(kind, "gamma and beta must match the last dimension", in);
      }
      const std::size_t rows = x.size() / cols;
      cache.mean.resize(rows);
      cache.rstd.resize(rows);
      Tensor out(x.shape());
      kernels().layer_norm_rows(x.raw(), in[1]->raw(), in[2]->raw(), attrs.eps,
                                out.raw(), cache.mean.data(), cache.rstd.data(),
                                rows, cols);
      return out;
    }

    case OpKind::kConv2dValid:
    case OpKind::kConv2dSameTime:
      return conv_forward(kind, in, cache);

    case OpKind::kMaxPool2d: {
      expect_arity(kind, in, 1);
      expect_rank(kind, in, 0, 3);
      const Tensor& x = *in[0];
      const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
      const std::size_t ph = attrs.pool_h, pw = attrs.pool_w;
      if (ph == 0 || pw == 0 || ph > h || pw > w) {
        shape_fail(kind,
                   "pool window " + std::to_string(ph) + "x" +
                       std::to_string(pw) + " does not fit",
                   in);
      }
      const std::size_t oh = h / ph, ow = w / pw;
      Tensor out({c, oh, ow});
      cache.argmax.resize(out.size());
      std::size_t o = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < ow; ++j, ++o) {
            std::size_t best = (ch * h + i * ph) * w + j * pw;
            for (std::size_t r = 0; r < ph; ++r) {
              for (std::size_t s = 0; s < pw; ++s) {
                const std::size_t idx = (ch * h + i * ph + r) * w + j * pw + s;
                if (x[idx] > x[best]) best = idx;
              }
            }
            out[o] = x[best];
            cache.argmax[o] = static_cast<std::uint32_t>(best);
          }
        }
      }
      return out;
    }

    case OpKind::kMeanAxis: {
      expect_arity(kind, in, 1);
      const Tensor& x = *in[0];
      if (attrs.axis >= x.rank()) shape_fail(kind, "axis out of range", in);
      const AxisSplit s = split_at(x.shape(), attrs.axis);
      Shape shape = x.shape();
      shape[attrs.axis] = 1;
      Tensor out(shape);
      const float inv = 1.0f / static_cast<float>(s.extent);
      for (std::size_t o = 0; o < s.outer; ++o) {
        float* dst = out.raw() + o * s.inner;
        for (std::size_t k = 0; k < s.extent; ++k) {
          const float* src = x.raw() + (o * s.extent + k) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
        }
        for (std::size_t i = 0; i < s.inner; ++i) dst[i] *= inv;
      }
      return out;
    }

    case OpKind::kConcatAxis: {
      if (in.empty()) throw ShapeError("concat_axis: no inputs");
      const Shape& first = in[0]->shape();
      if (attrs.axis >= first.size()) shape_fail(kind, "axis out of range", in);
      Shape shape = first;
      shape[attrs.axis] = 0;
      for (const Tensor* t : in) {
        Shape probe = t->shape();
        if (probe.size() != first.size()) shape_fail(kind, "ranks differ", in);
        shape[attrs.axis] += probe[attrs.axis];
        probe[attrs.axis] = first[attrs.axis];
        if (probe != first) shape_fail(kind, "non-axis extents differ", in);
      }
      Tensor out(shape);
      const AxisSplit s = split_at(shape, attrs.axis);
      float* dst = out.raw();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (const Tensor* t : in) {
          const std::size_t chunk = t->dim(attrs.axis) * s.inner;
          std::copy_n(t->raw() + o * chunk, chunk, dst);
          dst += chunk;
        }
      }
      return out;
    }

    case OpKind::kScale: {
      expect_arity(kind, in, 1);
      Tensor out(in[0]->shape());
      kernels().scale(in[0]->raw(), attrs.factor, out.raw(), out.size());
      return out;
    }

    case OpKind::kReshape: {
      expect_arity(kind, in, 1);
      if (shape_size(attrs.shape) != in[0]->size()) {
        shape_fail(kind, "target " + shape_string(attrs.shape) +
                             " has a different element count", in);
      }
      return in[0]->reshaped(attrs.shape);
    }

    case OpKind::kTranspose2d: {
      expect_arity(kind, in, 1);
      expect_rank(kind, in, 0, 2);
      const Tensor& x = *in[0];
      const std::size_t r = x.dim(0), c = x.dim(1);
      Tensor out({c, r});
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
      }
      return out;
    }

    case OpKind::kBce: {
      expect_arity(kind, in, 2);
      if (in[0]->shape() != in[1]->shape()) {
        shape_fail(kind, "probabilities and labels differ", in);
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < in[0]->size(); ++i) {
        const double p = std::clamp((*in[0])[i], kBceClampLow, kBceClampHigh);
        const double y = (*in[1])[i];
        sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      }
      return Tensor({1}, {static_cast<float>(sum / in[0]->size())});
    }
  }
  throw ContractError("unknown op kind");
}

void differentiate(OpKind kind, std::span<const Tensor* const> in,
                   const Tensor& out, const Tensor& dout, const OpAttrs& attrs,
                   const OpCache& cache, std::span<Tensor* const> din) {
  const float* dy = dout.raw();
  switch (kind) {
    case OpKind::kLeaf:
      return;

    case OpKind::kMatmul: {
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      const std::size_t m = a.dim(0), k = a.dim(1), n = out.dim(1);
      if (din[0]) {
        // dA[m,k] = dC[m,n] * op(B)^T
        kernels().gemm(false, !attrs.transpose_b, m, k, n, 1.0f, dy, n,
                       b.raw(), b.dim(1), 1.0f, din[0]->raw(), k);
      }
      if (din[1]) {
        if (attrs.transpose_b) {
          // dB[n,k] = dC^T * A
          kernels().gemm(true, false, n, k, m, 1.0f, dy, n, a.raw(), k, 1.0f,
                         din[1]->raw(), k);
        } else {
          // dB[k,n] = A^T * dC
          kernels().gemm(true, false, k, n, m, 1.0f, a.raw(), k, dy, n, 1.0f,
                         din[1]->raw(), n);
        }
      }
      return;
    }

    case OpKind::kAdd: {
      if (din[0]) kernels().axpy(dout.size(), 1.0f, dy, din[0]->raw());
      if (din[1]) {
        if (in[1]->shape() == in[0]->shape()) {
          kernels().axpy(dout.size(), 1.0f, dy, din[1]->raw());
        } else {
          const std::size_t n = in[1]->dim(0);
          for (std::size_t r = 0; r < dout.size() / n; ++r) {
            kernels().axpy(n, 1.0f, dy + r * n, din[1]->raw());
          }
        }
      }
      return;
    }

    case OpKind::kRelu: {
      if (!din[0]) return;
      float* dx = din[0]->raw();
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] > 0.0f) dx[i] += dy[i];
      }
      return;
    }

    case OpKind::kSigmoid: {
      if (!din[0]) return;
      float* dx = din[0]->raw();
      for (std::size_t i = 0; i < out.size(); ++i) {
        dx[i] += dy[i] * out[i] * (1.0f - out[i]);
      }
      return;
    }

    case OpKind::kSoftmaxLastDim: {
      if (!din[0]) return;
      const std::size_t cols = out.shape().back();
      float* dx = din[0]->raw();
      for (std::size_t r = 0; r < out.size() / cols; ++r) {
        const float* y = out.raw() + r * cols;
        const float* g = dy + r * cols;
        const float s = kernels().dot(g, y, cols);
        float* d = dx + r * cols;
        for (std::size_t j = 0; j < cols; ++j) d[j] += y[j] * (g[j] - s);
      }
      return;
    }

    case OpKind::kLayerNormLastDim: {
      const Tensor& x = *in[0];
      const float* gamma = in[1]->raw();
      const std::size_t cols = x.shape().back();
      const std::size_t rows = x.size() / cols;
      const float inv_n = 1.0f / static_cast<float>(cols);
      std::vector<float> xhat(cols);
      std::vector<float> g(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        const float* xr = x.raw() + r * cols;
        const float* dyr = dy + r * cols;
        const float mu = cache.mean[r];
        const float rs = cache.rstd[r];
        float mean_g = 0.0f, mean_gx = 0.0f;
        for (std::size_t j = 0; j < cols; ++j) {
          xhat[j] = (xr[j] - mu) * rs;
          g[j] = dyr[j] * gamma[j];
          mean_g += g[j];
          mean_gx += g[j] * xhat[j];
        }
        mean_g *= inv_n;
        mean_gx *= inv_n;
        if (din[0]) {
          float* dx = din[0]->raw() + r * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            dx[j] += rs * (g[j] - mean_g - xhat[j] * mean_gx);
          }
        }
        if (din[1]) {
          float* dg = din[1]->raw();
          for (std::size_t j = 0; j < cols; ++j) dg[j] += dyr[j] * xhat[j];
        }
        if (din[2]) kernels().axpy(cols, 1.0f, dyr, din[2]->raw());
      }
      return;
    }

    case OpKind::kConv2dValid:
    case OpKind::kConv2dSameTime:
      conv_backward(kind, in, dout, cache, din);
      return;

    case OpKind::kMaxPool2d: {
      if (!din[0]) return;
      float* dx = din[0]->raw();
      for (std::size_t o = 0; o < out.size(); ++o) dx[cache.argmax[o]] += dy[o];
      return;
    }

    case OpKind::kMeanAxis: {
      if (!din[0]) return;
      const AxisSplit s = split_at(in[0]->shape(), attrs.axis);
      const float inv = 1.0f / static_cast<float>(s.extent);
      float* dx = din[0]->raw();
      for (std::size_t o = 0; o < s.outer; ++o) {
        const float* g = dy + o * s.inner;
        for (std::size_t k = 0; k < s.extent; ++k) {
          float* d = dx + (o * s.extent + k) * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) d[i] += g[i] * inv;
        }
      }
      return;
    }

    case OpKind::kConcatAxis: {
      const AxisSplit s = split_at(out.shape(), attrs.axis);
      const float* src = dy;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t t = 0; t < in.size(); ++t) {
          const std::size_t chunk = in[t]->dim(attrs.axis) * s.inner;
          if (din[t]) kernels().axpy(chunk, 1.0f, src, din[t]->raw() + o * chunk);
          src += chunk;
        }
      }
      return;
    }

    case OpKind::kScale:
      if (din[0]) kernels().axpy(dout.size(), attrs.factor, dy, din[0]->raw());
      return;

    case OpKind::kReshape:
      if (din[0]) kernels().axpy(dout.size(), 1.0f, dy, din[0]->raw());
      return;

    case OpKind::kTranspose2d: {
      if (!din[0]) return;
      const std::size_t r = in[0]->dim(0), c = in[0]->dim(1);
      float* dx = din[0]->raw();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += dy[j * r + i];
      }
      return;
    }

    case OpKind::kBce: {
      if (!din[0]) return;
      const Tensor& p = *in[0];
      const Tensor& y = *in[1];
      const float scale = dy[0] / static_cast<float>(p.size());
      float* dp = din[0]->raw();
      for (std::size_t i = 0; i < p.size(); ++i) {
        // Zero slope where the clamp is active.
        if (p[i] < kBceClampLow || p[i] > kBceClampHigh) continue;
        dp[i] += scale * (-y[i] / p[i] + (1.0f - y[i]) / (1.0f - p[i]));
      }
      return;
    }
  }
}

}  // namespace attnscope::ad::detail

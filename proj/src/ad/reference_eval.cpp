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

#include "reference_eval.hpp"

#include <algorithm>
#include <cmath>

#include "attnscope/error.hpp"

namespace attnscope::ad::detail {
namespace {

struct DTensor {
  Shape shape;
  std::vector<double> data;

  explicit DTensor(Shape s = {}) : shape(std::move(s)), data(shape_size(shape), 0.0) {}
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
};

DTensor from_float(const Tensor& t) {
  DTensor d(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = t[i];
  return d;
}

struct Split3 {
  std::size_t outer = 1, extent = 1, inner = 1;
};

Split3 split_at(const Shape& shape, std::size_t axis) {
  Split3 s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

DTensor conv(bool same_time, const DTensor& x, const DTensor& w, const DTensor& b) {
  const std::size_t c_in = x.dim(0), h = x.dim(1), wd = x.dim(2);
  const std::size_t c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t h_out = h - kh + 1;
  const std::size_t w_out = same_time ? wd : wd - kw + 1;
  const long pad = same_time ? static_cast<long>((kw - 1) / 2) : 0;
  DTensor out({c_out, h_out, w_out});
  for (std::size_t co = 0; co < c_out; ++co) {
    for (std::size_t oh = 0; oh < h_out; ++oh) {
      for (std::size_t ow = 0; ow < w_out; ++ow) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < c_in; ++ci) {
          for (std::size_t r = 0; r < kh; ++r) {
            for (std::size_t s = 0; s < kw; ++s) {
              const long t = static_cast<long>(ow + s) - pad;
              if (t < 0 || t >= static_cast<long>(wd)) continue;
              acc += w[((co * c_in + ci) * kh + r) * kw + s] *
                     x[(ci * h + oh + r) * wd + static_cast<std::size_t>(t)];
            }
          }
        }
        out[(co * h_out + oh) * w_out + ow] = acc;
      }
    }
  }
  return out;
}

DTensor eval_op(OpKind kind, const std::vector<const DTensor*>& in,
                const OpAttrs& attrs) {
  switch (kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatmul: {
      const DTensor& a = *in[0];
      const DTensor& b = *in[1];
      const std::size_t m = a.dim(0), k = a.dim(1);
      const std::size_t n = attrs.transpose_b ? b.dim(0) : b.dim(1);
      DTensor out({m, n});
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t p = 0; p < k; ++p) {
            acc += a[i * k + p] * (attrs.transpose_b ? b[j * k + p] : b[p * n + j]);
          }
          out[i * n + j] = acc;
        }
      }
      return out;
    }
    case OpKind::kAdd: {
      DTensor out = *in[0];
      const DTensor& b = *in[1];
      for (std::size_t i = 0; i < out.data.size(); ++i) {
        out[i] += b[i % b.data.size()];
      }
      return out;
    }
    case OpKind::kRelu: {
      DTensor out = *in[0];
      for (double& v : out.data) v = std::max(v, 0.0);
      return out;
    }
    case OpKind::kSigmoid: {
      DTensor out = *in[0];
      for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
      return out;
    }
    case OpKind::kSoftmaxLastDim: {
      DTensor out = *in[0];
      const std::size_t cols = out.shape.back();
      for (std::size_t r = 0; r < out.data.size() / cols; ++r) {
        double* row = out.data.data() + r * cols;
        const double mx = *std::max_element(row, row + cols);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) sum += row[j] = std::exp(row[j] - mx);
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
      }
      return out;
    }
    case OpKind::kLayerNormLastDim: {
      DTensor out = *in[0];
      const DTensor& gamma = *in[1];
      const DTensor& beta = *in[2];
      const std::size_t cols = out.shape.back();
      for (std::size_t r = 0; r < out.data.size() / cols; ++r) {
        double* row = out.data.data() + r * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += row[j];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(cols);
        const double rs = 1.0 / std::sqrt(var + static_cast<double>(attrs.eps));
        for (std::size_t j = 0; j < cols; ++j) {
          row[j] = (row[j] - mu) * rs * gamma[j] + beta[j];
        }
      }
      return out;
    }
    case OpKind::kConv2dValid:
    case OpKind::kConv2dSameTime:
      return conv(kind == OpKind::kConv2dSameTime, *in[0], *in[1], *in[2]);
    case OpKind::kMaxPool2d: {
      const DTensor& x = *in[0];
      const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
      const std::size_t ph = attrs.pool_h, pw = attrs.pool_w;
      DTensor out({c, h / ph, w / pw});
      std::size_t o = 0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t i = 0; i < h / ph; ++i) {
          for (std::size_t j = 0; j < w / pw; ++j, ++o) {
            double best = -INFINITY;
            for (std::size_t r = 0; r < ph; ++r) {
              for (std::size_t s = 0; s < pw; ++s) {
                best = std::max(best, x[(ch * h + i * ph + r) * w + j * pw + s]);
              }
            }
            out[o] = best;
          }
        }
      }
      return out;
    }
    case OpKind::kMeanAxis: {
      const DTensor& x = *in[0];
      const Split3 s = split_at(x.shape, attrs.axis);
      Shape shape = x.shape;
      shape[attrs.axis] = 1;
      DTensor out(shape);
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t k = 0; k < s.extent; ++k) {
          for (std::size_t i = 0; i < s.inner; ++i) {
            out[o * s.inner + i] += x[(o * s.extent + k) * s.inner + i];
          }
        }
      }
      for (double& v : out.data) v /= static_cast<double>(s.extent);
      return out;
    }
    case OpKind::kConcatAxis: {
      Shape shape = in[0]->shape;
      shape[attrs.axis] = 0;
      for (const DTensor* t : in) shape[attrs.axis] += t->dim(attrs.axis);
      DTensor out(shape);
      const Split3 s = split_at(shape, attrs.axis);
      std::size_t dst = 0;
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (const DTensor* t : in) {
          const std::size_t chunk = t->dim(attrs.axis) * s.inner;
          std::copy_n(t->data.begin() + static_cast<long>(o * chunk), chunk,
                      out.data.begin() + static_cast<long>(dst));
          dst += chunk;
        }
      }
      return out;
    }
    case OpKind::kScale: {
      DTensor out = *in[0];
      for (double& v : out.data) v *= static_cast<double>(attrs.factor);
      return out;
    }
    case OpKind::kReshape: {
      DTensor out = *in[0];
      out.shape = attrs.shape;
      return out;
    }
    case OpKind::kTranspose2d: {
      const DTensor& x = *in[0];
      const std::size_t r = x.dim(0), c = x.dim(1);
      DTensor out({c, r});
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
      }
      return out;
    }
    case OpKind::kBce: {
      const DTensor& p = *in[0];
      const DTensor& y = *in[1];
      double sum = 0.0;
      for (std::size_t i = 0; i < p.data.size(); ++i) {
        const double q = std::clamp(p[i], static_cast<double>(kBceClampLow),
                                    static_cast<double>(kBceClampHigh));
        sum -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
      }
      DTensor out({1});
      out[0] = sum / static_cast<double>(p.data.size());
      return out;
    }
  }
  throw ContractError("reference evaluation: unexpected op kind");
}

}  // namespace

double reference_scalar(const Graph& graph, NodeId output,
                        const LeafOverride* leaf_override) {
  const std::size_t n = static_cast<std::size_t>(output.index()) + 1;
  std::vector<DTensor> values;
  values.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const NodeId id(i);
    if (graph.kind(id) == OpKind::kLeaf) {
      values.push_back(from_float(graph.value(id)));
      if (leaf_override != nullptr &&
          std::find(leaf_override->leaves.begin(), leaf_override->leaves.end(),
                    id) != leaf_override->leaves.end()) {
        values.back()[leaf_override->coord] = leaf_override->value;
      }
      continue;
    }
    std::vector<const DTensor*> in;
    for (NodeId p : graph.inputs(id)) in.push_back(&values[p.index()]);
    values.push_back(eval_op(graph.kind(id), in, graph.attrs(id)));
  }
  const DTensor& out = values.back();
  if (out.data.size() != 1) {
    throw ShapeError("reference evaluation: output has " +
                     std::to_string(out.data.size()) + " elements, expected 1");
  }
  return out[0];
}

}  // namespace attnscope::ad::detail

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

#include "attnscope/ad/graph.hpp"

#include <algorithm>
#include <string>

#include "attnscope/error.hpp"
#include "attnscope/util/memory.hpp"
#include "attnscope/simd/kernels.hpp"
#include "ops.hpp"

namespace attnscope::ad {

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kSoftmaxLastDim: return "softmax_lastdim";
    case OpKind::kLayerNormLastDim: return "layer_norm_lastdim";
    case OpKind::kConv2dValid: return "conv2d_valid";
    case OpKind::kConv2dSameTime: return "conv2d_same_time";
    case OpKind::kMaxPool2d: return "maxpool2d";
    case OpKind::kMeanAxis: return "mean_axis";
    case OpKind::kConcatAxis: return "concat_axis";
    case OpKind::kScale: return "scale";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTranspose2d: return "transpose2d";
    case OpKind::kBce: return "bce";
  }
  return "unknown";
}

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs) {
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const Tensor& t : inputs) ptrs.push_back(&t);
  detail::OpCache cache;
  return detail::evaluate(kind, ptrs, attrs, cache);
}

struct Graph::Node {
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> inputs;
  OpAttrs attrs;
  Tensor value;
  detail::OpCache cache;
  bool requires_grad = false;
  std::string name;
};

Graph::Graph() { util::retain_freed_memory(); }
Graph::~Graph() = default;
Graph::Graph(Graph&&) noexcept = default;
Graph& Graph::operator=(Graph&&) noexcept = default;

NodeId Graph::parameter(std::string name, Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  node.name = std::move(name);
  nodes_.push_back(std::move(node));
  return NodeId(static_cast<std::uint32_t>(nodes_.size() - 1));
}

NodeId Graph::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return NodeId(static_cast<std::uint32_t>(nodes_.size() - 1));
}

NodeId Graph::apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs) {
  if (kind == OpKind::kLeaf) {
    throw ContractError("use parameter() or constant() to create leaves");
  }
  std::vector<const Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  bool needs_grad = false;
  for (NodeId id : inputs) {
    if (id.index() >= nodes_.size()) {
      throw ContractError("graph input refers to a node that does not exist");
    }
    ptrs.push_back(&nodes_[id.index()].value);
    needs_grad = needs_grad || nodes_[id.index()].requires_grad;
  }
  Node node;
  node.kind = kind;
  node.attrs = std::move(attrs);
  node.value = detail::evaluate(kind, ptrs, node.attrs, node.cache);
  node.inputs = std::move(inputs);
  node.requires_grad = needs_grad;
  nodes_.push_back(std::move(node));
  return NodeId(static_cast<std::uint32_t>(nodes_.size() - 1));
}

NodeId Graph::matmul(NodeId a, NodeId b, bool transpose_b) {
  OpAttrs attrs;
  attrs.transpose_b = transpose_b;
  return apply(OpKind::kMatmul, {a, b}, attrs);
}
NodeId Graph::add(NodeId a, NodeId b) { return apply(OpKind::kAdd, {a, b}); }
NodeId Graph::relu(NodeId x) { return apply(OpKind::kRelu, {x}); }
NodeId Graph::sigmoid(NodeId x) { return apply(OpKind::kSigmoid, {x}); }
NodeId Graph::softmax_lastdim(NodeId x) {
  return apply(OpKind::kSoftmaxLastDim, {x});
}
NodeId Graph::layer_norm_lastdim(NodeId x, NodeId gamma, NodeId beta) {
  return apply(OpKind::kLayerNormLastDim, {x, gamma, beta});
}
NodeId Graph::conv2d_valid(NodeId x, NodeId weight, NodeId bias) {
  return apply(OpKind::kConv2dValid, {x, weight, bias});
}
NodeId Graph::conv2d_same_time(NodeId x, NodeId weight, NodeId bias) {
  return apply(OpKind::kConv2dSameTime, {x, weight, bias});
}
NodeId Graph::maxpool2d(NodeId x, std::size_t pool_h, std::size_t pool_w) {
  OpAttrs attrs;
  attrs.pool_h = pool_h;
  attrs.pool_w = pool_w;
  return apply(OpKind::kMaxPool2d, {x}, attrs);
}
NodeId Graph::mean_axis(NodeId x, std::size_t axis) {
  OpAttrs attrs;
  attrs.axis = axis;
  return apply(OpKind::kMeanAxis, {x}, attrs);
}
NodeId Graph::concat_axis(std::vector<NodeId> parts, std::size_t axis) {
  OpAttrs attrs;
  attrs.axis = axis;
  return apply(OpKind::kConcatAxis, std::move(parts), attrs);
}
NodeId Graph::scale(NodeId x, float factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return apply(OpKind::kScale, {x}, attrs);
}
NodeId Graph::reshape(NodeId x, Shape shape) {
  OpAttrs attrs;
  attrs.shape = std::move(shape);
  return apply(OpKind::kReshape, {x}, attrs);
}
NodeId Graph::transpose2d(NodeId x) { return apply(OpKind::kTranspose2d, {x}); }
NodeId Graph::bce(NodeId probabilities, NodeId labels) {
  return apply(OpKind::kBce, {probabilities, labels});
}

const Tensor& Graph::value(NodeId id) const { return nodes_.at(id.index()).value; }
OpKind Graph::kind(NodeId id) const { return nodes_.at(id.index()).kind; }
bool Graph::requires_grad(NodeId id) const {
  return nodes_.at(id.index()).requires_grad;
}
const std::string& Graph::name(NodeId id) const {
  return nodes_.at(id.index()).name;
}
const OpAttrs& Graph::attrs(NodeId id) const {
  return nodes_.at(id.index()).attrs;
}
std::span<const NodeId> Graph::inputs(NodeId id) const {
  return nodes_.at(id.index()).inputs;
}
std::size_t Graph::size() const { return nodes_.size(); }

std::vector<NodeId> Graph::parameter_ids() const {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == OpKind::kLeaf && nodes_[i].requires_grad) {
      ids.emplace_back(static_cast<std::uint32_t>(i));
    }
  }
  return ids;
}

Tensor& Graph::mutable_leaf(NodeId id) {
  Node& node = nodes_.at(id.index());
  if (node.kind != OpKind::kLeaf) {
    throw ContractError("only leaf values may be replaced");
  }
  return node.value;
}

void Graph::replay() {
  std::vector<const Tensor*> ptrs;
  for (Node& node : nodes_) {
    if (node.kind == OpKind::kLeaf) continue;
    ptrs.clear();
    for (NodeId id : node.inputs) ptrs.push_back(&nodes_[id.index()].value);
    node.value = detail::evaluate(node.kind, ptrs, node.attrs, node.cache);
  }
}

void Graph::truncate(std::size_t mark) {
  if (mark > nodes_.size()) throw ContractError("truncate mark beyond graph end");
  nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(mark), nodes_.end());
}

class BackwardPass {
 public:
  static void run(const Graph& graph, NodeId loss, float weight,
                  Gradients& into) {
    const auto& nodes = graph.nodes_;
    if (loss.index() >= nodes.size()) {
      throw ContractError("loss node does not exist");
    }
    if (nodes[loss.index()].value.size() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " +
                          shape_string(nodes[loss.index()].value.shape()));
    }
    std::vector<Tensor> grads(loss.index() + 1);
    grads[loss.index()] = Tensor(nodes[loss.index()].value.shape(), 1.0f);

    std::vector<const Tensor*> in_ptrs;
    std::vector<Tensor*> din_ptrs;
    for (std::size_t i = loss.index() + 1; i-- > 0;) {
      const Graph::Node& node = nodes[i];
      if (node.kind == OpKind::kLeaf || grads[i].empty()) continue;
      in_ptrs.clear();
      din_ptrs.clear();
      for (NodeId id : node.inputs) {
        const Graph::Node& src = nodes[id.index()];
        in_ptrs.push_back(&src.value);
        if (src.requires_grad) {
          Tensor& g = grads[id.index()];
          if (g.empty()) g = Tensor(src.value.shape());
          din_ptrs.push_back(&g);
        } else {
          din_ptrs.push_back(nullptr);
        }
      }
      detail::differentiate(node.kind, in_ptrs, node.value, grads[i],
                            node.attrs, node.cache, din_ptrs);
      if (i != loss.index()) grads[i] = Tensor();
    }

    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Graph::Node& node = nodes[i];
      if (node.kind != OpKind::kLeaf || !node.requires_grad) continue;
      auto it = into.find(node.name);
      if (it == into.end()) {
        it = into.emplace(node.name, Tensor(node.value.shape())).first;
      } else if (it->second.shape() != node.value.shape()) {
        throw ContractError("parameter '" + node.name +
                            "' appears with two different shapes");
      }
      if (i < grads.size() && !grads[i].empty()) {
        simd::active().axpy(grads[i].size(), weight, grads[i].raw(),
                            it->second.raw());
      }
    }
  }
};

Gradients backward(const Graph& graph, NodeId loss) {
  Gradients out;
  BackwardPass::run(graph, loss, 1.0f, out);
  return out;
}

void backward_accumulate(const Graph& graph, NodeId loss, float weight,
                         Gradients& into) {
  BackwardPass::run(graph, loss, weight, into);
}

}  // namespace attnscope::ad

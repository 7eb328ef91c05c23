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

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnscope/ad/tensor.hpp"

namespace attnscope::ad {

// The op catalog. Everything the tagging model computes is expressed with
// these kinds. Reshape and Transpose2d move no arithmetic; Bce is the
// training objective (mean binary cross-entropy with clamped probabilities).
enum class OpKind : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,
  kRelu,
  kSigmoid,
  kSoftmaxLastDim,
  kLayerNormLastDim,
  kConv2dValid,
  kConv2dSameTime,
  kMaxPool2d,
  kMeanAxis,
  kConcatAxis,
  kScale,
  kReshape,
  kTranspose2d,
  kBce,
};

std::string_view to_string(OpKind kind);

struct OpAttrs {
  bool transpose_b = false;  // matmul: multiply by b^T
  std::size_t axis = 0;      // mean_axis, concat_axis
  float factor = 1.0f;       // scale
  float eps = 1e-5f;         // layer_norm_lastdim
  std::size_t pool_h = 1;    // maxpool2d window == stride
  std::size_t pool_w = 1;
  Shape shape;               // reshape target
};

inline constexpr float kBceClampLow = 1e-7f;
inline constexpr float kBceClampHigh = 1.0f - 1e-7f;

// Stateless evaluation of one catalog op. Throws ShapeError naming the
// offending shapes when inputs do not conform.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs = {});

class NodeId {
 public:
  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t index) : index_(index) {}
  constexpr std::uint32_t index() const { return index_; }
  friend constexpr bool operator==(NodeId, NodeId) = default;

 private:
  std::uint32_t index_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

// A recorded program. Nodes are appended in topological order and evaluated
// eagerly; replay() re-evaluates every op node from the current leaf values.
class Graph {
 public:
  Graph();
  ~Graph();
  Graph(Graph&&) noexcept;
  Graph& operator=(Graph&&) noexcept;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Named leaf that receives a gradient.
  NodeId parameter(std::string name, Tensor value);
  // Leaf that never receives a gradient (inputs, labels, overrides).
  NodeId constant(Tensor value);
  NodeId apply(OpKind kind, std::vector<NodeId> inputs, OpAttrs attrs = {});

  NodeId matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId add(NodeId a, NodeId b);
  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId softmax_lastdim(NodeId x);
  NodeId layer_norm_lastdim(NodeId x, NodeId gamma, NodeId beta);
  NodeId conv2d_valid(NodeId x, NodeId weight, NodeId bias);
  NodeId conv2d_same_time(NodeId x, NodeId weight, NodeId bias);
  NodeId maxpool2d(NodeId x, std::size_t pool_h, std::size_t pool_w);
  NodeId mean_axis(NodeId x, std::size_t axis);
  NodeId concat_axis(std::vector<NodeId> parts, std::size_t axis);
  NodeId scale(NodeId x, float factor);
  NodeId reshape(NodeId x, Shape shape);
  NodeId transpose2d(NodeId x);
  NodeId bce(NodeId probabilities, NodeId labels);

  const Tensor& value(NodeId id) const;
  OpKind kind(NodeId id) const;
  bool requires_grad(NodeId id) const;
  const std::string& name(NodeId id) const;
  const OpAttrs& attrs(NodeId id) const;
  std::span<const NodeId> inputs(NodeId id) const;

  std::size_t size() const;
  std::vector<NodeId> parameter_ids() const;

  // Leaf value replacement; the caller must replay() before reading op nodes.
  Tensor& mutable_leaf(NodeId id);
  void replay();

  // Drops every node recorded after `mark` (a previous size()).
  void truncate(std::size_t mark);

 private:
  friend class BackwardPass;
  struct Node;
  std::vector<Node> nodes_;
};

// Reverse traversal from a scalar loss. Returns one gradient per parameter
// name (zeros for parameters the loss does not reach). A parameter leaf used
// by several ops accumulates all contributions.
Gradients backward(const Graph& graph, NodeId loss);

// As backward(), but adds weight * gradient into `into`, creating missing
// entries. Used for minibatch accumulation.
void backward_accumulate(const Graph& graph, NodeId loss, float weight,
                         Gradients& into);

}  // namespace attnscope::ad

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

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "attnscope/ad/graph.hpp"
#include "attnscope/model/model.hpp"

namespace attnscope::model {

// Captured attention: [layer][head] matrices of [frames x frames], rows are
// queries and columns keys.
class AttentionTensor {
 public:
  AttentionTensor() = default;
  AttentionTensor(std::size_t layers, std::size_t heads, std::size_t frames);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }
  std::size_t frames() const { return frames_; }

  float at(std::size_t layer, std::size_t head, std::size_t query,
           std::size_t key) const {
    return scores_[((layer * heads_ + head) * frames_ + query) * frames_ + key];
  }
  const float* matrix(std::size_t layer, std::size_t head) const {
    return scores_.data() + (layer * heads_ + head) * frames_ * frames_;
  }
  float* matrix(std::size_t layer, std::size_t head) {
    return scores_.data() + (layer * heads_ + head) * frames_ * frames_;
  }

 private:
  std::size_t layers_ = 0, heads_ = 0, frames_ = 0;
  std::vector<float> scores_;
};

// Row-stochastic [frames x frames] matrix that replaces the post-softmax
// scores of every head in the last encoder layer.
class AttentionOverride {
 public:
  // Throws ContractError unless square, non-negative, and every row sums to
  // one within 1e-6.
  explicit AttentionOverride(ad::Tensor matrix);

  // Every query attends only to key `column`.
  static AttentionOverride one_hot(std::size_t frames, std::size_t column);
  static AttentionOverride uniform(std::size_t frames);
  static AttentionOverride identity(std::size_t frames);

  const ad::Tensor& matrix() const { return matrix_; }
  std::size_t frames() const { return matrix_.dim(0); }

 private:
  ad::Tensor matrix_;
};

// Node handles for one encoder layer, valid for the graph that built them.
struct EncoderLayerTrace {
  std::vector<ad::NodeId> scores;        // per head, [T, T]
  std::vector<ad::NodeId> values;        // per head V, [T, d_k]
  ad::NodeId attention;                  // concatenated head outputs, [T, d]
  ad::NodeId output;                     // layer output, [T, d]
};

struct ForwardTrace {
  ad::NodeId input;                      // [n_mels, T]
  ad::NodeId features;                   // front-end output, [T, d]
  ad::NodeId encoder_input;              // features + positional table
  std::vector<EncoderLayerTrace> layers;
  ad::NodeId encoded;                    // last layer output
  ad::NodeId logits;                     // [1, n_tags]
  ad::NodeId probabilities;              // [1, n_tags]
};

// Binds every model parameter as a named graph leaf.
std::map<std::string, ad::NodeId> bind_parameters(ad::Graph& graph,
                                                  const Model& model);

using ParameterNodes = std::map<std::string, ad::NodeId>;

ad::NodeId build_frontend(ad::Graph& graph, const Model& model,
                          const ParameterNodes& params, ad::NodeId input);

EncoderLayerTrace build_encoder_layer(ad::Graph& graph, const Model& model,
                                      const ParameterNodes& params,
                                      std::size_t layer, ad::NodeId x,
                                      const AttentionOverride* override);

// Mean over time, dense layer, sigmoid. Returns {logits, probabilities}.
std::pair<ad::NodeId, ad::NodeId> build_head(ad::Graph& graph,
                                             const ParameterNodes& params,
                                             ad::NodeId encoded);

// Whole pipeline on `input` ([n_mels, frames]). The override, when given,
// replaces the scores of every head of the last layer.
ForwardTrace build_forward(ad::Graph& graph, const Model& model,
                           const ParameterNodes& params,
                           const ad::Tensor& input,
                           const AttentionOverride* override = nullptr);

// Reads every captured score matrix out of a built graph.
AttentionTensor collect_attention(const ad::Graph& graph,
                                  const std::vector<EncoderLayerTrace>& layers);

// ---- value-level API ----------------------------------------------------

// [frames, d_model] timbral feature per frame.
ad::Tensor frontend_forward(const Model& model, const ad::Tensor& input);

struct EncoderResult {
  ad::Tensor encoded;
  AttentionTensor attention;
};

// `positional` defaults to the model's table; passing another table of the
// same shape exists for equivariance checks.
EncoderResult encoder_forward(const Model& model, const ad::Tensor& features,
                              const AttentionOverride* override = nullptr,
                              const ad::Tensor* positional = nullptr);

struct Prediction {
  std::vector<float> probabilities;
  std::vector<float> logits;
  AttentionTensor attention;
};

Prediction predict_tags(const Model& model, const ad::Tensor& input,
                        const AttentionOverride* override = nullptr);

// Encoder plus tagging head on a precomputed feature sequence.
Prediction predict_from_features(const Model& model, const ad::Tensor& features,
                                 const AttentionOverride* override = nullptr,
                                 const ad::Tensor* positional = nullptr);

}  // namespace attnscope::model

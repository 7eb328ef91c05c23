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

#include "attnscope/model/forward.hpp"

#include <cmath>

#include "attnscope/error.hpp"

namespace attnscope::model {

AttentionTensor::AttentionTensor(std::size_t layers, std::size_t heads,
                                 std::size_t frames)
    : layers_(layers),
      heads_(heads),
      frames_(frames),
      scores_(layers * heads * frames * frames, 0.0f) {}

AttentionOverride::AttentionOverride(ad::Tensor matrix)
    : matrix_(std::move(matrix)) {
  if (matrix_.rank() != 2 || matrix_.dim(0) != matrix_.dim(1)) {
    throw ContractError("attention override must be square, got " +
                        ad::shape_string(matrix_.shape()));
  }
  const std::size_t n = matrix_.dim(0);
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const float v = matrix_.at(r, c);
      if (!(v >= 0.0f)) {
        throw ContractError("attention override has a negative entry in row " +
                            std::to_string(r));
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ContractError("attention override row " + std::to_string(r) +
                          " sums to " + std::to_string(sum) + ", not 1");
    }
  }
}

AttentionOverride AttentionOverride::one_hot(std::size_t frames,
                                             std::size_t column) {
  if (column >= frames) {
    throw IndexError("one-hot column " + std::to_string(column) +
                     " outside " + std::to_string(frames) + " frames");
  }
  ad::Tensor m({frames, frames});
  for (std::size_t r = 0; r < frames; ++r) m.at(r, column) = 1.0f;
  return AttentionOverride(std::move(m));
}

AttentionOverride AttentionOverride::uniform(std::size_t frames) {
  return AttentionOverride(
      ad::Tensor({frames, frames}, 1.0f / static_cast<float>(frames)));
}

AttentionOverride AttentionOverride::identity(std::size_t frames) {
  ad::Tensor m({frames, frames});
  for (std::size_t r = 0; r < frames; ++r) m.at(r, r) = 1.0f;
  return AttentionOverride(std::move(m));
}

ParameterNodes bind_parameters(ad::Graph& graph, const Model& model) {
  ParameterNodes ids;
  for (const auto& [name, value] : model.parameters()) {
    ids.emplace(name, graph.parameter(name, value));
  }
  return ids;
}

namespace {

ad::NodeId param(const ParameterNodes& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ContractError("parameter not bound: " + name);
  return it->second;
}

ad::NodeId dense(ad::Graph& g, const ParameterNodes& params, ad::NodeId x,
                 const std::string& prefix) {
  return g.add(g.matmul(x, param(params, prefix + ".weight")),
               param(params, prefix + ".bias"));
}

void check_input(const ModelConfig& c, const ad::Tensor& input) {
  if (input.shape() != ad::Shape{c.n_mels, c.frames}) {
    throw ShapeError("model input must be " +
                     ad::shape_string({c.n_mels, c.frames}) + ", got " +
                     ad::shape_string(input.shape()));
  }
  const auto values = input.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("model input has a non-finite value at mel " +
                         std::to_string(i / c.frames) + ", frame " +
                         std::to_string(i % c.frames));
    }
  }
}

void check_features(const ModelConfig& c, const ad::Tensor& features) {
  if (features.shape() != ad::Shape{c.frames, c.d_model}) {
    throw ShapeError("feature sequence must be " +
                     ad::shape_string({c.frames, c.d_model}) + ", got " +
                     ad::shape_string(features.shape()));
  }
}

}  // namespace

ad::NodeId build_frontend(ad::Graph& g, const Model& model,
                          const ParameterNodes& params, ad::NodeId input) {
  const ModelConfig& c = model.config();
  const std::size_t ch = c.channels_per_branch;
  const ad::NodeId x = g.reshape(input, {1, c.n_mels, c.frames});

  // Vertical branch: tall kernels, valid in frequency, same in time, then the
  // strongest response over the remaining frequency positions.
  ad::NodeId v = g.conv2d_same_time(x, param(params, "frontend.vertical.weight"),
                                    param(params, "frontend.vertical.bias"));
  v = g.relu(v);
  v = g.maxpool2d(v, c.n_mels - c.vert_height + 1, 1);
  v = g.reshape(v, {ch, c.frames});

  // Horizontal branch: wide kernels over the frequency-averaged signal.
  ad::NodeId h = g.mean_axis(x, 1);
  h = g.conv2d_same_time(h, param(params, "frontend.horizontal.weight"),
                         param(params, "frontend.horizontal.bias"));
  h = g.relu(h);
  h = g.reshape(h, {ch, c.frames});

  return g.transpose2d(g.concat_axis({v, h}, 0));
}

EncoderLayerTrace build_encoder_layer(ad::Graph& g, const Model& model,
                                      const ParameterNodes& params,
                                      std::size_t layer, ad::NodeId x,
                                      const AttentionOverride* override) {
  const ModelConfig& c = model.config();
  const std::string prefix = "encoder." + std::to_string(layer) + ".";
  const bool replace = override != nullptr && layer + 1 == c.n_layers;
  if (replace && override->frames() != c.frames) {
    throw ContractError("override is " + std::to_string(override->frames()) +
                        " frames, model uses " + std::to_string(c.frames));
  }
  const float inv_sqrt_dk =
      1.0f / std::sqrt(static_cast<float>(c.head_width()));

  EncoderLayerTrace trace;
  std::vector<ad::NodeId> head_outputs;
  ad::NodeId replacement{};
  if (replace) replacement = g.constant(override->matrix());
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const std::string head = prefix + "head." + std::to_string(h);
    const ad::NodeId v = dense(g, params, x, head + ".value");
    ad::NodeId scores;
    if (replace) {
      scores = replacement;
    } else {
      const ad::NodeId q = dense(g, params, x, head + ".query");
      const ad::NodeId k = dense(g, params, x, head + ".key");
      scores = g.softmax_lastdim(g.scale(g.matmul(q, k, true), inv_sqrt_dk));
    }
    trace.scores.push_back(scores);
    trace.values.push_back(v);
    head_outputs.push_back(g.matmul(scores, v));
  }
  trace.attention = g.concat_axis(head_outputs, 1);
  const ad::NodeId attended = dense(g, params, trace.attention, prefix + "attn_out");
  const ad::NodeId norm1 =
      g.layer_norm_lastdim(g.add(x, attended), param(params, prefix + "norm1.gamma"),
                           param(params, prefix + "norm1.beta"));
  const ad::NodeId ff = dense(g, params, g.relu(dense(g, params, norm1, prefix + "ff1")),
                              prefix + "ff2");
  trace.output =
      g.layer_norm_lastdim(g.add(norm1, ff), param(params, prefix + "norm2.gamma"),
                           param(params, prefix + "norm2.beta"));
  return trace;
}

std::pair<ad::NodeId, ad::NodeId> build_head(ad::Graph& g,
                                             const ParameterNodes& params,
                                             ad::NodeId encoded) {
  const ad::NodeId pooled = g.mean_axis(encoded, 0);
  const ad::NodeId logits = dense(g, params, pooled, "tagger");
  return {logits, g.sigmoid(logits)};
}

namespace {

ForwardTrace build_from_features(ad::Graph& g, const Model& model,
                                 const ParameterNodes& params,
                                 ad::NodeId features,
                                 const AttentionOverride* override,
                                 const ad::Tensor* positional) {
  ForwardTrace t;
  t.features = features;
  const ad::Tensor& table = positional ? *positional : model.positional_table();
  if (table.shape() != g.value(features).shape()) {
    throw ShapeError("positional table " + ad::shape_string(table.shape()) +
                     " does not match features " +
                     ad::shape_string(g.value(features).shape()));
  }
  t.encoder_input = g.add(features, g.constant(table));
  ad::NodeId x = t.encoder_input;
  for (std::size_t l = 0; l < model.config().n_layers; ++l) {
    t.layers.push_back(build_encoder_layer(g, model, params, l, x, override));
    x = t.layers.back().output;
  }
  t.encoded = x;
  std::tie(t.logits, t.probabilities) = build_head(g, params, x);
  return t;
}

Prediction read_prediction(const ad::Graph& g, const ForwardTrace& t) {
  Prediction p;
  const auto probs = g.value(t.probabilities).data();
  const auto logits = g.value(t.logits).data();
  p.probabilities.assign(probs.begin(), probs.end());
  p.logits.assign(logits.begin(), logits.end());
  p.attention = collect_attention(g, t.layers);
  return p;
}

}  // namespace

ForwardTrace build_forward(ad::Graph& g, const Model& model,
                           const ParameterNodes& params,
                           const ad::Tensor& input,
                           const AttentionOverride* override) {
  check_input(model.config(), input);
  const ad::NodeId in = g.constant(input);
  ForwardTrace t = build_from_features(
      g, model, params, build_frontend(g, model, params, in), override, nullptr);
  t.input = in;
  return t;
}

AttentionTensor collect_attention(const ad::Graph& g,
                                  const std::vector<EncoderLayerTrace>& layers) {
  if (layers.empty()) return {};
  const std::size_t heads = layers.front().scores.size();
  const std::size_t frames = g.value(layers.front().scores.front()).dim(0);
  AttentionTensor out(layers.size(), heads, frames);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      const ad::Tensor& s = g.value(layers[l].scores[h]);
      std::copy(s.data().begin(), s.data().end(), out.matrix(l, h));
    }
  }
  return out;
}

ad::Tensor frontend_forward(const Model& model, const ad::Tensor& input) {
  check_input(model.config(), input);
  ad::Graph g;
  const ParameterNodes params = bind_parameters(g, model);
  return g.value(build_frontend(g, model, params, g.constant(input)));
}

EncoderResult encoder_forward(const Model& model, const ad::Tensor& features,
                              const AttentionOverride* override,
                              const ad::Tensor* positional) {
  check_features(model.config(), features);
  ad::Graph g;
  const ParameterNodes params = bind_parameters(g, model);
  const ForwardTrace t = build_from_features(g, model, params, g.constant(features),
                                             override, positional);
  return {g.value(t.encoded), collect_attention(g, t.layers)};
}

Prediction predict_tags(const Model& model, const ad::Tensor& input,
                        const AttentionOverride* override) {
  ad::Graph g;
  const ParameterNodes params = bind_parameters(g, model);
  return read_prediction(g, build_forward(g, model, params, input, override));
}

Prediction predict_from_features(const Model& model, const ad::Tensor& features,
                                 const AttentionOverride* override,
                                 const ad::Tensor* positional) {
  check_features(model.config(), features);
  ad::Graph g;
  const ParameterNodes params = bind_parameters(g, model);
  return read_prediction(g, build_from_features(g, model, params,
                                                g.constant(features), override,
                                                positional));
}

}  // namespace attnscope::model

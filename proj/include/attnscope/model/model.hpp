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
#include <string>
#include <utility>
#include <vector>

#include "attnscope/ad/tensor.hpp"

namespace attnscope::model {

// Architecture of the tagger: a two-branch spectrogram CNN (tall "timbre"
// kernels max-pooled over frequency, wide "temporal" kernels over the
// frequency-averaged signal) feeding a post-norm Transformer encoder, then
// mean pooling over time and one sigmoid per tag.
struct ModelConfig {
  std::size_t n_mels = 96;
  std::size_t frames = 256;
  std::size_t vert_height = 86;  // frequency extent of the vertical kernels
  std::size_t vert_width = 7;    // time extent of the vertical kernels
  std::size_t horiz_width = 129; // time extent of the horizontal kernels
  std::size_t channels_per_branch = 64;
  std::size_t d_model = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 8;
  std::size_t d_ff = 256;
  std::vector<std::string> tag_names = default_tag_names();
  float dropout = 0.0f;

  std::size_t n_tags() const { return tag_names.size(); }
  std::size_t head_width() const { return d_model / n_heads; }

  // Throws ConfigError.
  void validate() const;

  static std::vector<std::string> default_tag_names();
  // n_mels=8, frames=8, d_model=8, 2 heads; for gradient checks and fast tests.
  static ModelConfig tiny();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Canonical key-sorted JSON text of the config.
std::string config_to_json(const ModelConfig& config);
// Throws FormatError on malformed text, ConfigError on invalid values.
ModelConfig config_from_json(const std::string& text);

using ParameterMap = std::map<std::string, ad::Tensor>;

// Every parameter name and shape the config implies, in initialization order.
std::vector<std::pair<std::string, ad::Shape>> parameter_layout(
    const ModelConfig& config);

// Sinusoidal table [frames, d_model]: PE(pos, 2i) = sin(pos / 10000^(2i/d)),
// PE(pos, 2i+1) = cos(same angle).
ad::Tensor positional_encoding(std::size_t frames, std::size_t d_model);

class Model {
 public:
  // Throws ConfigError when the parameter set or a shape differs from
  // parameter_layout(config), NumericError when a value is not finite.
  Model(ModelConfig config, ParameterMap parameters);

  const ModelConfig& config() const { return config_; }
  const ParameterMap& parameters() const { return parameters_; }
  const ad::Tensor& parameter(const std::string& name) const;
  const ad::Tensor& positional_table() const { return positional_; }
  std::size_t parameter_count() const;

  // Replaces every parameter; same validation as the constructor.
  void set_parameters(ParameterMap parameters);

 private:
  ModelConfig config_;
  ParameterMap parameters_;
  ad::Tensor positional_;
};

// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero, norm scales
// one and shifts zero. Deterministic in (config, seed).
Model build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace attnscope::model

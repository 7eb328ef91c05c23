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

#include "attnscope/model/model.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "attnscope/error.hpp"
#include "attnscope/util/rng.hpp"

namespace attnscope::model {

std::vector<std::string> ModelConfig::default_tag_names() {
  return {"loud", "quiet", "vocal", "no_vocal", "fast", "slow", "low", "high"};
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.n_mels = 8;
  c.frames = 8;
  c.vert_height = 6;
  c.vert_width = 3;
  c.horiz_width = 5;
  c.channels_per_branch = 4;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  return c;
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid model config: " + what);
  };
  need(n_mels > 0 && frames > 0, "n_mels and frames must be positive");
  need(vert_height > 0 && vert_width > 0 && horiz_width > 0,
       "filter extents must be positive");
  need(vert_height <= n_mels, "vertical filter taller than n_mels");
  need(horiz_width <= frames && vert_width <= frames,
       "filter wider than the frame count");
  need(n_heads > 0 && n_layers > 0 && d_ff > 0, "layer sizes must be positive");
  need(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  need(d_model == 2 * channels_per_branch,
       "d_model must equal two front-end branches of channels_per_branch");
  need(!tag_names.empty(), "at least one tag");
  need(std::set<std::string>(tag_names.begin(), tag_names.end()).size() ==
           tag_names.size(),
       "tag names must be unique");
  need(dropout == 0.0f, "dropout is not supported (must be 0)");
}

std::string config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["n_mels"] = c.n_mels;
  j["frames"] = c.frames;
  j["vert_height"] = c.vert_height;
  j["vert_width"] = c.vert_width;
  j["horiz_width"] = c.horiz_width;
  j["channels_per_branch"] = c.channels_per_branch;
  j["d_model"] = c.d_model;
  j["n_layers"] = c.n_layers;
  j["n_heads"] = c.n_heads;
  j["d_ff"] = c.d_ff;
  j["tag_names"] = c.tag_names;
  j["dropout"] = c.dropout;
  return j.dump();
}

ModelConfig config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig c;
  try {
    c.n_mels = j.at("n_mels").get<std::size_t>();
    c.frames = j.at("frames").get<std::size_t>();
    c.vert_height = j.at("vert_height").get<std::size_t>();
    c.vert_width = j.at("vert_width").get<std::size_t>();
    c.horiz_width = j.at("horiz_width").get<std::size_t>();
    c.channels_per_branch = j.at("channels_per_branch").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.tag_names = j.at("tag_names").get<std::vector<std::string>>();
    c.dropout = j.at("dropout").get<float>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model config is missing a field: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<std::pair<std::string, ad::Shape>> parameter_layout(
    const ModelConfig& c) {
  const std::size_t ch = c.channels_per_branch;
  const std::size_t d = c.d_model;
  const std::size_t dk = c.head_width();
  std::vector<std::pair<std::string, ad::Shape>> out{
      {"frontend.vertical.weight", {ch, 1, c.vert_height, c.vert_width}},
      {"frontend.vertical.bias", {ch}},
      {"frontend.horizontal.weight", {ch, 1, 1, c.horiz_width}},
      {"frontend.horizontal.bias", {ch}},
  };
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string layer = "encoder." + std::to_string(l) + ".";
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const std::string head = layer + "head." + std::to_string(h) + ".";
      for (const char* proj : {"query", "key", "value"}) {
        out.push_back({head + proj + ".weight", {d, dk}});
        out.push_back({head + proj + ".bias", {dk}});
      }
    }
    out.push_back({layer + "attn_out.weight", {d, d}});
    out.push_back({layer + "attn_out.bias", {d}});
    out.push_back({layer + "norm1.gamma", {d}});
    out.push_back({layer + "norm1.beta", {d}});
    out.push_back({layer + "ff1.weight", {d, c.d_ff}});
    out.push_back({layer + "ff1.bias", {c.d_ff}});
    out.push_back({layer + "ff2.weight", {c.d_ff, d}});
    out.push_back({layer + "ff2.bias", {d}});
    out.push_back({layer + "norm2.gamma", {d}});
    out.push_back({layer + "norm2.beta", {d}});
  }
  out.push_back({"tagger.weight", {d, c.n_tags()}});
  out.push_back({"tagger.bias", {c.n_tags()}});
  return out;
}

ad::Tensor positional_encoding(std::size_t frames, std::size_t d_model) {
  ad::Tensor pe({frames, d_model});
  for (std::size_t pos = 0; pos < frames; ++pos) {
    for (std::size_t i = 0; 2 * i < d_model; ++i) {
      const double angle =
          static_cast<double>(pos) /
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe.at(pos, 2 * i) = static_cast<float>(std::sin(angle));
      if (2 * i + 1 < d_model) pe.at(pos, 2 * i + 1) = static_cast<float>(std::cos(angle));
    }
  }
  return pe;
}

Model::Model(ModelConfig config, ParameterMap parameters)
    : config_(std::move(config)) {
  config_.validate();
  set_parameters(std::move(parameters));
  positional_ = positional_encoding(config_.frames, config_.d_model);
}

void Model::set_parameters(ParameterMap parameters) {
  const auto layout = parameter_layout(config_);
  if (parameters.size() != layout.size()) {
    throw ConfigError("model expects " + std::to_string(layout.size()) +
                      " parameter tensors, got " +
                      std::to_string(parameters.size()));
  }
  for (const auto& [name, shape] : layout) {
    auto it = parameters.find(name);
    if (it == parameters.end()) throw ConfigError("missing parameter " + name);
    if (it->second.shape() != shape) {
      throw ConfigError("parameter " + name + " has shape " +
                        ad::shape_string(it->second.shape()) + ", expected " +
                        ad::shape_string(shape));
    }
    for (float v : it->second.data()) {
      if (!std::isfinite(v)) throw NumericError("parameter " + name + " is not finite");
    }
  }
  parameters_ = std::move(parameters);
}

const ad::Tensor& Model::parameter(const std::string& name) const {
  auto it = parameters_.find(name);
  if (it == parameters_.end()) throw ContractError("no parameter named " + name);
  return it->second;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters_) n += t.size();
  return n;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// PyTorch's convention: conv fans include the receptive field.
std::pair<std::size_t, std::size_t> fans(const ad::Shape& shape) {
  if (shape.size() == 4) {
    const std::size_t field = shape[2] * shape[3];
    return {shape[1] * field, shape[0] * field};
  }
  return {shape[0], shape[1]};
}

}  // namespace

Model build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  util::Engine engine(seed);
  ParameterMap params;
  for (const auto& [name, shape] : parameter_layout(config)) {
    ad::Tensor t(shape);
    if (ends_with(name, ".weight")) {
      const auto [fan_in, fan_out] = fans(shape);
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (float& v : t.data()) {
        v = static_cast<float>(util::uniform(engine, -bound, bound));
      }
    } else if (ends_with(name, ".gamma")) {
      t.fill(1.0f);
    }
    params.emplace(name, std::move(t));
  }
  return Model(config, std::move(params));
}

}  // namespace attnscope::model

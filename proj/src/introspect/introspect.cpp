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

#include "attnscope/introspect/introspect.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "attnscope/error.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::introspect {

std::vector<float> min_max_normalize(const std::vector<float>& values) {
  std::vector<float> out(values.size(), 0.0f);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>((static_cast<double>(values[i]) - *lo) / range);
  }
  return out;
}

HeatMap attention_heatmap(const model::AttentionTensor& captured) {
  if (captured.layers() == 0) {
    throw ContractError("attention_heatmap: no captured layer");
  }
  const std::size_t last = captured.layers() - 1;
  const std::size_t frames = captured.frames();
  // Accumulate in double so the sum does not depend on head order.
  std::vector<double> acc(frames, 0.0);
  for (std::size_t h = 0; h < captured.heads(); ++h) {
    const float* m = captured.matrix(last, h);
    for (std::size_t q = 0; q < frames; ++q) {
      for (std::size_t k = 0; k < frames; ++k) acc[k] += m[q * frames + k];
    }
  }
  HeatMap map;
  map.raw.assign(acc.begin(), acc.end());
  map.normalized = min_max_normalize(map.raw);
  return map;
}

std::vector<float> ContributionMap::row(std::size_t tag) const {
  return {probabilities.begin() + static_cast<long>(tag * frames),
          probabilities.begin() + static_cast<long>((tag + 1) * frames)};
}

std::vector<float> ContributionMap::logit_row(std::size_t tag) const {
  return {logits.begin() + static_cast<long>(tag * frames),
          logits.begin() + static_cast<long>((tag + 1) * frames)};
}

ContributionMap tagwise_contribution(const model::Model& m, const ad::Tensor& input) {
  const model::ModelConfig& cfg = m.config();
  if (input.rank() != 2 || input.dim(0) != cfg.n_mels || input.dim(1) != cfg.frames) {
    throw ShapeError("tagwise_contribution: input " + ad::shape_string(input.shape()) +
                     " does not match [" + std::to_string(cfg.n_mels) + ", " +
                     std::to_string(cfg.frames) + "]");
  }
  const std::size_t frames = cfg.frames;
  const std::size_t n_tags = cfg.n_tags();
  ContributionMap map;
  map.tag_names = m.config().tag_names;
  map.frames = frames;
  map.probabilities.assign(n_tags * frames, 0.0f);
  map.logits.assign(n_tags * frames, 0.0f);

  // Same op sequence as predict_tags, with the shared prefix recorded once.
  ad::Graph g;
  const model::ParameterNodes params = model::bind_parameters(g, m);
  const ad::NodeId in = g.constant(input);
  const ad::NodeId features = model::build_frontend(g, m, params, in);
  ad::NodeId x = g.add(features, g.constant(m.positional_table()));
  const std::size_t last = cfg.n_layers - 1;
  for (std::size_t l = 0; l < last; ++l) {
    x = model::build_encoder_layer(g, m, params, l, x, nullptr).output;
  }
  const std::size_t mark = g.size();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto override = model::AttentionOverride::one_hot(frames, t);
    const auto layer = model::build_encoder_layer(g, m, params, last, x, &override);
    const auto [logits, probs] = model::build_head(g, params, layer.output);
    for (std::size_t k = 0; k < n_tags; ++k) {
      map.probabilities[k * frames + t] = g.value(probs)[k];
      map.logits[k * frames + t] = g.value(logits)[k];
    }
    g.truncate(mark);
  }
  return map;
}

model::Prediction contribution_column(const model::Model& m, const ad::Tensor& input,
                                      std::size_t t) {
  if (t >= m.config().frames) {
    throw IndexError("time bin " + std::to_string(t) + " outside [0, " +
                     std::to_string(m.config().frames) + ")");
  }
  const auto override = model::AttentionOverride::one_hot(m.config().frames, t);
  return model::predict_tags(m, input, &override);
}

ConcatProbe concat_probe(const model::Model& m, const dsp::PcmClip& clip_a,
                         const dsp::PcmClip& clip_b, const std::string& tag_a,
                         const std::string& tag_b) {
  const std::vector<std::string> names = m.config().tag_names;
  auto index_of = [&](const std::string& tag) {
    const auto it = std::find(names.begin(), names.end(), tag);
    if (it == names.end()) {
      std::string list;
      for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
      throw VocabularyError("unknown tag \"" + tag + "\"; expected one of: " + list);
    }
    return static_cast<std::size_t>(it - names.begin());
  };
  const std::size_t ia = index_of(tag_a);
  const std::size_t ib = index_of(tag_b);

  const std::size_t half = m.config().frames / 2;
  auto crop = [&](const dsp::PcmClip& clip, const char* which) {
    dsp::MelSpectrogram spec = dsp::log_mel(clip);
    if (spec.n_frames < half) {
      throw InputTooShortError(std::string("clip ") + which + " has " +
                               std::to_string(spec.n_frames) +
                               " frames; the probe needs " + std::to_string(half));
    }
    return dsp::crop_frames(spec, 0, half);
  };
  const dsp::MelSpectrogram joint =
      dsp::concat_spectrograms(crop(clip_a, "a"), crop(clip_b, "b"));

  ConcatProbe probe;
  probe.boundary_frame = half;
  probe.input = dsp::extract_window(joint, 0, m.config().frames);
  probe.map = tagwise_contribution(m, probe.input);
  probe.row_a = probe.map.row(ia);
  probe.row_b = probe.map.row(ib);
  return probe;
}

GrayImage to_image(const std::vector<float>& values, std::size_t rows,
                   std::size_t cols) {
  if (values.size() != rows * cols) {
    throw ShapeError("image: " + std::to_string(values.size()) + " values for " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (float v : values) {
    if (!std::isfinite(v)) throw NumericError("image: non-finite value");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  GrayImage img{cols, rows, std::vector<std::uint8_t>(values.size(), 0)};
  const double range = hi - lo;
  if (range > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      img.pixels[i] = static_cast<std::uint8_t>(
          std::lround((static_cast<double>(values[i]) - lo) / range * 255.0));
    }
  }
  return img;
}

GrayImage stack_images(const GrayImage& top, const std::vector<GrayImage>& strips,
                       std::size_t strip_height) {
  if (strip_height == 0) throw ContractError("strip height must be positive");
  GrayImage out = top;
  for (const GrayImage& s : strips) {
    if (s.width != top.width) {
      throw ShapeError("strip width " + std::to_string(s.width) + " != image width " +
                       std::to_string(top.width));
    }
    for (std::size_t r = 0; r < s.height; ++r) {
      for (std::size_t k = 0; k < strip_height; ++k) {
        out.pixels.insert(out.pixels.end(), s.pixels.begin() + static_cast<long>(r * s.width),
                          s.pixels.begin() + static_cast<long>((r + 1) * s.width));
      }
    }
    out.height += s.height * strip_height;
  }
  return out;
}

GrayImage spectrogram_image(const ad::Tensor& input) {
  if (input.rank() != 2) {
    throw ShapeError("spectrogram image needs [n_mels, frames], got " +
                     ad::shape_string(input.shape()));
  }
  const std::size_t mels = input.dim(0), frames = input.dim(1);
  std::vector<float> flipped(input.size());
  for (std::size_t r = 0; r < mels; ++r) {
    std::copy_n(input.raw() + (mels - 1 - r) * frames, frames,
                flipped.begin() + static_cast<long>(r * frames));
  }
  return to_image(flipped, mels, frames);
}

std::string encode_pgm(const GrayImage& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.append(image.pixels.begin(), image.pixels.end());
  return out;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  util::write_file(path, encode_pgm(image));
}

void render_pgm(const std::vector<float>& values, std::size_t rows, std::size_t cols,
                const std::filesystem::path& path) {
  write_pgm(to_image(values, rows, cols), path);
}

GrayImage decode_pgm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw FormatError("pgm: truncated header");
    return bytes.substr(start, pos - start);
  };
  if (token() != "P5") throw FormatError("pgm: expected magic \"P5\"");
  GrayImage img;
  try {
    img.width = static_cast<std::size_t>(std::stoull(token()));
    img.height = static_cast<std::size_t>(std::stoull(token()));
    if (std::stoi(token()) != 255) throw FormatError("pgm: maxval must be 255");
  } catch (const std::logic_error&) {
    throw FormatError("pgm: malformed header");
  }
  ++pos;  // the single whitespace byte before the raster
  if (bytes.size() < pos || bytes.size() - pos != img.width * img.height) {
    throw FormatError("pgm: raster has " + std::to_string(bytes.size() - std::min(pos, bytes.size())) +
                      " bytes, expected " + std::to_string(img.width * img.height));
  }
  img.pixels.assign(bytes.begin() + static_cast<long>(pos), bytes.end());
  return img;
}

std::string heatmap_csv(const HeatMap& map) {
  return util::join_fixed(map.raw) + "\n";
}

std::string contribution_csv(const std::vector<std::string>& tag_names,
                             const std::vector<std::vector<float>>& rows) {
  if (tag_names.size() != rows.size()) {
    throw ShapeError("contribution_csv: " + std::to_string(tag_names.size()) +
                     " names for " + std::to_string(rows.size()) + " rows");
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += tag_names[i] + "," + util::join_fixed(rows[i]) + "\n";
  }
  return out;
}

namespace {

std::string map_csv(const ContributionMap& map, bool logits) {
  std::vector<std::vector<float>> rows;
  for (std::size_t k = 0; k < map.tag_names.size(); ++k) {
    rows.push_back(logits ? map.logit_row(k) : map.row(k));
  }
  return contribution_csv(map.tag_names, rows);
}

}  // namespace

std::string contribution_csv(const ContributionMap& map) { return map_csv(map, false); }
std::string contribution_logits_csv(const ContributionMap& map) {
  return map_csv(map, true);
}

}  // namespace attnscope::introspect

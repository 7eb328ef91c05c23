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
#include <filesystem>
#include <string>
#include <vector>

#include "attnscope/ad/tensor.hpp"
#include "attnscope/dsp/audio.hpp"
#include "attnscope/dsp/spectrogram.hpp"
#include "attnscope/model/forward.hpp"
#include "attnscope/model/model.hpp"

namespace attnscope::introspect {

// Attention received per key bin in the last encoder layer.
struct HeatMap {
  std::vector<float> raw;         // sum over heads and queries, length T
  std::vector<float> normalized;  // min-max scaled to [0, 1]; all zero if constant
};

// Throws ContractError when `captured` holds no layer.
HeatMap attention_heatmap(const model::AttentionTensor& captured);

// Min-max normalization to [0, 1]; a constant (or empty) vector maps to zeros.
std::vector<float> min_max_normalize(const std::vector<float>& values);

// Row k, column t: tag k's output when every query of the last layer attends
// only to time bin t.
struct ContributionMap {
  std::vector<std::string> tag_names;
  std::size_t frames = 0;
  std::vector<float> probabilities;  // [n_tags][frames]
  std::vector<float> logits;         // [n_tags][frames]

  float probability(std::size_t tag, std::size_t t) const {
    return probabilities[tag * frames + t];
  }
  std::vector<float> row(std::size_t tag) const;
  std::vector<float> logit_row(std::size_t tag) const;
};

// One override pass per time bin. The front end and all layers before the
// last run once; column t is bitwise equal to
// predict_tags(model, input, one_hot(t)).
ContributionMap tagwise_contribution(const model::Model& model,
                                     const ad::Tensor& input);
// A single column of the sweep, computed in isolation.
model::Prediction contribution_column(const model::Model& model,
                                      const ad::Tensor& input, std::size_t t);

struct ConcatProbe {
  std::vector<float> row_a;  // contribution row of tag_a over the joint input
  std::vector<float> row_b;
  std::size_t boundary_frame = 0;
  ad::Tensor input;          // [n_mels, frames] model input that was probed
  ContributionMap map;       // every tag, for export
};

// Crops each clip's spectrogram to its first frames/2 frames, concatenates
// them (a first) and runs tagwise_contribution. Throws VocabularyError for an
// unknown tag and InputTooShortError when a clip is shorter than frames/2.
ConcatProbe concat_probe(const model::Model& model, const dsp::PcmClip& clip_a,
                         const dsp::PcmClip& clip_b, const std::string& tag_a,
                         const std::string& tag_b);

// Grayscale image, row-major, 8 bits per pixel.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;
};

// Min-max normalizes a [rows][cols] matrix to 0..255 (round to nearest); a
// constant matrix gives all-zero pixels. Throws NumericError when a value is
// not finite and ShapeError when values.size() != rows * cols.
GrayImage to_image(const std::vector<float>& values, std::size_t rows,
                   std::size_t cols);

// Stacks images of equal width top to bottom; `strip_height` repeats every
// row of the strips so a one-row heat map stays visible.
GrayImage stack_images(const GrayImage& top, const std::vector<GrayImage>& strips,
                       std::size_t strip_height);

// Spectrogram as an image: high frequencies on top, like the usual display.
GrayImage spectrogram_image(const ad::Tensor& input);

std::string encode_pgm(const GrayImage& image);
// Binary PGM (P5, maxval 255). Throws IoError on write failure.
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
void render_pgm(const std::vector<float>& values, std::size_t rows,
                std::size_t cols, const std::filesystem::path& path);
// Parses a P5 image with maxval 255; throws FormatError otherwise.
GrayImage decode_pgm(const std::string& bytes);

// One line of raw values with six decimals.
std::string heatmap_csv(const HeatMap& map);
// One line per tag: the tag name, then T values with six decimals.
std::string contribution_csv(const std::vector<std::string>& tag_names,
                             const std::vector<std::vector<float>>& rows);
std::string contribution_csv(const ContributionMap& map);
std::string contribution_logits_csv(const ContributionMap& map);

}  // namespace attnscope::introspect

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

#include <cstddef>
#include <string>
#include <vector>

#include "attnscope/ad/tensor.hpp"
#include "attnscope/dsp/audio.hpp"

namespace attnscope::dsp {

struct DspConfig {
  int sample_rate = 16000;
  std::size_t window_size = 512;
  std::size_t hop_size = 256;
  std::size_t n_mels = 96;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  // Throws ConfigError.
  void validate() const;
  friend bool operator==(const DspConfig&, const DspConfig&) = default;
};

// Frames the model sees at once: 256 * 256 + 512 - 256 samples at 16 kHz is
// 4.112 s of audio.
inline constexpr std::size_t kModelFrames = 256;

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// log10 mel power, n_mels rows (low to high frequency) by n_frames columns.
struct MelSpectrogram {
  std::vector<float> values;  // row-major [n_mels][n_frames]
  std::size_t n_mels = 0;
  std::size_t n_frames = 0;
  DspConfig config;

  float at(std::size_t mel, std::size_t frame) const {
    return values[mel * n_frames + frame];
  }
};

// floor((n_samples - window) / hop) + 1, or 0 when shorter than one window.
std::size_t frame_count(std::size_t n_samples, const DspConfig& config);

// Triangular filters on the STFT bin grid, one row per mel band, rows of
// window_size/2 + 1 weights. Band edges are uniform on the mel scale.
std::vector<std::vector<double>> mel_filterbank(const DspConfig& config);

// Periodic-Hann STFT without center padding, squared magnitude, mel
// projection, then log10(max(power, log_floor)). Throws ContractError on a
// rate mismatch and InputTooShortError when the clip is under one window.
MelSpectrogram log_mel(const PcmClip& clip, const DspConfig& config = {});

// Model input of shape [n_mels, frames]. Copies frames [start, start+frames)
// or, when the spectrogram is shorter than `frames`, tiles it cyclically from
// `start`. Throws IndexError for a negative or out-of-range start.
ad::Tensor extract_window(const MelSpectrogram& spec, long start_frame,
                          std::size_t frames = kModelFrames);

// Time-axis concatenation. Throws ShapeError on mismatched bands or config.
MelSpectrogram concat_spectrograms(const MelSpectrogram& a,
                                   const MelSpectrogram& b);

// Crops frames [start, start+frames); throws IndexError when out of range.
MelSpectrogram crop_frames(const MelSpectrogram& spec, std::size_t start,
                           std::size_t frames);

// Rows = mel bands low to high, columns = frames, six decimals, LF endings.
std::string spectrogram_csv(const MelSpectrogram& spec);

}  // namespace attnscope::dsp

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
#include <span>
#include <vector>

namespace attnscope::dsp {

// Mono PCM at a fixed rate. Samples lie in [-1, 1]; never empty.
struct PcmClip {
  std::vector<float> samples;
  int sample_rate = 0;

  std::size_t size() const { return samples.size(); }
  double seconds() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Checks the clip invariants; throws ContractError.
void validate(const PcmClip& clip);

// RIFF/WAVE, 16-bit integer PCM, one or two channels. Stereo is averaged to
// mono and samples are scaled by 1/32768. Throws FormatError for a malformed
// container and UnsupportedError for other codecs, depths or channel counts.
PcmClip decode_wav(std::span<const std::uint8_t> bytes);
PcmClip load_wav(const std::filesystem::path& path);

// 16-bit mono PCM. Samples are rounded to the nearest step of 1/32768.
std::vector<std::uint8_t> encode_wav(const PcmClip& clip);
void save_wav(const std::filesystem::path& path, const PcmClip& clip);

// Linear interpolation to a new rate; the last sample is held past the end.
// Output length is floor(n * target_rate / sample_rate). Lossy.
PcmClip resample_linear(const PcmClip& clip, int target_rate);

}  // namespace attnscope::dsp

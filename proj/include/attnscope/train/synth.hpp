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

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "attnscope/ad/tensor.hpp"
#include "attnscope/dsp/audio.hpp"
#include "attnscope/dsp/spectrogram.hpp"

namespace attnscope::train {

inline constexpr std::size_t kNumTags = 8;
inline constexpr std::size_t kNumPairs = 4;
// Four contrastive pairs: tags 2p and 2p+1 are mutually exclusive.
inline constexpr std::array<const char*, kNumTags> kTagNames = {
    "loud", "quiet", "vocal", "no_vocal", "fast", "slow", "low", "high"};

// Multi-hot label; exactly one tag of each pair is 1.
using Label = std::array<std::uint8_t, kNumTags>;

// Throws ContractError unless every entry is 0/1 with one active per pair.
void validate_label(const Label& label);
// Bit p of `combination` (0..15) selects the second tag of pair p.
Label label_from_combination(unsigned combination);
unsigned combination_of(const Label& label);
// Index of `name` in kTagNames; throws VocabularyError listing the tags.
std::size_t tag_index(const std::string& name);
// Parses a comma-separated set of tag names; throws VocabularyError for an
// unknown name and ContractError for an invalid combination.
Label parse_label(const std::string& text);
std::string label_string(const Label& label);

inline constexpr int kSynthRate = 16000;
inline constexpr double kClipSeconds = 4.112;

// Level and texture constants of the generator.
inline constexpr double kLoudRms = 0.5;        // before the peak limiter
inline constexpr double kLoudPeak = 0.9;       // soft-limiter ceiling
inline constexpr double kQuietRms = 0.08;
inline constexpr double kGapSeconds = 0.4;
inline constexpr double kNoiseRms = 0.01;      // -40 dBFS white noise
inline constexpr double kVibratoHz = 5.5;
inline constexpr double kVibratoDepth = 0.03;

struct SynthClip {
  dsp::PcmClip clip;
  // Silent stretch [begin, end) in samples; only quiet clips have one.
  std::optional<std::pair<std::size_t, std::size_t>> gap;
};

// Deterministic in (label, seed, seconds). Throws ContractError for an
// invalid label or non-positive duration.
SynthClip synth_clip_detailed(const Label& label, std::uint64_t seed,
                              double seconds = kClipSeconds);
dsp::PcmClip synth_clip(const Label& label, std::uint64_t seed,
                        double seconds = kClipSeconds);

// Spectrogram frames whose whole analysis window lies inside the gap, as an
// inclusive range; nullopt when no frame fits.
std::optional<std::pair<std::size_t, std::size_t>> gap_frames(
    std::pair<std::size_t, std::size_t> gap_samples,
    const dsp::DspConfig& config = {});

struct SynthSpec {
  std::size_t n_clips = 2000;
  double clip_seconds = kClipSeconds;
  std::uint64_t seed = 1;
  // When set, every clip carries this label instead of a uniform draw.
  std::optional<Label> fixed_label;

  // Throws ConfigError.
  void validate() const;
};

// Flat key=value text: n_clips, clip_seconds, seed, and optionally
// `tags` (must list the vocabulary in order) and `label` (comma-separated
// active tags). Throws ConfigError, VocabularyError or ContractError.
SynthSpec parse_synth_spec(const std::string& text);
std::string synth_spec_text(const SynthSpec& spec);

enum class Split : std::uint8_t { kTrain, kValid, kTest };
const char* split_name(Split split);
Split parse_split(const std::string& name);

struct ClipRecord {
  std::string clip_id;
  std::uint64_t seed = 0;  // synth_clip seed
  Label label{};
  Split split = Split::kTrain;
};

// Labels, seeds and split assignment without rendering any audio. Clip i
// uses seed derive_seed(spec.seed, i); splits come from a seeded shuffle
// with floor(0.8 n) train, floor(0.1 n) valid, the rest test.
std::vector<ClipRecord> plan_dataset(const SynthSpec& spec);

// CSV: clip_id,seed,<8 tag columns>,split with LF line endings.
std::string manifest_csv(const std::vector<ClipRecord>& records);
// Throws FormatError on a malformed manifest.
std::vector<ClipRecord> parse_manifest_csv(const std::string& text);

struct Example {
  ad::Tensor input;  // [n_mels, frames]
  Label label{};
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

struct Dataset {
  std::vector<Example> items;
  std::vector<std::size_t> indices(Split split) const;
};

// Model input for a clip: log_mel, then the first `frames` frames.
ad::Tensor clip_input(const dsp::PcmClip& clip, const dsp::DspConfig& config = {},
                      std::size_t frames = dsp::kModelFrames);

// Renders and featurizes every clip of plan_dataset(spec). Rendering runs on
// up to `threads` workers (0 = hardware concurrency); results are identical
// for every thread count.
Dataset make_dataset(const SynthSpec& spec, const dsp::DspConfig& config = {},
                     unsigned threads = 0);

// Writes clips/<clip_id>.wav plus manifest.csv under `dir`.
void write_dataset(const SynthSpec& spec, const std::filesystem::path& dir,
                   unsigned threads = 0);
// Reads manifest.csv and the WAV files it lists. Throws IoError when the
// directory or a file is missing, FormatError on a malformed manifest.
Dataset read_dataset(const std::filesystem::path& dir,
                     const dsp::DspConfig& config = {}, unsigned threads = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// exception by index order.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace attnscope::train

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

#include "attnscope/dsp/spectrogram.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include "attnscope/error.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::dsp {
namespace {

struct FftwFree {
  void operator()(void* p) const { fftwf_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

// FFTW planning is not thread-safe; execution with fresh buffers is. Plans
// are built once per size under a lock and reused with fftwf_malloc'd arrays.
fftwf_plan plan_for(std::size_t n) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, fftwf_plan> plans;
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  FftwBuffer<float> in(static_cast<float*>(fftwf_malloc(sizeof(float) * n)));
  FftwBuffer<fftwf_complex> out(static_cast<fftwf_complex*>(
      fftwf_malloc(sizeof(fftwf_complex) * (n / 2 + 1))));
  fftwf_plan plan = fftwf_plan_dft_r2c_1d(static_cast<int>(n), in.get(),
                                          out.get(), FFTW_ESTIMATE);
  plans.emplace(n, plan);
  return plan;
}

}  // namespace

void DspConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
  if (window_size == 0 || hop_size == 0) {
    throw ConfigError("window_size and hop_size must be positive");
  }
  if (window_size < hop_size) throw ConfigError("window_size must be >= hop_size");
  if (n_mels == 0 || n_mels >= window_size / 2 + 1) {
    throw ConfigError("n_mels must be in [1, window_size/2 + 1)");
  }
  if (!(fmin >= 0.0 && fmin < fmax)) throw ConfigError("need 0 <= fmin < fmax");
  if (fmax > sample_rate / 2.0) throw ConfigError("fmax must be <= sample_rate/2");
  if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::size_t frame_count(std::size_t n_samples, const DspConfig& config) {
  if (n_samples < config.window_size) return 0;
  return (n_samples - config.window_size) / config.hop_size + 1;
}

std::vector<std::vector<double>> mel_filterbank(const DspConfig& config) {
  const std::size_t bins = config.window_size / 2 + 1;
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.fmax);
  std::vector<double> edges(config.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(config.n_mels + 1));
  }
  std::vector<std::vector<double>> bank(config.n_mels,
                                        std::vector<double>(bins, 0.0));
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * config.sample_rate /
                       static_cast<double>(config.window_size);
      if (f >= left && f <= center) {
        bank[m][k] = (f - left) / (center - left);
      } else if (f > center && f <= right) {
        bank[m][k] = (right - f) / (right - center);
      }
    }
  }
  return bank;
}

MelSpectrogram log_mel(const PcmClip& clip, const DspConfig& config) {
  config.validate();
  if (clip.sample_rate != config.sample_rate) {
    throw ContractError("clip rate " + std::to_string(clip.sample_rate) +
                        " differs from configured rate " +
                        std::to_string(config.sample_rate));
  }
  const std::size_t n = config.window_size;
  const std::size_t frames = frame_count(clip.samples.size(), config);
  if (frames == 0) {
    throw InputTooShortError("clip of " + std::to_string(clip.samples.size()) +
                             " samples is shorter than one window of " +
                             std::to_string(n));
  }
  const std::size_t bins = n / 2 + 1;

  std::vector<float> window(n);
  for (std::size_t i = 0; i < n; ++i) {
    window[i] = static_cast<float>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n)));
  }

  // Sparse filterbank: [first bin, weights...] per band.
  const auto bank = mel_filterbank(config);
  std::vector<std::size_t> first(config.n_mels, 0), last(config.n_mels, 0);
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    std::size_t k0 = bins, k1 = 0;
    for (std::size_t k = 0; k < bins; ++k) {
      if (bank[m][k] > 0.0) {
        k0 = std::min(k0, k);
        k1 = k + 1;
      }
    }
    first[m] = k0 == bins ? 0 : k0;
    last[m] = k0 == bins ? 0 : k1;
  }

  const fftwf_plan plan = plan_for(n);
  FftwBuffer<float> in(static_cast<float*>(fftwf_malloc(sizeof(float) * n)));
  FftwBuffer<fftwf_complex> out(static_cast<fftwf_complex*>(
      fftwf_malloc(sizeof(fftwf_complex) * bins)));
  std::vector<double> power(bins);

  MelSpectrogram spec;
  spec.n_mels = config.n_mels;
  spec.n_frames = frames;
  spec.config = config;
  spec.values.resize(config.n_mels * frames);
  const float floor_log = static_cast<float>(std::log10(config.log_floor));

  for (std::size_t t = 0; t < frames; ++t) {
    const float* src = clip.samples.data() + t * config.hop_size;
    for (std::size_t i = 0; i < n; ++i) in[i] = src[i] * window[i];
    fftwf_execute_dft_r2c(plan, in.get(), out.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out[k][0], im = out[k][1];
      power[k] = re * re + im * im;
    }
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      double acc = 0.0;
      for (std::size_t k = first[m]; k < last[m]; ++k) acc += bank[m][k] * power[k];
      spec.values[m * frames + t] =
          acc > config.log_floor ? static_cast<float>(std::log10(acc)) : floor_log;
    }
  }
  return spec;
}

ad::Tensor extract_window(const MelSpectrogram& spec, long start_frame,
                          std::size_t frames) {
  if (start_frame < 0) {
    throw IndexError("start frame must be non-negative, got " +
                     std::to_string(start_frame));
  }
  if (spec.n_frames == 0 || frames == 0) {
    throw IndexError("cannot window an empty spectrogram");
  }
  const auto start = static_cast<std::size_t>(start_frame);
  const bool tile = spec.n_frames < frames;
  if (tile ? start >= spec.n_frames : start + frames > spec.n_frames) {
    throw IndexError("window [" + std::to_string(start) + ", " +
                     std::to_string(start + frames) + ") exceeds " +
                     std::to_string(spec.n_frames) + " frames");
  }
  ad::Tensor out({spec.n_mels, frames});
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    const float* row = spec.values.data() + m * spec.n_frames;
    float* dst = out.raw() + m * frames;
    if (!tile) {
      std::copy_n(row + start, frames, dst);
    } else {
      for (std::size_t j = 0; j < frames; ++j) {
        dst[j] = row[(start + j) % spec.n_frames];
      }
    }
  }
  return out;
}

MelSpectrogram concat_spectrograms(const MelSpectrogram& a,
                                   const MelSpectrogram& b) {
  if (a.n_mels != b.n_mels) {
    throw ShapeError("cannot concatenate spectrograms with " +
                     std::to_string(a.n_mels) + " and " +
                     std::to_string(b.n_mels) + " mel bands");
  }
  if (!(a.config == b.config)) {
    throw ShapeError("cannot concatenate spectrograms with different DSP configs");
  }
  MelSpectrogram out;
  out.n_mels = a.n_mels;
  out.n_frames = a.n_frames + b.n_frames;
  out.config = a.config;
  out.values.resize(out.n_mels * out.n_frames);
  for (std::size_t m = 0; m < out.n_mels; ++m) {
    float* dst = out.values.data() + m * out.n_frames;
    std::copy_n(a.values.data() + m * a.n_frames, a.n_frames, dst);
    std::copy_n(b.values.data() + m * b.n_frames, b.n_frames, dst + a.n_frames);
  }
  return out;
}

MelSpectrogram crop_frames(const MelSpectrogram& spec, std::size_t start,
                           std::size_t frames) {
  if (frames == 0 || start + frames > spec.n_frames) {
    throw IndexError("crop [" + std::to_string(start) + ", " +
                     std::to_string(start + frames) + ") exceeds " +
                     std::to_string(spec.n_frames) + " frames");
  }
  MelSpectrogram out;
  out.n_mels = spec.n_mels;
  out.n_frames = frames;
  out.config = spec.config;
  out.values.resize(out.n_mels * frames);
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    std::copy_n(spec.values.data() + m * spec.n_frames + start, frames,
                out.values.data() + m * frames);
  }
  return out;
}

std::string spectrogram_csv(const MelSpectrogram& spec) {
  std::string out;
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    out += util::join_fixed(
        std::span<const float>(spec.values.data() + m * spec.n_frames,
                               spec.n_frames));
    out += '\n';
  }
  return out;
}

}  // namespace attnscope::dsp

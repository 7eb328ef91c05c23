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

#include "attnscope/train/synth.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <thread>

#include "attnscope/error.hpp"
#include "attnscope/util/rng.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::train {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string vocabulary() {
  std::string out;
  for (const char* name : kTagNames) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

double rms(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// RBJ band-pass biquad (0 dB peak gain) run over `x` in place.
void band_pass(std::vector<double>& x, double center_hz, double q, double rate) {
  const double w0 = kTwoPi * center_hz / rate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
  for (double& v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace

void validate_label(const Label& label) {
  for (std::size_t p = 0; p < kNumPairs; ++p) {
    const int a = label[2 * p], b = label[2 * p + 1];
    if (a > 1 || b > 1 || a + b != 1) {
      throw ContractError(std::string("label must activate exactly one of ") +
                          kTagNames[2 * p] + "/" + kTagNames[2 * p + 1]);
    }
  }
}

Label label_from_combination(unsigned combination) {
  if (combination >= 16) {
    throw ContractError("label combination must be in [0, 16), got " +
                        std::to_string(combination));
  }
  Label label{};
  for (std::size_t p = 0; p < kNumPairs; ++p) {
    label[2 * p + ((combination >> p) & 1u)] = 1;
  }
  return label;
}

unsigned combination_of(const Label& label) {
  validate_label(label);
  unsigned c = 0;
  for (std::size_t p = 0; p < kNumPairs; ++p) {
    if (label[2 * p + 1]) c |= 1u << p;
  }
  return c;
}

std::size_t tag_index(const std::string& name) {
  for (std::size_t i = 0; i < kNumTags; ++i) {
    if (name == kTagNames[i]) return i;
  }
  throw VocabularyError("unknown tag \"" + name + "\"; known tags: " + vocabulary());
}

Label parse_label(const std::string& text) {
  Label label{};
  for (const std::string& part : util::split(text, ',')) {
    const std::string name(util::trim(part));
    if (name.empty()) continue;
    const std::size_t i = tag_index(name);
    if (label[i]) throw ContractError("tag \"" + name + "\" listed twice");
    label[i] = 1;
  }
  validate_label(label);
  return label;
}

std::string label_string(const Label& label) {
  std::string out;
  for (std::size_t i = 0; i < kNumTags; ++i) {
    if (!label[i]) continue;
    if (!out.empty()) out += ',';
    out += kTagNames[i];
  }
  return out;
}

SynthClip synth_clip_detailed(const Label& label, std::uint64_t seed,
                              double seconds) {
  validate_label(label);
  if (!(seconds > 0.0)) throw ContractError("clip duration must be positive");
  const bool loud = label[0], vocal = label[2], fast = label[4], low = label[6];
  const double rate = kSynthRate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate));
  if (n == 0) throw ContractError("clip duration rounds to zero samples");

  util::Engine rng(seed);
  // Draw order is part of the format: changing it changes every clip.
  const double f0 = low ? util::uniform(rng, 80.0, 200.0)
                        : util::uniform(rng, 600.0, 1500.0);
  const double onset_hz = fast ? util::uniform(rng, 6.0, 8.0)
                               : util::uniform(rng, 0.5, 1.5);
  const double period = 1.0 / onset_hz;
  const double first_onset = util::uniform(rng, 0.0, period);
  const double vibrato_phase = util::uniform(rng, 0.0, kTwoPi);
  const double formant_hz = util::uniform(rng, 2000.0, 3000.0);
  std::array<double, 3> harmonic_phase{};
  for (double& p : harmonic_phase) p = util::uniform(rng, 0.0, kTwoPi);
  const std::size_t gap_len = std::min(
      n, static_cast<std::size_t>(std::llround(kGapSeconds * rate)));
  const std::size_t margin = static_cast<std::size_t>(0.1 * rate);
  std::size_t gap_begin = 0;
  if (n >= gap_len + 2 * margin) {
    gap_begin = margin + static_cast<std::size_t>(std::floor(util::uniform(
                             rng, 0.0, static_cast<double>(n - gap_len - 2 * margin + 1))));
  }

  // Amplitude envelope: a floor plus decaying pulses at the onset rate, each
  // with a 5 ms linear attack.
  const double tau = 0.3 * period;
  std::vector<double> envelope(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double since = t - first_onset - std::floor((t - first_onset) / period) * period;
    const double attack = std::min(1.0, since / 0.005);
    envelope[i] = 0.25 + 0.75 * attack * std::exp(-since / tau);
  }

  // Three harmonics with amplitudes 1, 1/2, 1/4; vocal clips get vibrato.
  std::vector<double> signal(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    double f = f0;
    if (vocal) {
      f *= 1.0 + kVibratoDepth * std::sin(kTwoPi * kVibratoHz * t + vibrato_phase);
    }
    double s = 0.0;
    for (int h = 0; h < 3; ++h) {
      s += std::ldexp(1.0, -h) * std::sin((h + 1) * phase + harmonic_phase[h]);
    }
    signal[i] = s;
    phase += kTwoPi * f / rate;
    if (phase > kTwoPi * 64.0) phase -= kTwoPi * 64.0;
  }

  if (vocal) {
    // Formant-like band of filtered noise at half the tonal level.
    std::vector<double> band(n);
    for (double& v : band) v = util::gaussian(rng);
    band_pass(band, formant_hz, 4.0, rate);
    const double scale = 0.5 * rms(signal) / std::max(rms(band), 1e-12);
    for (std::size_t i = 0; i < n; ++i) signal[i] += scale * band[i];
  }
  for (std::size_t i = 0; i < n; ++i) signal[i] *= envelope[i];

  SynthClip out;
  if (loud) {
    const double scale = kLoudRms / std::max(rms(signal), 1e-12);
    for (double& v : signal) v = kLoudPeak * std::tanh(scale * v / kLoudPeak);
  } else {
    std::fill_n(signal.begin() + static_cast<std::ptrdiff_t>(gap_begin), gap_len, 0.0);
    const double scale = kQuietRms / std::max(rms(signal), 1e-12);
    for (double& v : signal) v *= scale;
    out.gap = std::make_pair(gap_begin, gap_begin + gap_len);
  }

  out.clip.sample_rate = kSynthRate;
  out.clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = signal[i] + kNoiseRms * util::gaussian(rng);
    out.clip.samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return out;
}

dsp::PcmClip synth_clip(const Label& label, std::uint64_t seed, double seconds) {
  return synth_clip_detailed(label, seed, seconds).clip;
}

std::optional<std::pair<std::size_t, std::size_t>> gap_frames(
    std::pair<std::size_t, std::size_t> gap, const dsp::DspConfig& config) {
  const std::size_t hop = config.hop_size, win = config.window_size;
  const std::size_t first = (gap.first + hop - 1) / hop;
  if (gap.second < win || first * hop + win > gap.second) return std::nullopt;
  const std::size_t last = (gap.second - win) / hop;
  return std::make_pair(first, last);
}

void SynthSpec::validate() const {
  if (n_clips == 0) throw ConfigError("n_clips must be positive");
  if (!(clip_seconds > 0.0) || clip_seconds > 600.0) {
    throw ConfigError("clip_seconds must be in (0, 600]");
  }
  if (fixed_label) validate_label(*fixed_label);
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  for (const auto& [key, value] : util::parse_key_values(text)) {
    if (key == "n_clips") {
      const long long n = util::parse_int(value, key);
      if (n <= 0) throw ConfigError("n_clips must be positive");
      spec.n_clips = static_cast<std::size_t>(n);
    } else if (key == "clip_seconds") {
      spec.clip_seconds = util::parse_double(value, key);
    } else if (key == "seed") {
      const long long s = util::parse_int(value, key);
      if (s < 0) throw ConfigError("seed must be non-negative");
      spec.seed = static_cast<std::uint64_t>(s);
    } else if (key == "tags") {
      std::vector<std::string> names;
      for (const auto& part : util::split(value, ',')) {
        names.emplace_back(util::trim(part));
      }
      for (const auto& name : names) tag_index(name);
      if (names.size() != kNumTags ||
          !std::equal(names.begin(), names.end(), kTagNames.begin())) {
        throw ConfigError("tags must be exactly: " + vocabulary());
      }
    } else if (key == "label") {
      spec.fixed_label = parse_label(value);
    } else {
      throw ConfigError("unknown synth spec key \"" + key + "\"");
    }
  }
  spec.validate();
  return spec;
}

std::string synth_spec_text(const SynthSpec& spec) {
  std::string out = "n_clips = " + std::to_string(spec.n_clips) + "\n";
  out += "clip_seconds = " + util::format_shortest(spec.clip_seconds) + "\n";
  out += "seed = " + std::to_string(spec.seed) + "\n";
  out += "tags = " + vocabulary() + "\n";
  if (spec.fixed_label) out += "label = " + label_string(*spec.fixed_label) + "\n";
  return out;
}

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw FormatError("unknown split \"" + name + "\"");
}

std::vector<ClipRecord> plan_dataset(const SynthSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_clips;
  std::vector<ClipRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "clip_%05zu", i);
    records[i].clip_id = id;
    records[i].seed = util::derive_seed(spec.seed, i);
    if (spec.fixed_label) {
      records[i].label = *spec.fixed_label;
    } else {
      util::Engine pick(util::derive_seed(records[i].seed, 0x6c6162656cULL));
      records[i].label = label_from_combination(
          static_cast<unsigned>(std::floor(util::uniform(pick, 0.0, 16.0))));
    }
  }
  // Fisher-Yates on the portable uniform() so splits match across platforms.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  util::Engine shuffle(util::derive_seed(spec.seed, 0x73706c6974ULL));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(
        std::floor(util::uniform(shuffle, 0.0, static_cast<double>(i))));
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t n_train = n * 8 / 10, n_valid = n / 10;
  for (std::size_t r = 0; r < n; ++r) {
    records[order[r]].split = r < n_train ? Split::kTrain
                              : r < n_train + n_valid ? Split::kValid
                                                      : Split::kTest;
  }
  return records;
}

std::string manifest_csv(const std::vector<ClipRecord>& records) {
  std::string out = "clip_id,seed";
  for (const char* name : kTagNames) out += std::string(",") + name;
  out += ",split\n";
  for (const auto& r : records) {
    out += r.clip_id + "," + std::to_string(r.seed);
    for (auto v : r.label) out += v ? ",1" : ",0";
    out += std::string(",") + split_name(r.split) + "\n";
  }
  return out;
}

std::vector<ClipRecord> parse_manifest_csv(const std::string& text) {
  std::vector<ClipRecord> records;
  const auto lines = util::split(text, '\n');
  if (lines.empty() || util::trim(lines[0]) != util::trim(manifest_csv({}))) {
    throw FormatError("manifest header must be: " +
                      std::string(util::trim(manifest_csv({}))));
  }
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string_view line = util::trim(lines[ln]);
    if (line.empty()) continue;
    const auto cells = util::split(line, ',');
    if (cells.size() != kNumTags + 3) {
      throw FormatError("manifest line " + std::to_string(ln + 1) + " has " +
                        std::to_string(cells.size()) + " fields");
    }
    ClipRecord r;
    r.clip_id = cells[0];
    if (r.clip_id.empty() || r.clip_id.find_first_of("/\\") != std::string::npos ||
        r.clip_id.starts_with(".")) {
      throw FormatError("manifest line " + std::to_string(ln + 1) +
                        " has an invalid clip id");
    }
    const std::string& seed = cells[1];
    const auto [end, ec] =
        std::from_chars(seed.data(), seed.data() + seed.size(), r.seed);
    if (ec != std::errc() || end != seed.data() + seed.size()) {
      throw FormatError("manifest line " + std::to_string(ln + 1) +
                        " has an invalid seed");
    }
    for (std::size_t t = 0; t < kNumTags; ++t) {
      if (cells[2 + t] != "0" && cells[2 + t] != "1") {
        throw FormatError("manifest line " + std::to_string(ln + 1) +
                          " has a non-binary label");
      }
      r.label[t] = cells[2 + t] == "1";
    }
    try {
      validate_label(r.label);
    } catch (const ContractError& e) {
      throw FormatError("manifest line " + std::to_string(ln + 1) + ": " + e.what());
    }
    r.split = parse_split(cells[kNumTags + 2]);
    records.push_back(std::move(r));
  }
  if (records.empty()) throw FormatError("manifest lists no clips");
  return records;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == split) out.push_back(i);
  }
  return out;
}

ad::Tensor clip_input(const dsp::PcmClip& clip, const dsp::DspConfig& config,
                      std::size_t frames) {
  const dsp::MelSpectrogram spec = dsp::log_mel(clip, config);
  return dsp::extract_window(spec, 0, frames);
}

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Dataset make_dataset(const SynthSpec& spec, const dsp::DspConfig& config,
                     unsigned threads) {
  const auto records = plan_dataset(spec);
  Dataset data;
  data.items.resize(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const ClipRecord& r = records[i];
    Example& ex = data.items[i];
    ex.input = clip_input(synth_clip(r.label, r.seed, spec.clip_seconds), config);
    ex.label = r.label;
    ex.split = r.split;
    ex.seed = r.seed;
  });
  return data;
}

void write_dataset(const SynthSpec& spec, const std::filesystem::path& dir,
                   unsigned threads) {
  const auto records = plan_dataset(spec);
  std::error_code ec;
  std::filesystem::create_directories(dir / "clips", ec);
  if (ec) throw IoError("cannot create " + (dir / "clips").string());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const ClipRecord& r = records[i];
    dsp::save_wav(dir / "clips" / (r.clip_id + ".wav"),
                  synth_clip(r.label, r.seed, spec.clip_seconds));
  });
  util::write_file(dir / "manifest.csv", manifest_csv(records));
}

Dataset read_dataset(const std::filesystem::path& dir,
                     const dsp::DspConfig& config, unsigned threads) {
  if (!std::filesystem::is_directory(dir)) {
    throw IoError("dataset directory " + dir.string() + " does not exist");
  }
  const auto records = parse_manifest_csv(util::read_file(dir / "manifest.csv"));
  Dataset data;
  data.items.resize(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const ClipRecord& r = records[i];
    dsp::PcmClip clip = dsp::load_wav(dir / "clips" / (r.clip_id + ".wav"));
    if (clip.sample_rate != config.sample_rate) {
      clip = dsp::resample_linear(clip, config.sample_rate);
    }
    Example& ex = data.items[i];
    ex.input = clip_input(clip, config);
    ex.label = r.label;
    ex.split = r.split;
    ex.seed = r.seed;
  });
  return data;
}

}  // namespace attnscope::train

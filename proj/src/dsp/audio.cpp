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

#include "attnscope/dsp/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "attnscope/error.hpp"

namespace attnscope::dsp {
namespace {

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 |
         static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

void validate(const PcmClip& clip) {
  if (clip.sample_rate <= 0) {
    throw ContractError("sample rate must be positive, got " +
                        std::to_string(clip.sample_rate));
  }
  if (clip.samples.empty()) throw ContractError("clip has no samples");
  for (float s : clip.samples) {
    if (!(s >= -1.0f && s <= 1.0f)) {
      throw ContractError("sample outside [-1, 1]: " + std::to_string(s));
    }
  }
}

PcmClip decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw FormatError("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (len > bytes.size() - body) {
      throw FormatError("chunk extends past end of file");
    }
    if (tag_is(bytes, pos, "fmt ")) {
      if (len < 16) throw FormatError("fmt chunk too short");
      format = read_u16(bytes, body);
      channels = read_u16(bytes, body + 2);
      rate = read_u32(bytes, body + 4);
      bits = read_u16(bytes, body + 14);
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      data = bytes.subspan(body, len);
      have_data = true;
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (format != 1) {
    throw UnsupportedError("unsupported WAV codec " + std::to_string(format) +
                           " (only integer PCM)");
  }
  if (bits != 16) {
    throw UnsupportedError("unsupported bit depth " + std::to_string(bits) +
                           " (only 16-bit)");
  }
  if (channels != 1 && channels != 2) {
    throw UnsupportedError("unsupported channel count " +
                           std::to_string(channels));
  }
  if (rate == 0) throw FormatError("sample rate is zero");
  const std::size_t frame_bytes = 2u * channels;
  const std::size_t frames = data.size() / frame_bytes;
  if (frames == 0) throw FormatError("data chunk holds no samples");

  PcmClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto left = static_cast<std::int16_t>(read_u16(data, i * frame_bytes));
    if (channels == 1) {
      clip.samples[i] = static_cast<float>(left) / 32768.0f;
    } else {
      const auto right =
          static_cast<std::int16_t>(read_u16(data, i * frame_bytes + 2));
      clip.samples[i] =
          static_cast<float>(static_cast<int>(left) + right) / 65536.0f;
    }
  }
  return clip;
}

PcmClip load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

std::vector<std::uint8_t> encode_wav(const PcmClip& clip) {
  validate(clip);
  const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_len);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_len);
  for (float s : clip.samples) {
    const long q = std::lround(static_cast<double>(s) * 32768.0);
    put_u16(out, static_cast<std::uint16_t>(
                     static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
  }
  return out;
}

void save_wav(const std::filesystem::path& path, const PcmClip& clip) {
  const std::vector<std::uint8_t> bytes = encode_wav(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

PcmClip resample_linear(const PcmClip& clip, int target_rate) {
  if (target_rate <= 0) {
    throw ContractError("target rate must be positive, got " +
                        std::to_string(target_rate));
  }
  if (target_rate == clip.sample_rate) return clip;
  const std::size_t n = clip.samples.size();
  const auto out_len = static_cast<std::size_t>(
      static_cast<unsigned long long>(n) * target_rate / clip.sample_rate);
  PcmClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = static_cast<double>(clip.sample_rate) / target_rate;
  for (std::size_t i = 0; i < out_len; ++i) {
    const double x = static_cast<double>(i) * step;
    const auto j = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(j);
    const float a = clip.samples[std::min(j, n - 1)];
    const float b = clip.samples[std::min(j + 1, n - 1)];
    out.samples[i] = static_cast<float>(a + (b - a) * frac);
  }
  return out;
}

}  // namespace attnscope::dsp

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

// WAV decoding, resampling and the log-mel front end.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "attnscope/dsp/audio.hpp"
#include "attnscope/dsp/spectrogram.hpp"
#include "attnscope/error.hpp"
#include "test_support.hpp"

namespace attnscope {
namespace {

using dsp::PcmClip;
using testing::oracle;

void put16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_tag(std::vector<std::uint8_t>& b, const char* tag) {
  b.insert(b.end(), tag, tag + 4);
}

// Hand-assembled RIFF/WAVE with interleaved integer frames.
std::vector<std::uint8_t> wav_bytes(const std::vector<std::int16_t>& interleaved,
                                    std::uint16_t channels, std::uint32_t rate,
                                    std::uint16_t bits = 16, std::uint16_t format = 1) {
  std::vector<std::uint8_t> data;
  for (std::int16_t s : interleaved) put16(data, static_cast<std::uint16_t>(s));
  std::vector<std::uint8_t> b;
  put_tag(b, "RIFF");
  put32(b, static_cast<std::uint32_t>(36 + data.size()));
  put_tag(b, "WAVE");
  put_tag(b, "fmt ");
  put32(b, 16);
  put16(b, format);
  put16(b, channels);
  put32(b, rate);
  put32(b, rate * channels * bits / 8);
  put16(b, static_cast<std::uint16_t>(channels * bits / 8));
  put16(b, bits);
  put_tag(b, "data");
  put32(b, static_cast<std::uint32_t>(data.size()));
  b.insert(b.end(), data.begin(), data.end());
  return b;
}

PcmClip sine(double hz, double amplitude, std::size_t n, int rate = 16000) {
  PcmClip c{std::vector<float>(n), rate};
  for (std::size_t i = 0; i < n; ++i) {
    c.samples[i] = static_cast<float>(
        amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate));
  }
  return c;
}

PcmClip noise(std::size_t n, double amplitude, std::uint64_t seed) {
  PcmClip c{std::vector<float>(n), 16000};
  util::Engine e(seed);
  for (float& s : c.samples) s = static_cast<float>(util::uniform(e, -amplitude, amplitude));
  return c;
}

TEST(Wav, SilentMonoSecond) {
  const auto clip = dsp::decode_wav(wav_bytes(std::vector<std::int16_t>(16000, 0), 1, 16000));
  EXPECT_EQ(clip.sample_rate, 16000);
  ASSERT_EQ(clip.size(), 16000u);
  for (float s : clip.samples) EXPECT_EQ(s, 0.0f);
}

TEST(Wav, OppositeStereoChannelsAverageToSilence) {
  std::vector<std::int16_t> frames;
  for (int i = 0; i < 100; ++i) {
    frames.push_back(16384);
    frames.push_back(-16384);
  }
  const auto clip = dsp::decode_wav(wav_bytes(frames, 2, 16000));
  ASSERT_EQ(clip.size(), 100u);
  for (float s : clip.samples) EXPECT_EQ(s, 0.0f);
}

TEST(Wav, ThreeSampleFixtureScalesBy32768) {
  const auto& fx = oracle()["wav_3_samples"];
  const std::string hex = fx["hex"];
  std::vector<std::uint8_t> bytes;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    bytes.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  const auto clip = dsp::decode_wav(bytes);
  ASSERT_EQ(clip.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(clip.samples[i], fx["samples"][i].get<float>());
  }
  EXPECT_NEAR(clip.samples[1], 0.99997, 1e-5);
}

TEST(Wav, MalformedAndUnsupportedFilesAreRejected) {
  std::vector<std::uint8_t> junk = {'R', 'I', 'F', 'F', 0, 0};
  EXPECT_THROW(dsp::decode_wav(junk), FormatError);
  auto bytes = wav_bytes({1, 2, 3}, 1, 16000);
  bytes.resize(bytes.size() - 10);  // data chunk claims more than present
  EXPECT_THROW(dsp::decode_wav(bytes), FormatError);
  EXPECT_THROW(dsp::decode_wav(wav_bytes({1, 2, 3, 4}, 1, 16000, 16, 3)), UnsupportedError);
  EXPECT_THROW(dsp::decode_wav(wav_bytes({1, 2, 3, 4}, 1, 16000, 8)), UnsupportedError);
  EXPECT_THROW(dsp::decode_wav(wav_bytes({1, 2, 3}, 3, 16000)), UnsupportedError);
  EXPECT_THROW(dsp::load_wav("/nonexistent/clip.wav"), IoError);
}

TEST(Wav, EncodeDecodeRoundTripIsExactOnTheGrid) {
  PcmClip c{{0.0f, 0.5f, -0.5f, 32767.0f / 32768.0f, -1.0f}, 22050};
  const auto back = dsp::decode_wav(dsp::encode_wav(c));
  EXPECT_EQ(back.sample_rate, 22050);
  EXPECT_EQ(back.samples, c.samples);
}

TEST(Resample, SameRateIsIdentity) {
  const auto c = noise(1000, 0.5, 1);
  EXPECT_EQ(dsp::resample_linear(c, 16000).samples, c.samples);
}

TEST(Resample, ConstantStaysConstant) {
  PcmClip c{std::vector<float>(800, 0.3f), 8000};
  const auto up = dsp::resample_linear(c, 16000);
  ASSERT_EQ(up.size(), 1600u);
  for (float s : up.samples) EXPECT_NEAR(s, 0.3f, 1e-7);
}

TEST(Resample, RampFixtureHoldsTheLastSample) {
  const auto& fx = oracle()["resample_ramp"];
  PcmClip c{{0.0f, 1.0f}, 2};
  const auto up = dsp::resample_linear(c, 4);
  ASSERT_EQ(up.size(), fx["output"].size());
  for (std::size_t i = 0; i < up.size(); ++i) {
    EXPECT_FLOAT_EQ(up.samples[i], fx["output"][i].get<float>());
  }
}

TEST(Resample, LengthIsFloorOfRatio) {
  const auto c = noise(1001, 0.1, 2);
  EXPECT_EQ(dsp::resample_linear(c, 44100).size(), 1001u * 44100u / 16000u);
  EXPECT_EQ(dsp::resample_linear(c, 8000).size(), 500u);
}

TEST(LogMel, SilenceSitsOnTheFloor) {
  const auto spec = dsp::log_mel(PcmClip{std::vector<float>(4096, 0.0f), 16000});
  EXPECT_EQ(spec.n_mels, 96u);
  for (float v : spec.values) EXPECT_EQ(v, -10.0f);
}

TEST(LogMel, ModelWindowLengthGives256Frames) {
  const std::size_t want = oracle()["frame_count_65792"];
  const auto spec = dsp::log_mel(PcmClip{std::vector<float>(65792, 0.0f), 16000});
  EXPECT_EQ(spec.n_frames, want);
  EXPECT_EQ(want, dsp::kModelFrames);
}

TEST(LogMel, FrameCountFormulaHoldsForRandomLengths) {
  util::Engine e(3);
  const dsp::DspConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(util::uniform(e, 512.0, 6000.0));
    const std::size_t want = (n - 512) / 256 + 1;
    EXPECT_EQ(dsp::frame_count(n, cfg), want);
    if (i % 50 == 0) {
      EXPECT_EQ(dsp::log_mel(PcmClip{std::vector<float>(n, 0.0f), 16000}).n_frames, want);
    }
  }
  EXPECT_EQ(dsp::frame_count(511, cfg), 0u);
}

TEST(LogMel, SinePeaksInTheNearestMelBand) {
  const auto& fx = oracle()["mel_440"];
  const auto spec = dsp::log_mel(sine(440.0, 1.0, 16000));
  std::size_t best = 0;
  double best_value = -1e30;
  for (std::size_t m = 0; m < spec.n_mels; ++m) {
    double mean = 0.0;
    for (std::size_t t = 0; t < spec.n_frames; ++t) mean += spec.at(m, t);
    if (mean > best_value) {
      best_value = mean;
      best = m;
    }
  }
  EXPECT_EQ(best, fx["bin"].get<std::size_t>());
}

TEST(LogMel, ScalingUpNeverLowersAValue) {
  const auto c = noise(8000, 0.2, 4);
  PcmClip louder = c;
  for (float& s : louder.samples) s *= 2.0f;
  const auto a = dsp::log_mel(c);
  const auto b = dsp::log_mel(louder);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_GE(b.values[i], a.values[i]);
}

TEST(LogMel, HalvingAmplitudeCostsSixDecibels) {
  auto total_power = [](const dsp::MelSpectrogram& s) {
    double p = 0.0;
    for (float v : s.values) p += std::pow(10.0, v);
    return p;
  };
  const double full = total_power(dsp::log_mel(sine(1000.0, 1.0, 16000)));
  const double half = total_power(dsp::log_mel(sine(1000.0, 0.5, 16000)));
  const double db = 10.0 * std::log10(full / half);
  EXPECT_NEAR(db, 20.0 * std::log10(2.0), 3.0);
}

TEST(LogMel, ShortClipsAndRateMismatchAreRejected) {
  EXPECT_THROW(dsp::log_mel(PcmClip{std::vector<float>(511, 0.0f), 16000}),
               InputTooShortError);
  EXPECT_THROW(dsp::log_mel(PcmClip{std::vector<float>(4096, 0.0f), 8000}), ContractError);
}

TEST(LogMel, FilterbankRowsArePositiveTriangles) {
  const auto fb = dsp::mel_filterbank({});
  ASSERT_EQ(fb.size(), 96u);
  for (const auto& row : fb) {
    ASSERT_EQ(row.size(), 257u);
    double sum = 0.0;
    for (double w : row) {
      EXPECT_GE(w, 0.0);
      sum += w;
    }
    EXPECT_GT(sum, 0.0);
  }
}

dsp::MelSpectrogram frames_numbered(std::size_t n) {
  dsp::MelSpectrogram s;
  s.n_mels = 96;
  s.n_frames = n;
  s.values.resize(96 * n);
  for (std::size_t m = 0; m < 96; ++m) {
    for (std::size_t t = 0; t < n; ++t) s.values[m * n + t] = static_cast<float>(t) + 1000.0f * m;
  }
  return s;
}

TEST(Window, IdentitySliceAndTiling) {
  const auto s256 = frames_numbered(256);
  const auto w = dsp::extract_window(s256, 0);
  EXPECT_TRUE(std::equal(s256.values.begin(), s256.values.end(), w.data().begin()));

  const auto s512 = frames_numbered(512);
  const auto second = dsp::extract_window(s512, 256);
  for (std::size_t m = 0; m < 96; ++m) {
    for (std::size_t t = 0; t < 256; ++t) {
      EXPECT_EQ(second[m * 256 + t], s512.at(m, 256 + t));
    }
  }

  const auto& tiling = oracle()["tiling_100"];
  const auto tiled = dsp::extract_window(frames_numbered(100), 0);
  for (std::size_t t = 0; t < 256; ++t) {
    EXPECT_EQ(tiled[3 * 256 + t], 3000.0f + tiling[t].get<float>());
  }
}

TEST(Window, BadStartsThrowIndexError) {
  const auto s = frames_numbered(300);
  EXPECT_THROW(dsp::extract_window(s, -1), IndexError);
  EXPECT_THROW(dsp::extract_window(s, 45), IndexError);
}

TEST(Concat, LengthsAddAndThePrefixIsUntouched) {
  const auto a = dsp::log_mel(noise(128 * 256 + 256, 0.5, 5));
  const auto b = dsp::log_mel(PcmClip{std::vector<float>(128 * 256 + 256, 0.0f), 16000});
  ASSERT_EQ(a.n_frames, 128u);
  const auto ab = dsp::concat_spectrograms(a, b);
  EXPECT_EQ(ab.n_frames, 256u);
  double first = 0.0, second = 0.0;
  for (std::size_t m = 0; m < 96; ++m) {
    for (std::size_t t = 0; t < 128; ++t) {
      EXPECT_EQ(ab.at(m, t), a.at(m, t));
      first += ab.at(m, t);
      second += ab.at(m, 128 + t);
    }
  }
  EXPECT_GT(first, second);
  const auto bb = dsp::concat_spectrograms(b, b);
  for (float v : bb.values) EXPECT_EQ(v, -10.0f);
}

TEST(Concat, MismatchedBandsThrowShapeError) {
  auto a = frames_numbered(10);
  dsp::MelSpectrogram b = a;
  b.n_mels = 48;
  b.values.resize(48 * 10);
  b.config.n_mels = 48;
  EXPECT_THROW(dsp::concat_spectrograms(a, b), ShapeError);
}

TEST(Export, SpectrogramCsvHasSixDecimalsAndLf) {
  const auto s = dsp::log_mel(PcmClip{std::vector<float>(768, 0.0f), 16000});
  const std::string csv = dsp::spectrogram_csv(s);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  EXPECT_EQ(csv.substr(0, 10), "-10.000000");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 96);
}

}  // namespace
}  // namespace attnscope

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

#include "attnscope/model/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <system_error>

#include "attnscope/error.hpp"
#include "attnscope/util/text.hpp"

namespace attnscope::model {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks so large files are safe.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void floats(float* out, std::size_t n, const char* what) {
    if (n > remaining() / 4) truncated(what);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t v = 0;
      for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(bytes_[pos_ + 4 * i + b]) << (8 * b);
      }
      out[i] = std::bit_cast<float>(v);
    }
    pos_ += 4 * n;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (n > remaining()) truncated(what);
  }
  [[noreturn]] void truncated(const char* what) const {
    throw TruncatedError("checkpoint truncated while reading " + std::string(what) +
                         " at byte " + std::to_string(pos_) + " of " +
                         std::to_string(bytes_.size()));
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Model& model) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string json = config_to_json(model.config());
  put_u32(out, static_cast<std::uint32_t>(json.size()));
  out += json;
  put_u32(out, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& [name, tensor] : model.parameters()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t extent : tensor.shape()) {
      put_u32(out, static_cast<std::uint32_t>(extent));
    }
    for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  put_u32(out, crc32_of(reinterpret_cast<const std::uint8_t*>(out.data()), out.size()));
  return out;
}

Model deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: expected magic \"ATSC\"");
  }
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t json_len = r.u32("config length");
  const std::string json = r.text(json_len, "config");
  const std::uint32_t count = r.u32("parameter count");

  ParameterMap params;
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t name_len = r.u32("parameter name length");
    std::string name = r.text(name_len, "parameter name");
    const std::uint32_t rank = r.u32("parameter rank");
    if (rank == 0 || rank > 8) {
      throw FormatError("parameter " + name + " has implausible rank " +
                        std::to_string(rank));
    }
    ad::Shape shape(rank);
    for (auto& extent : shape) {
      extent = r.u32("parameter shape");
      if (extent == 0) throw FormatError("parameter " + name + " has a zero extent");
    }
    std::size_t n = 1;
    for (std::size_t extent : shape) {
      if (n > (std::size_t{1} << 40) / extent) {
        throw FormatError("parameter " + name + " is implausibly large");
      }
      n *= extent;
    }
    ad::Tensor t(shape);
    r.floats(t.raw(), n, "parameter data");
    if (!params.emplace(std::move(name), std::move(t)).second) {
      throw FormatError("duplicate parameter record");
    }
  }
  const std::size_t body = 4 + r.position();
  const std::uint32_t stored = r.u32("checksum");
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) +
                      " unexpected bytes after the checkpoint checksum");
  }
  const std::uint32_t actual = crc32_of(bytes.data(), body);
  if (stored != actual) {
    throw ChecksumError("checkpoint checksum mismatch (stored " +
                        std::to_string(stored) + ", computed " +
                        std::to_string(actual) + ")");
  }

  ModelConfig config;
  try {
    config = config_from_json(json);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config is invalid: ") + e.what());
  }
  try {
    return Model(std::move(config), std::move(params));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint parameters do not match its config: ") +
                      e.what());
  } catch (const NumericError& e) {
    throw FormatError(std::string("checkpoint holds a non-finite value: ") + e.what());
  }
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::filesystem::path tmp = path;
  tmp += ".partial";
  util::write_file(tmp, bytes);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at " + path.string());
  }
}

Model load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = util::read_file(path);
  return deserialize_checkpoint(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

}  // namespace attnscope::model

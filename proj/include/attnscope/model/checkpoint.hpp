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
#include <string>

#include "attnscope/model/model.hpp"

namespace attnscope::model {

// Binary layout, all integers little-endian u32:
//   "ATSC" | version | json_len | config JSON (key-sorted) | n_params |
//   n_params x { name_len | name | rank | extents... | float32 data } |
//   CRC-32 of every preceding byte
inline constexpr char kCheckpointMagic[4] = {'A', 'T', 'S', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Model& model);

// Validation order: magic (FormatError), version (VersionError), structure
// (TruncatedError when the bytes end early, FormatError on trailing bytes or
// a parameter set that disagrees with the config), checksum (ChecksumError).
// Nothing is constructed until every check has passed.
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a half-written checkpoint. Throws IoError.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace attnscope::model

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

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace attnscope::util {

// Locale-independent fixed-point formatting ('.' separator always).
std::string format_fixed(double value, int decimals = 6);

// Shortest text that parses back to exactly `value`.
std::string format_shortest(double value);

// One CSV row of fixed-point values, no trailing newline.
std::string join_fixed(std::span<const float> values, int decimals = 6);

std::vector<std::string> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);

// Flat `key = value` text; blank lines and lines starting with '#' ignored.
// Throws ConfigError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_key_values(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes bytes verbatim (LF stays LF). Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view bytes);

double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

}  // namespace attnscope::util

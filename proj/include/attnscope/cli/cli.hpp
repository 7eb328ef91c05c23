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
#include <iosfwd>
#include <string>
#include <vector>

namespace attnscope::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;       // bad flags, files, specs, tags
inline constexpr int kExitNumeric = 3;     // non-finite loss or parameters
inline constexpr int kExitCorruption = 4;  // damaged checkpoint

// Runs one command line (args[0] is the program name). Results go to `out`,
// diagnostics to `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Where a command writes its RunManifest, given its primary output.
std::filesystem::path manifest_path_for_dir(const std::filesystem::path& dir);
std::filesystem::path manifest_path_for_prefix(const std::string& prefix);

}  // namespace attnscope::cli

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

#include <stdexcept>
#include <string>

namespace attnscope {

// Every failure the library reports derives from Error; the CLI maps the
// kind to an exit code.
enum class ErrorKind {
  kFormat,
  kUnsupported,
  kInputTooShort,
  kShape,
  kIndex,
  kContract,
  kConfig,
  kVersion,
  kTruncated,
  kChecksum,
  kVocabulary,
  kIo,
  kNumeric,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define ATTNSCOPE_DEFINE_ERROR(Name, Kind)                                \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

ATTNSCOPE_DEFINE_ERROR(FormatError, kFormat)
ATTNSCOPE_DEFINE_ERROR(UnsupportedError, kUnsupported)
ATTNSCOPE_DEFINE_ERROR(InputTooShortError, kInputTooShort)
ATTNSCOPE_DEFINE_ERROR(ShapeError, kShape)
ATTNSCOPE_DEFINE_ERROR(IndexError, kIndex)
ATTNSCOPE_DEFINE_ERROR(ContractError, kContract)
ATTNSCOPE_DEFINE_ERROR(ConfigError, kConfig)
ATTNSCOPE_DEFINE_ERROR(VersionError, kVersion)
ATTNSCOPE_DEFINE_ERROR(TruncatedError, kTruncated)
ATTNSCOPE_DEFINE_ERROR(ChecksumError, kChecksum)
ATTNSCOPE_DEFINE_ERROR(VocabularyError, kVocabulary)
ATTNSCOPE_DEFINE_ERROR(IoError, kIo)
ATTNSCOPE_DEFINE_ERROR(NumericError, kNumeric)

#undef ATTNSCOPE_DEFINE_ERROR

}  // namespace attnscope

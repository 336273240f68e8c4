// Copyright 2026 The StageFuzz Authors
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
#include <string_view>

namespace stagefuzz {

enum class ErrorKind {
  kShapeMismatch,
  kInvalidParam,
  kMissingInput,
  kNumericDomain,
  kParseError,
  kPassInternal,
  kLoweringUnsupported,
  kOutOfBounds,
  kUninitializedRead,
  kIllegalTransform,
  kCorpusUnreadable,
  kSchemaViolation,
  kLoadError,
  kDegeneratePattern,
  kSynthesisFailed,
  kTestLoadError,
  kDocParseError,
  kRuleRejected,
  kMutationInapplicable,
  kConfigError,
};

std::string_view ErrorKindName(ErrorKind kind);

// Every recoverable failure in the framework is raised as an Error carrying
// a machine-readable kind; callers that turn failures into data (validation
// reports, verdicts) switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

// Parse errors carry a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message)
      : Error(ErrorKind::kParseError, "line " + std::to_string(line) +
                                          ", column " + std::to_string(column) +
                                          ": " + message),
        line_(line),
        column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace stagefuzz

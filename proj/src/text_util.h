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

// Line-oriented lexing shared by the graph and loop text formats.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "stagefuzz/tensor.h"

namespace stagefuzz::text {

std::vector<std::string> SplitLines(std::string_view src);

// Shortest text that parses back to the identical value.
std::string FormatNumber(double v, DType dtype);
double ParseNumberToken(const std::string& token);

class Cursor {
 public:
  Cursor(std::string_view line, int line_no) : line_(line), line_no_(line_no) {}

  bool AtEnd() const { return pos_ >= line_.size(); }
  char Peek() const { return AtEnd() ? '\0' : line_[pos_]; }
  int column() const { return static_cast<int>(pos_) + 1; }
  size_t pos() const { return pos_; }
  std::string_view Rest() const { return line_.substr(pos_); }

  void SkipSpace();
  // Identifier chars [A-Za-z0-9_] plus `extra`.
  std::string Word(std::string_view extra = "");
  int64_t Integer();
  double Number();
  void Expect(char ch);
  bool TryConsume(char ch);
  bool TryKeyword(std::string_view kw);
  void Keyword(std::string_view kw);
  void ExpectEnd();
  [[noreturn]] void Fail(const std::string& message, int column = -1) const;

 private:
  std::string_view line_;
  int line_no_;
  size_t pos_ = 0;
};

}  // namespace stagefuzz::text

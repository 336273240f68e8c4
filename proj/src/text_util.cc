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

#include "text_util.h"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "stagefuzz/error.h"

namespace stagefuzz::text {

std::vector<std::string> SplitLines(std::string_view src) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < src.size()) {
    size_t end = src.find('\n', start);
    if (end == std::string_view::npos) end = src.size();
    std::string line(src.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string FormatNumber(double v, DType dtype) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[48];
  if (dtype != DType::kF32 || (v == std::floor(v) && std::fabs(v) < 1e9 &&
                               !(v == 0.0 && std::signbit(v)))) {
    std::snprintf(buf, sizeof buf, "%.0f", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.9g", v);
  }
  return buf;
}

double ParseNumberToken(const std::string& token) {
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw Error(ErrorKind::kParseError, "bad number '" + token + "'");
  return v;
}

void Cursor::SkipSpace() {
  while (!AtEnd() && (line_[pos_] == ' ' || line_[pos_] == '\t')) ++pos_;
}

std::string Cursor::Word(std::string_view extra) {
  SkipSpace();
  const size_t start = pos_;
  while (!AtEnd()) {
    const char ch = line_[pos_];
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' ||
        extra.find(ch) != std::string_view::npos) {
      ++pos_;
    } else {
      break;
    }
  }
  if (pos_ == start) Fail("expected identifier");
  return std::string(line_.substr(start, pos_ - start));
}

int64_t Cursor::Integer() {
  SkipSpace();
  const size_t start = pos_;
  if (!AtEnd() && (line_[pos_] == '-' || line_[pos_] == '+')) ++pos_;
  while (!AtEnd() && std::isdigit(static_cast<unsigned char>(line_[pos_]))) ++pos_;
  if (pos_ == start || (pos_ == start + 1 && !std::isdigit(static_cast<unsigned char>(
                                                 line_[start]))))
    Fail("expected integer", static_cast<int>(start) + 1);
  return std::stoll(std::string(line_.substr(start, pos_ - start)));
}

double Cursor::Number() {
  SkipSpace();
  const size_t start = pos_;
  while (!AtEnd()) {
    const char ch = line_[pos_];
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '+' ||
        ch == '.') {
      ++pos_;
    } else {
      break;
    }
  }
  const std::string token(line_.substr(start, pos_ - start));
  try {
    return ParseNumberToken(token);
  } catch (const Error&) {
    Fail("expected number, got '" + token + "'", static_cast<int>(start) + 1);
  }
}

void Cursor::Expect(char ch) {
  SkipSpace();
  if (Peek() != ch) Fail(std::string("expected '") + ch + "'");
  ++pos_;
}

bool Cursor::TryConsume(char ch) {
  SkipSpace();
  if (Peek() != ch) return false;
  ++pos_;
  return true;
}

bool Cursor::TryKeyword(std::string_view kw) {
  SkipSpace();
  if (line_.substr(pos_, kw.size()) != kw) return false;
  pos_ += kw.size();
  return true;
}

void Cursor::Keyword(std::string_view kw) {
  if (!TryKeyword(kw)) Fail("expected '" + std::string(kw) + "'");
}

void Cursor::ExpectEnd() {
  SkipSpace();
  if (!AtEnd()) Fail("unexpected trailing text '" + std::string(Rest()) + "'");
}

void Cursor::Fail(const std::string& message, int column) const {
  throw ParseError(line_no_, column > 0 ? column : this->column(), message);
}

}  // namespace stagefuzz::text

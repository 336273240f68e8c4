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

#include "stagefuzz/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "stagefuzz/error.h"

namespace stagefuzz {

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kInvalidParam: return "InvalidParam";
    case ErrorKind::kMissingInput: return "MissingInput";
    case ErrorKind::kNumericDomain: return "NumericDomain";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kPassInternal: return "PassInternal";
    case ErrorKind::kLoweringUnsupported: return "LoweringUnsupported";
    case ErrorKind::kOutOfBounds: return "OutOfBounds";
    case ErrorKind::kUninitializedRead: return "UninitializedRead";
    case ErrorKind::kIllegalTransform: return "IllegalTransform";
    case ErrorKind::kCorpusUnreadable: return "CorpusUnreadable";
    case ErrorKind::kSchemaViolation: return "SchemaViolation";
    case ErrorKind::kLoadError: return "LoadError";
    case ErrorKind::kDegeneratePattern: return "DegeneratePattern";
    case ErrorKind::kSynthesisFailed: return "SynthesisFailed";
    case ErrorKind::kTestLoadError: return "TestLoadError";
    case ErrorKind::kDocParseError: return "DocParseError";
    case ErrorKind::kRuleRejected: return "RuleRejected";
    case ErrorKind::kMutationInapplicable: return "MutationInapplicable";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

std::string_view DTypeName(DType dtype) {
  switch (dtype) {
    case DType::kF32: return "F32";
    case DType::kI32: return "I32";
    case DType::kI8: return "I8";
    case DType::kBool: return "BOOL";
  }
  return "?";
}

std::optional<DType> ParseDType(std::string_view name) {
  if (name == "F32") return DType::kF32;
  if (name == "I32") return DType::kI32;
  if (name == "I8") return DType::kI8;
  if (name == "BOOL") return DType::kBool;
  return std::nullopt;
}

bool IsNumeric(DType dtype) { return dtype != DType::kBool; }

int64_t TensorType::NumElements() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string TensorType::ToString() const {
  std::string s(DTypeName(dtype));
  s += '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape[i]);
  }
  s += ']';
  return s;
}

std::vector<int64_t> Strides(const Shape& shape) {
  std::vector<int64_t> strides(shape.size(), 1);
  for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
    strides[i] = strides[i + 1] * shape[i + 1];
  return strides;
}

namespace {

bool InRange(DType dtype, double v) {
  switch (dtype) {
    case DType::kF32:
      return std::isnan(v) || static_cast<double>(static_cast<float>(v)) == v;
    case DType::kI32:
      return v == std::floor(v) && v >= std::numeric_limits<int32_t>::min() &&
             v <= std::numeric_limits<int32_t>::max();
    case DType::kI8:
      return v == std::floor(v) && v >= -128 && v <= 127;
    case DType::kBool:
      return v == 0.0 || v == 1.0;
  }
  return false;
}

}  // namespace

void TensorValue::Check() const {
  if (static_cast<int64_t>(data.size()) != type.NumElements())
    throw Error(ErrorKind::kInvalidParam,
                "tensor data length " + std::to_string(data.size()) +
                    " does not match " + type.ToString());
  for (double v : data)
    if (!InRange(type.dtype, v))
      throw Error(ErrorKind::kInvalidParam,
                  "element " + std::to_string(v) + " outside " +
                      std::string(DTypeName(type.dtype)));
}

TensorValue RandomTensor(const TensorType& type, uint64_t seed) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
  TensorValue v{type, {}};
  const int64_t n = type.NumElements();
  v.data.reserve(n);
  for (int64_t i = 0; i < n; ++i) {
    switch (type.dtype) {
      case DType::kF32:
        v.data.push_back(static_cast<double>(
                             std::uniform_int_distribution<int>(-16, 16)(rng)) /
                         8.0);
        break;
      case DType::kI32:
        v.data.push_back(std::uniform_int_distribution<int>(-16, 16)(rng));
        break;
      case DType::kI8:
        v.data.push_back(std::uniform_int_distribution<int>(-100, 100)(rng));
        break;
      case DType::kBool:
        v.data.push_back(std::uniform_int_distribution<int>(0, 1)(rng));
        break;
    }
  }
  return v;
}

Divergence CompareTensors(const TensorValue& expected, const TensorValue& actual,
                          Tolerance tol) {
  Divergence d;
  if (expected.type.dtype != actual.type.dtype) {
    d.equal = false;
    d.dtype_mismatch = true;
  }
  if (expected.type.shape != actual.type.shape ||
      expected.data.size() != actual.data.size()) {
    d.equal = false;
    d.shape_mismatch = true;
    return d;
  }
  const bool exact = expected.type.dtype != DType::kF32 || d.dtype_mismatch;
  for (size_t i = 0; i < expected.data.size(); ++i) {
    const double a = expected.data[i];
    const double b = actual.data[i];
    bool same;
    double abs_err = 0.0;
    double rel_err = 0.0;
    if (std::isnan(a) || std::isnan(b)) {
      same = std::isnan(a) && std::isnan(b);
      if (!same) abs_err = rel_err = std::numeric_limits<double>::infinity();
    } else if (std::isinf(a) || std::isinf(b)) {
      same = a == b;
      if (!same) abs_err = rel_err = std::numeric_limits<double>::infinity();
    } else {
      abs_err = std::fabs(a - b);
      const double scale = std::max(std::fabs(a), std::fabs(b));
      rel_err = scale > 0 ? abs_err / scale : 0.0;
      same = exact ? a == b : abs_err <= tol.abs + tol.rel * scale;
    }
    d.max_abs = std::max(d.max_abs, abs_err);
    d.max_rel = std::max(d.max_rel, rel_err);
    if (!same) {
      if (d.first_index < 0) d.first_index = static_cast<int64_t>(i);
      d.equal = false;
    }
  }
  return d;
}

namespace scalar {

std::string_view BinaryOpName(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
    case BinaryOp::kDiv: return "div";
  }
  return "?";
}

std::string_view UnaryOpName(UnaryOp op) {
  switch (op) {
    case UnaryOp::kNeg: return "neg";
    case UnaryOp::kRelu: return "relu";
    case UnaryOp::kSigmoid: return "sigmoid";
  }
  return "?";
}

double Wrap(DType dtype, int64_t value) {
  switch (dtype) {
    case DType::kI32:
      return static_cast<int32_t>(static_cast<uint32_t>(value));
    case DType::kI8:
      return static_cast<int8_t>(static_cast<uint8_t>(value));
    case DType::kBool:
      return value != 0 ? 1.0 : 0.0;
    case DType::kF32:
      return static_cast<float>(value);
  }
  return 0;
}

double Saturate(DType dtype, int64_t value) {
  switch (dtype) {
    case DType::kI32:
      return std::clamp<int64_t>(value, std::numeric_limits<int32_t>::min(),
                                 std::numeric_limits<int32_t>::max());
    case DType::kI8:
      return std::clamp<int64_t>(value, -128, 127);
    default:
      return Wrap(dtype, value);
  }
}

double Binary(BinaryOp op, DType dtype, double a, double b, bool saturate_i8) {
  if (dtype == DType::kF32) {
    const float x = static_cast<float>(a);
    const float y = static_cast<float>(b);
    float r = 0.0f;
    switch (op) {
      case BinaryOp::kAdd: r = x + y; break;
      case BinaryOp::kSub: r = x - y; break;
      case BinaryOp::kMul: r = x * y; break;
      case BinaryOp::kDiv: r = x / y; break;
    }
    return r;
  }
  const auto x = static_cast<int64_t>(a);
  const auto y = static_cast<int64_t>(b);
  int64_t r = 0;
  switch (op) {
    case BinaryOp::kAdd: r = x + y; break;
    case BinaryOp::kSub: r = x - y; break;
    case BinaryOp::kMul: r = x * y; break;
    case BinaryOp::kDiv:
      if (y == 0) throw Error(ErrorKind::kNumericDomain, "integer division by zero");
      r = x / y;
      break;
  }
  if (saturate_i8 && dtype == DType::kI8) return Saturate(dtype, r);
  return Wrap(dtype, r);
}

double Unary(UnaryOp op, DType dtype, double a) {
  if (dtype == DType::kF32) {
    const float x = static_cast<float>(a);
    switch (op) {
      case UnaryOp::kNeg: return -x;
      case UnaryOp::kRelu: return x > 0.0f ? x : 0.0f;
      case UnaryOp::kSigmoid: return 1.0f / (1.0f + std::exp(-x));
    }
  }
  const auto x = static_cast<int64_t>(a);
  switch (op) {
    case UnaryOp::kNeg: return Wrap(dtype, -x);
    case UnaryOp::kRelu: return x > 0 ? static_cast<double>(x) : 0.0;
    case UnaryOp::kSigmoid:
      throw Error(ErrorKind::kInvalidParam, "sigmoid requires F32");
  }
  return 0;
}

double Cast(DType from, DType to, double a) {
  if (from == to) return a;
  if (to == DType::kBool) return a != 0.0 ? 1.0 : 0.0;
  if (to == DType::kF32) return static_cast<float>(a);
  if (from == DType::kF32) {
    if (std::isnan(a)) return 0.0;
    const double t = std::trunc(a);
    const double lo = std::numeric_limits<int32_t>::min();
    const double hi = std::numeric_limits<int32_t>::max();
    return Wrap(to, static_cast<int64_t>(std::clamp(t, lo, hi)));
  }
  return Wrap(to, static_cast<int64_t>(a));
}

double FusedMultiplyAdd(double a, double b, double c) {
  return std::fmaf(static_cast<float>(a), static_cast<float>(b),
                   static_cast<float>(c));
}

}  // namespace scalar

}  // namespace stagefuzz

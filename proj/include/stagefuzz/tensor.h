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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stagefuzz {

enum class DType { kF32, kI32, kI8, kBool };

inline constexpr int kMaxRank = 5;

std::string_view DTypeName(DType dtype);
std::optional<DType> ParseDType(std::string_view name);
bool IsNumeric(DType dtype);

using Shape = std::vector<int64_t>;

struct TensorType {
  DType dtype = DType::kF32;
  Shape shape;

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t NumElements() const;
  std::string ToString() const;

  friend bool operator==(const TensorType&, const TensorType&) = default;
};

// Row-major strides for `shape`.
std::vector<int64_t> Strides(const Shape& shape);

// Elements are stored as doubles. F32 values are always exactly
// representable as float and integer values are always within their
// dtype's range, so a double holds every element losslessly.
struct TensorValue {
  TensorType type;
  std::vector<double> data;

  // Throws Error(kInvalidParam) on length or range violations.
  void Check() const;
};

// Deterministic test data for `type`. F32 elements are multiples of 1/8 in
// [-2, 2], so sums and products of few of them are exact in single precision.
TensorValue RandomTensor(const TensorType& type, uint64_t seed);

struct Tolerance {
  double rel = 1e-5;
  double abs = 1e-6;
};

inline constexpr Tolerance kDefaultTolerance{1e-5, 1e-6};
inline constexpr Tolerance kIntrinsicTolerance{1e-4, 1e-4};

struct Divergence {
  bool equal = true;
  bool dtype_mismatch = false;
  bool shape_mismatch = false;
  double max_abs = 0.0;
  double max_rel = 0.0;
  int64_t first_index = -1;
};

// Integers and booleans compare exactly; F32 within `tol`. NaN equals NaN
// and infinities equal only themselves.
Divergence CompareTensors(const TensorValue& expected, const TensorValue& actual,
                          Tolerance tol);

namespace scalar {

enum class BinaryOp { kAdd, kSub, kMul, kDiv };
enum class UnaryOp { kNeg, kRelu, kSigmoid };

std::string_view BinaryOpName(BinaryOp op);
std::string_view UnaryOpName(UnaryOp op);

// Reduces an integer into the two's complement range of `dtype`.
double Wrap(DType dtype, int64_t value);
double Saturate(DType dtype, int64_t value);

// Reference element semantics shared by every executor. Integer division
// by zero throws Error(kNumericDomain).
double Binary(BinaryOp op, DType dtype, double a, double b,
              bool saturate_i8 = false);
double Unary(UnaryOp op, DType dtype, double a);
double Cast(DType from, DType to, double a);
// Single-rounding multiply-add on F32.
double FusedMultiplyAdd(double a, double b, double c);

}  // namespace scalar

}  // namespace stagefuzz

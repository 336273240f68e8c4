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

// Loop-nest IR: affine loops over flat buffers. Buffers are addressed by a
// single affine index into row-major storage.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stagefuzz/graph.h"
#include "stagefuzz/tensor.h"

namespace stagefuzz::loop {

// sum(coeff * var) + constant
struct Affine {
  std::map<std::string, int64_t> terms;  // no zero coefficients
  int64_t constant = 0;

  static Affine Const(int64_t c);
  static Affine Var(const std::string& name, int64_t coeff = 1);

  bool IsConstant() const { return terms.empty(); }
  int64_t Coeff(const std::string& var) const;
  bool Uses(const std::string& var) const { return terms.count(var) > 0; }

  Affine operator+(const Affine& o) const;
  Affine operator-(const Affine& o) const;
  Affine operator*(int64_t k) const;
  Affine operator+(int64_t k) const;

  // Replaces `var` by `with`.
  Affine Substitute(const std::string& var, const Affine& with) const;
  int64_t Eval(const std::map<std::string, int64_t>& env) const;
  std::string ToString() const;

  friend bool operator==(const Affine&, const Affine&) = default;
};

struct Buffer {
  std::string name;
  DType dtype = DType::kF32;
  Shape extents;

  int64_t NumElements() const;
  TensorType type() const { return {dtype, extents}; }
  friend bool operator==(const Buffer&, const Buffer&) = default;
};

enum class AnnKind { kSerial, kParallel, kVectorize, kUnroll, kPipelined };

struct Annotation {
  AnnKind kind = AnnKind::kSerial;
  int param = 0;  // lanes, factor or depth

  static Annotation Serial() { return {}; }
  static Annotation Parallel() { return {AnnKind::kParallel, 0}; }
  static Annotation Vectorize(int lanes) { return {AnnKind::kVectorize, lanes}; }
  static Annotation Unroll(int factor) { return {AnnKind::kUnroll, factor}; }
  static Annotation Pipelined(int depth) { return {AnnKind::kPipelined, depth}; }

  bool Valid() const;
  // "" for Serial, otherwise "@vectorize(4)" etc.
  std::string Suffix() const;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

enum class ExprKind { kConst, kLoad, kBinary, kUnary, kCast, kFma };

struct Expr {
  ExprKind kind = ExprKind::kConst;
  DType dtype = DType::kF32;      // result type
  double value = 0;               // kConst
  std::string buffer;             // kLoad
  Affine index;                   // kLoad
  scalar::BinaryOp bop = scalar::BinaryOp::kAdd;
  scalar::UnaryOp uop = scalar::UnaryOp::kNeg;
  DType from = DType::kF32;       // kCast source type
  std::vector<Expr> args;

  static Expr Constant(DType dtype, double value);
  static Expr Load(const std::string& buffer, DType dtype, Affine index);
  static Expr Binary(scalar::BinaryOp op, DType dtype, Expr a, Expr b);
  static Expr Unary(scalar::UnaryOp op, DType dtype, Expr a);
  static Expr Cast(DType from, DType to, Expr a);
  static Expr Fma(DType dtype, Expr a, Expr b, Expr c);

  friend bool operator==(const Expr&, const Expr&) = default;
};

enum class Scope { kGlobal, kLocal, kCache };
std::string_view ScopeName(Scope scope);

enum class StmtKind { kFor, kStore, kAlloc, kSeq, kIf };

struct Stmt {
  StmtKind kind = StmtKind::kSeq;
  // kFor: var in [lo, hi)
  std::string var;
  Affine lo, hi;
  Annotation ann;
  // kStore: buffer[index] = value
  std::string buffer;
  Affine index;
  Expr value;
  // kAlloc: visible to later siblings and their children
  Buffer alloc;
  Scope scope = Scope::kGlobal;
  // kIf: every condition >= 0
  std::vector<Affine> conds;
  // kFor, kSeq, kIf
  std::vector<Stmt> body;

  static Stmt For(std::string var, Affine lo, Affine hi, std::vector<Stmt> body,
                  Annotation ann = {});
  static Stmt Store(std::string buffer, Affine index, Expr value);
  static Stmt Alloc(Buffer buffer, Scope scope = Scope::kGlobal);
  static Stmt Seq(std::vector<Stmt> body);
  static Stmt If(std::vector<Affine> conds, std::vector<Stmt> body);

  // Trip count when both bounds are constant.
  std::optional<int64_t> ConstantTrip() const;

  friend bool operator==(const Stmt&, const Stmt&) = default;
};

struct ConstBuffer {
  Buffer buffer;
  std::vector<double> data;
  friend bool operator==(const ConstBuffer&, const ConstBuffer&) = default;
};

struct LoopProgram {
  std::string name = "p";
  std::vector<Buffer> inputs;
  std::vector<Buffer> outputs;
  std::vector<ConstBuffer> constants;
  Stmt body = Stmt::Seq({});
  std::set<std::string> intrinsics_used;

  friend bool operator==(const LoopProgram&, const LoopProgram&) = default;
};

// Structural problems: undeclared buffers or variables, duplicate names,
// stores into read-only buffers, dtype disagreements, bad annotations.
std::vector<std::string> ValidateProgram(const LoopProgram& p);
// Throws Error(kInvalidParam) listing the problems.
void CheckProgram(const LoopProgram& p);

// One nest per node; graph output k is written to buffer "out<k>".
LoopProgram LowerGraph(const graph::Graph& g);

struct InterpOptions {
  // Executes Vectorize(l) loops whose bodies are loop-free in lock step:
  // each store evaluates all lanes before writing any. Used only after
  // VectorizeLegalize, where it must agree with serial execution.
  bool lockstep_vectorize = false;
};

using LoopBindings = std::map<std::string, TensorValue>;

// Reference loop interpreter. Returns one value per output buffer, keyed by
// name. Throws Error(kOutOfBounds), Error(kUninitializedRead),
// Error(kMissingInput) and Error(kNumericDomain).
std::map<std::string, TensorValue> InterpretLoop(const LoopProgram& p,
                                                 const LoopBindings& inputs,
                                                 const InterpOptions& options = {});

// Outputs in declaration order.
std::vector<TensorValue> OrderedOutputs(const LoopProgram& p,
                                        const std::map<std::string, TensorValue>& values);

// Random bindings for every input buffer.
LoopBindings RandomLoopBindings(const LoopProgram& p, uint64_t seed);

// Text form.
std::string SerializeLoop(const LoopProgram& p);
LoopProgram ParseLoop(std::string_view text);
LoopProgram LoadLoopFile(const std::string& path);

std::string ExprToString(const Expr& e);

// Copy with every annotation reset to Serial.
LoopProgram StripAnnotations(const LoopProgram& p);

// Path of child indices from the program body; resolves to a statement.
using StmtPath = std::vector<int>;
const Stmt* Resolve(const Stmt& root, const StmtPath& path);
Stmt* Resolve(Stmt& root, const StmtPath& path);
std::string PathToString(const StmtPath& path);

// Pre-order visit of every statement with its path.
void VisitStmts(const Stmt& root,
                const std::function<void(const Stmt&, const StmtPath&)>& fn);

}  // namespace stagefuzz::loop

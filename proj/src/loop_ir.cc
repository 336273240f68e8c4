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

#include <algorithm>
#include <numeric>

#include "stagefuzz/error.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::loop {

// ------------------------------------------------------------------ Affine

Affine Affine::Const(int64_t c) {
  Affine a;
  a.constant = c;
  return a;
}

Affine Affine::Var(const std::string& name, int64_t coeff) {
  Affine a;
  if (coeff != 0) a.terms[name] = coeff;
  return a;
}

int64_t Affine::Coeff(const std::string& var) const {
  auto it = terms.find(var);
  return it == terms.end() ? 0 : it->second;
}

Affine Affine::operator+(const Affine& o) const {
  Affine r = *this;
  r.constant += o.constant;
  for (const auto& [v, c] : o.terms) {
    const int64_t sum = r.Coeff(v) + c;
    if (sum == 0)
      r.terms.erase(v);
    else
      r.terms[v] = sum;
  }
  return r;
}

Affine Affine::operator-(const Affine& o) const { return *this + o * -1; }

Affine Affine::operator*(int64_t k) const {
  if (k == 0) return Const(0);
  Affine r;
  r.constant = constant * k;
  for (const auto& [v, c] : terms) r.terms[v] = c * k;
  return r;
}

Affine Affine::operator+(int64_t k) const {
  Affine r = *this;
  r.constant += k;
  return r;
}

Affine Affine::Substitute(const std::string& var, const Affine& with) const {
  auto it = terms.find(var);
  if (it == terms.end()) return *this;
  Affine rest = *this;
  rest.terms.erase(var);
  return rest + with * it->second;
}

int64_t Affine::Eval(const std::map<std::string, int64_t>& env) const {
  int64_t v = constant;
  for (const auto& [name, c] : terms) {
    auto it = env.find(name);
    if (it == env.end()) throw Error(ErrorKind::kInvalidParam, "unbound variable " + name);
    v += c * it->second;
  }
  return v;
}

std::string Affine::ToString() const {
  std::string out;
  for (const auto& [v, c] : terms) {
    int64_t mag = c;
    if (out.empty()) {
      if (c < 0) {
        out += "-";
        mag = -c;
      }
    } else {
      out += c < 0 ? " - " : " + ";
      mag = c < 0 ? -c : c;
    }
    if (mag != 1) out += std::to_string(mag) + "*";
    out += v;
  }
  if (out.empty()) return std::to_string(constant);
  if (constant > 0) out += " + " + std::to_string(constant);
  if (constant < 0) out += " - " + std::to_string(-constant);
  return out;
}

// ----------------------------------------------------------- Buffer, Annot

int64_t Buffer::NumElements() const {
  int64_t n = 1;
  for (int64_t e : extents) n *= e;
  return n;
}

bool Annotation::Valid() const {
  switch (kind) {
    case AnnKind::kSerial:
    case AnnKind::kParallel:
      return param == 0;
    case AnnKind::kVectorize:
    case AnnKind::kUnroll:
      return param == 2 || param == 4 || param == 8;
    case AnnKind::kPipelined:
      return param == 2 || param == 3;
  }
  return false;
}

std::string Annotation::Suffix() const {
  switch (kind) {
    case AnnKind::kSerial: return "";
    case AnnKind::kParallel: return "@parallel";
    case AnnKind::kVectorize: return "@vectorize(" + std::to_string(param) + ")";
    case AnnKind::kUnroll: return "@unroll(" + std::to_string(param) + ")";
    case AnnKind::kPipelined: return "@pipelined(" + std::to_string(param) + ")";
  }
  return "";
}

std::string_view ScopeName(Scope scope) {
  switch (scope) {
    case Scope::kGlobal: return "global";
    case Scope::kLocal: return "local";
    case Scope::kCache: return "cache";
  }
  return "?";
}

// -------------------------------------------------------------------- Expr

Expr Expr::Constant(DType dtype, double value) {
  Expr e;
  e.kind = ExprKind::kConst;
  e.dtype = dtype;
  e.value = value;
  return e;
}

Expr Expr::Load(const std::string& buffer, DType dtype, Affine index) {
  Expr e;
  e.kind = ExprKind::kLoad;
  e.dtype = dtype;
  e.buffer = buffer;
  e.index = std::move(index);
  return e;
}

Expr Expr::Binary(scalar::BinaryOp op, DType dtype, Expr a, Expr b) {
  Expr e;
  e.kind = ExprKind::kBinary;
  e.dtype = dtype;
  e.bop = op;
  e.args = {std::move(a), std::move(b)};
  return e;
}

Expr Expr::Unary(scalar::UnaryOp op, DType dtype, Expr a) {
  Expr e;
  e.kind = ExprKind::kUnary;
  e.dtype = dtype;
  e.uop = op;
  e.args = {std::move(a)};
  return e;
}

Expr Expr::Cast(DType from, DType to, Expr a) {
  Expr e;
  e.kind = ExprKind::kCast;
  e.dtype = to;
  e.from = from;
  e.args = {std::move(a)};
  return e;
}

Expr Expr::Fma(DType dtype, Expr a, Expr b, Expr c) {
  Expr e;
  e.kind = ExprKind::kFma;
  e.dtype = dtype;
  e.args = {std::move(a), std::move(b), std::move(c)};
  return e;
}

// -------------------------------------------------------------------- Stmt

Stmt Stmt::For(std::string var, Affine lo, Affine hi, std::vector<Stmt> body,
               Annotation ann) {
  Stmt s;
  s.kind = StmtKind::kFor;
  s.var = std::move(var);
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.body = std::move(body);
  s.ann = ann;
  return s;
}

Stmt Stmt::Store(std::string buffer, Affine index, Expr value) {
  Stmt s;
  s.kind = StmtKind::kStore;
  s.buffer = std::move(buffer);
  s.index = std::move(index);
  s.value = std::move(value);
  return s;
}

Stmt Stmt::Alloc(Buffer buffer, Scope scope) {
  Stmt s;
  s.kind = StmtKind::kAlloc;
  s.alloc = std::move(buffer);
  s.scope = scope;
  return s;
}

Stmt Stmt::Seq(std::vector<Stmt> body) {
  Stmt s;
  s.kind = StmtKind::kSeq;
  s.body = std::move(body);
  return s;
}

Stmt Stmt::If(std::vector<Affine> conds, std::vector<Stmt> body) {
  Stmt s;
  s.kind = StmtKind::kIf;
  s.conds = std::move(conds);
  s.body = std::move(body);
  return s;
}

std::optional<int64_t> Stmt::ConstantTrip() const {
  if (kind != StmtKind::kFor || !lo.IsConstant() || !hi.IsConstant()) return std::nullopt;
  return std::max<int64_t>(0, hi.constant - lo.constant);
}

// -------------------------------------------------------------- Validation

namespace {

struct Validator {
  std::vector<std::string> problems;
  std::map<std::string, std::pair<DType, bool>> buffers;  // dtype, writable
  std::vector<std::string> vars;

  void Fail(const std::string& msg) { problems.push_back(msg); }

  void CheckAffine(const Affine& a, const std::string& where) {
    for (const auto& [v, c] : a.terms)
      if (std::find(vars.begin(), vars.end(), v) == vars.end())
        Fail(where + ": undeclared variable '" + v + "'");
  }

  void CheckExpr(const Expr& e, const std::string& where) {
    switch (e.kind) {
      case ExprKind::kConst:
        if (!e.args.empty()) Fail(where + ": constant with operands");
        break;
      case ExprKind::kLoad: {
        auto it = buffers.find(e.buffer);
        if (it == buffers.end()) {
          Fail(where + ": load from undeclared buffer '" + e.buffer + "'");
        } else if (it->second.first != e.dtype) {
          Fail(where + ": load of " + e.buffer + " has wrong dtype");
        }
        CheckAffine(e.index, where);
        break;
      }
      case ExprKind::kBinary:
      case ExprKind::kFma:
        if (e.args.size() != (e.kind == ExprKind::kFma ? 3u : 2u)) {
          Fail(where + ": wrong operand count");
          return;
        }
        for (const auto& a : e.args)
          if (a.dtype != e.dtype) Fail(where + ": operand dtype mismatch");
        break;
      case ExprKind::kUnary:
        if (e.args.size() != 1) {
          Fail(where + ": wrong operand count");
          return;
        }
        if (e.args[0].dtype != e.dtype) Fail(where + ": operand dtype mismatch");
        if (e.uop == scalar::UnaryOp::kSigmoid && e.dtype != DType::kF32)
          Fail(where + ": sigmoid requires f32");
        break;
      case ExprKind::kCast:
        if (e.args.size() != 1) {
          Fail(where + ": wrong operand count");
          return;
        }
        if (e.args[0].dtype != e.from) Fail(where + ": cast source dtype mismatch");
        break;
    }
    for (const auto& a : e.args) CheckExpr(a, where);
  }

  void Declare(const Buffer& b, bool writable) {
    if (buffers.count(b.name)) Fail("duplicate buffer '" + b.name + "'");
    for (int64_t e : b.extents)
      if (e < 0) Fail("buffer '" + b.name + "' has a negative extent");
    buffers[b.name] = {b.dtype, writable};
  }

  void Block(const std::vector<Stmt>& body, const std::string& where) {
    std::vector<std::string> declared;
    for (size_t i = 0; i < body.size(); ++i) {
      const std::string here = where + "/" + std::to_string(i);
      const Stmt& s = body[i];
      if (s.kind == StmtKind::kAlloc) {
        Declare(s.alloc, true);
        declared.push_back(s.alloc.name);
      } else {
        Visit(s, here);
      }
    }
    for (const auto& n : declared) buffers.erase(n);
  }

  void Visit(const Stmt& s, const std::string& where) {
    switch (s.kind) {
      case StmtKind::kFor:
        CheckAffine(s.lo, where);
        CheckAffine(s.hi, where);
        if (!s.ann.Valid()) Fail(where + ": invalid annotation");
        if (std::find(vars.begin(), vars.end(), s.var) != vars.end())
          Fail(where + ": loop variable '" + s.var + "' shadows an enclosing loop");
        vars.push_back(s.var);
        Block(s.body, where);
        vars.pop_back();
        break;
      case StmtKind::kStore: {
        auto it = buffers.find(s.buffer);
        if (it == buffers.end()) {
          Fail(where + ": store to undeclared buffer '" + s.buffer + "'");
        } else {
          if (!it->second.second) Fail(where + ": store to read-only buffer '" + s.buffer + "'");
          if (it->second.first != s.value.dtype)
            Fail(where + ": stored value dtype differs from buffer '" + s.buffer + "'");
        }
        CheckAffine(s.index, where);
        CheckExpr(s.value, where);
        break;
      }
      case StmtKind::kAlloc:
        Declare(s.alloc, true);
        break;
      case StmtKind::kSeq:
        Block(s.body, where);
        break;
      case StmtKind::kIf:
        for (const auto& c : s.conds) CheckAffine(c, where);
        Block(s.body, where);
        break;
    }
  }
};

}  // namespace

std::vector<std::string> ValidateProgram(const LoopProgram& p) {
  Validator v;
  for (const auto& b : p.inputs) v.Declare(b, false);
  for (const auto& c : p.constants) {
    v.Declare(c.buffer, false);
    if (static_cast<int64_t>(c.data.size()) != c.buffer.NumElements())
      v.Fail("constant '" + c.buffer.name + "' payload size mismatch");
  }
  for (const auto& b : p.outputs) v.Declare(b, true);
  if (p.body.kind != StmtKind::kSeq) v.Fail("program body must be a sequence");
  v.Visit(p.body, "");
  return v.problems;
}

void CheckProgram(const LoopProgram& p) {
  const auto problems = ValidateProgram(p);
  if (problems.empty()) return;
  std::string msg = "invalid loop program '" + p.name + "':";
  for (const auto& s : problems) msg += "\n  " + s;
  throw Error(ErrorKind::kInvalidParam, msg);
}

// ----------------------------------------------------------------- Helpers

namespace {

void StripStmt(Stmt& s) {
  s.ann = Annotation::Serial();
  for (auto& c : s.body) StripStmt(c);
}

void Visit(const Stmt& s, StmtPath& path,
           const std::function<void(const Stmt&, const StmtPath&)>& fn) {
  fn(s, path);
  for (size_t i = 0; i < s.body.size(); ++i) {
    path.push_back(static_cast<int>(i));
    Visit(s.body[i], path, fn);
    path.pop_back();
  }
}

}  // namespace

LoopProgram StripAnnotations(const LoopProgram& p) {
  LoopProgram out = p;
  StripStmt(out.body);
  return out;
}

const Stmt* Resolve(const Stmt& root, const StmtPath& path) {
  const Stmt* s = &root;
  for (int i : path) {
    if (i < 0 || i >= static_cast<int>(s->body.size())) return nullptr;
    s = &s->body[i];
  }
  return s;
}

Stmt* Resolve(Stmt& root, const StmtPath& path) {
  return const_cast<Stmt*>(Resolve(static_cast<const Stmt&>(root), path));
}

std::string PathToString(const StmtPath& path) {
  std::string out = "/";
  for (size_t i = 0; i < path.size(); ++i) {
    if (i) out += '/';
    out += std::to_string(path[i]);
  }
  return out;
}

void VisitStmts(const Stmt& root,
                const std::function<void(const Stmt&, const StmtPath&)>& fn) {
  StmtPath path;
  Visit(root, path, fn);
}

std::vector<TensorValue> OrderedOutputs(const LoopProgram& p,
                                        const std::map<std::string, TensorValue>& values) {
  std::vector<TensorValue> out;
  for (const auto& b : p.outputs) out.push_back(values.at(b.name));
  return out;
}

LoopBindings RandomLoopBindings(const LoopProgram& p, uint64_t seed) {
  LoopBindings b;
  for (size_t i = 0; i < p.inputs.size(); ++i)
    b[p.inputs[i].name] = RandomTensor(p.inputs[i].type(), seed * 1000003 + i);
  return b;
}

}  // namespace stagefuzz::loop

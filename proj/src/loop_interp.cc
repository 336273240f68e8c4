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

// Loop interpreter. The program is first resolved into slot-indexed form
// (variables and buffers become integers), then executed with per-element
// bounds and initialization checks.

#include "stagefuzz/error.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::loop {

namespace {

struct CAffine {
  std::vector<std::pair<int, int64_t>> terms;
  int64_t constant = 0;

  int64_t Eval(const std::vector<int64_t>& env) const {
    int64_t v = constant;
    for (const auto& [slot, c] : terms) v += c * env[slot];
    return v;
  }
};

struct CExpr {
  ExprKind kind;
  DType dtype;
  DType from;
  double value = 0;
  int buffer = -1;
  CAffine index;
  scalar::BinaryOp bop;
  scalar::UnaryOp uop;
  std::vector<CExpr> args;
};

struct CStmt {
  StmtKind kind;
  int var = -1;
  CAffine lo, hi, index;
  Annotation ann;
  int buffer = -1;
  CExpr value;
  std::vector<CAffine> conds;
  std::vector<CStmt> body;
  bool loop_free = true;  // no For inside body
};

struct BufferState {
  Buffer decl;
  std::vector<double> data;
  std::vector<uint8_t> init;
};

class Compiler {
 public:
  std::vector<Buffer> decls;  // slot -> declaration
  int num_vars = 0;

  int DeclareBuffer(const Buffer& b) {
    decls.push_back(b);
    const int slot = static_cast<int>(decls.size()) - 1;
    buffer_scopes_.back()[b.name] = slot;
    return slot;
  }

  void PushScope() { buffer_scopes_.emplace_back(); }
  void PopScope() { buffer_scopes_.pop_back(); }

  CStmt Compile(const Stmt& s) {
    CStmt c;
    c.kind = s.kind;
    switch (s.kind) {
      case StmtKind::kFor: {
        c.lo = Aff(s.lo);
        c.hi = Aff(s.hi);
        c.ann = s.ann;
        c.var = num_vars++;
        vars_.emplace_back(s.var, c.var);
        c.body = Block(s.body);
        vars_.pop_back();
        break;
      }
      case StmtKind::kStore:
        c.buffer = Buf(s.buffer);
        c.index = Aff(s.index);
        c.value = Ex(s.value);
        break;
      case StmtKind::kAlloc:
        c.buffer = DeclareBuffer(s.alloc);
        break;
      case StmtKind::kSeq:
        c.body = Block(s.body);
        break;
      case StmtKind::kIf:
        for (const auto& cond : s.conds) c.conds.push_back(Aff(cond));
        c.body = Block(s.body);
        break;
    }
    for (const auto& child : c.body)
      if (child.kind == StmtKind::kFor || !child.loop_free) c.loop_free = false;
    return c;
  }

 private:
  std::vector<CStmt> Block(const std::vector<Stmt>& body) {
    PushScope();
    std::vector<CStmt> out;
    for (const auto& s : body) out.push_back(Compile(s));
    PopScope();
    return out;
  }

  int Var(const std::string& name) const {
    for (auto it = vars_.rbegin(); it != vars_.rend(); ++it)
      if (it->first == name) return it->second;
    throw Error(ErrorKind::kInvalidParam, "undeclared loop variable '" + name + "'");
  }

  int Buf(const std::string& name) const {
    for (auto it = buffer_scopes_.rbegin(); it != buffer_scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    throw Error(ErrorKind::kInvalidParam, "undeclared buffer '" + name + "'");
  }

  CAffine Aff(const Affine& a) const {
    CAffine c;
    c.constant = a.constant;
    for (const auto& [v, k] : a.terms) c.terms.emplace_back(Var(v), k);
    return c;
  }

  CExpr Ex(const Expr& e) const {
    CExpr c;
    c.kind = e.kind;
    c.dtype = e.dtype;
    c.from = e.from;
    c.value = e.value;
    c.bop = e.bop;
    c.uop = e.uop;
    if (e.kind == ExprKind::kLoad) {
      c.buffer = Buf(e.buffer);
      c.index = Aff(e.index);
    }
    for (const auto& a : e.args) c.args.push_back(Ex(a));
    return c;
  }

  std::vector<std::pair<std::string, int>> vars_;
  std::vector<std::map<std::string, int>> buffer_scopes_;
};

class Machine {
 public:
  Machine(std::vector<BufferState> buffers, int num_vars, const InterpOptions& options)
      : buffers_(std::move(buffers)), env_(num_vars, 0), options_(options) {}

  void Run(const CStmt& s) {
    switch (s.kind) {
      case StmtKind::kFor: {
        const int64_t lo = s.lo.Eval(env_), hi = s.hi.Eval(env_);
        if (options_.lockstep_vectorize && s.ann.kind == AnnKind::kVectorize && s.loop_free) {
          RunLockstep(s, lo, hi);
          break;
        }
        for (int64_t i = lo; i < hi; ++i) {
          env_[s.var] = i;
          for (const auto& c : s.body) Run(c);
        }
        break;
      }
      case StmtKind::kStore: {
        const double v = Eval(s.value);
        Write(s.buffer, s.index.Eval(env_), v);
        break;
      }
      case StmtKind::kAlloc: {
        auto& b = buffers_[s.buffer];
        const int64_t n = b.decl.NumElements();
        b.data.assign(n, 0.0);
        b.init.assign(n, 0);
        break;
      }
      case StmtKind::kSeq:
        for (const auto& c : s.body) Run(c);
        break;
      case StmtKind::kIf:
        for (const auto& cond : s.conds)
          if (cond.Eval(env_) < 0) return;
        for (const auto& c : s.body) Run(c);
        break;
    }
  }

  std::vector<BufferState>& buffers() { return buffers_; }

 private:
  // All lanes of a store read before any lane writes, as in a SIMD unit.
  void RunLockstep(const CStmt& loop, int64_t lo, int64_t hi) {
    const int64_t lanes = loop.ann.param;
    int64_t base = lo;
    std::vector<double> values(lanes);
    for (; base + lanes <= hi; base += lanes) {
      for (const auto& s : loop.body) {
        if (s.kind != StmtKind::kStore) {
          for (int64_t l = 0; l < lanes; ++l) {
            env_[loop.var] = base + l;
            Run(s);
          }
          continue;
        }
        for (int64_t l = 0; l < lanes; ++l) {
          env_[loop.var] = base + l;
          values[l] = Eval(s.value);
        }
        for (int64_t l = 0; l < lanes; ++l) {
          env_[loop.var] = base + l;
          Write(s.buffer, s.index.Eval(env_), values[l]);
        }
      }
    }
    for (int64_t i = base; i < hi; ++i) {
      env_[loop.var] = i;
      for (const auto& c : loop.body) Run(c);
    }
  }

  void Write(int slot, int64_t idx, double v) {
    auto& b = buffers_[slot];
    if (idx < 0 || idx >= static_cast<int64_t>(b.data.size()))
      throw Error(ErrorKind::kOutOfBounds, "store to " + b.decl.name + "[" +
                                               std::to_string(idx) + "] outside extent " +
                                               std::to_string(b.data.size()));
    b.data[idx] = v;
    b.init[idx] = 1;
  }

  double Read(int slot, int64_t idx) const {
    const auto& b = buffers_[slot];
    if (idx < 0 || idx >= static_cast<int64_t>(b.data.size()))
      throw Error(ErrorKind::kOutOfBounds, "load from " + b.decl.name + "[" +
                                               std::to_string(idx) + "] outside extent " +
                                               std::to_string(b.data.size()));
    if (!b.init[idx])
      throw Error(ErrorKind::kUninitializedRead,
                  "read of uninitialized " + b.decl.name + "[" + std::to_string(idx) + "]");
    return b.data[idx];
  }

  double Eval(const CExpr& e) const {
    switch (e.kind) {
      case ExprKind::kConst:
        return e.value;
      case ExprKind::kLoad:
        return Read(e.buffer, e.index.Eval(env_));
      case ExprKind::kBinary:
        return scalar::Binary(e.bop, e.dtype, Eval(e.args[0]), Eval(e.args[1]));
      case ExprKind::kUnary:
        return scalar::Unary(e.uop, e.dtype, Eval(e.args[0]));
      case ExprKind::kCast:
        return scalar::Cast(e.from, e.dtype, Eval(e.args[0]));
      case ExprKind::kFma: {
        const double a = Eval(e.args[0]), b = Eval(e.args[1]), c = Eval(e.args[2]);
        if (e.dtype == DType::kF32) return scalar::FusedMultiplyAdd(a, b, c);
        return scalar::Binary(scalar::BinaryOp::kAdd, e.dtype,
                              scalar::Binary(scalar::BinaryOp::kMul, e.dtype, a, b), c);
      }
    }
    return 0;
  }

  std::vector<BufferState> buffers_;
  std::vector<int64_t> env_;
  InterpOptions options_;
};

}  // namespace

std::map<std::string, TensorValue> InterpretLoop(const LoopProgram& p,
                                                 const LoopBindings& inputs,
                                                 const InterpOptions& options) {
  Compiler compiler;
  compiler.PushScope();
  std::vector<BufferState> states;
  for (const auto& b : p.inputs) {
    auto it = inputs.find(b.name);
    if (it == inputs.end())
      throw Error(ErrorKind::kMissingInput, "no binding for input buffer '" + b.name + "'");
    if (it->second.type != b.type())
      throw Error(ErrorKind::kMissingInput, "binding for '" + b.name + "' has type " +
                                                it->second.type.ToString() + ", expected " +
                                                b.type().ToString());
    compiler.DeclareBuffer(b);
    states.push_back({b, it->second.data, std::vector<uint8_t>(it->second.data.size(), 1)});
  }
  for (const auto& c : p.constants) {
    if (static_cast<int64_t>(c.data.size()) != c.buffer.NumElements())
      throw Error(ErrorKind::kInvalidParam, "constant '" + c.buffer.name + "' size mismatch");
    compiler.DeclareBuffer(c.buffer);
    states.push_back({c.buffer, c.data, std::vector<uint8_t>(c.data.size(), 1)});
  }
  std::vector<int> output_slots;
  for (const auto& b : p.outputs) {
    output_slots.push_back(compiler.DeclareBuffer(b));
    const int64_t n = b.NumElements();
    states.push_back({b, std::vector<double>(n, 0.0), std::vector<uint8_t>(n, 0)});
  }
  const CStmt body = compiler.Compile(p.body);
  // Alloc slots are created during compilation; fill them in.
  for (size_t i = states.size(); i < compiler.decls.size(); ++i)
    states.push_back({compiler.decls[i], {}, {}});

  Machine m(std::move(states), compiler.num_vars, options);
  m.Run(body);

  std::map<std::string, TensorValue> result;
  for (size_t k = 0; k < p.outputs.size(); ++k) {
    auto& st = m.buffers()[output_slots[k]];
    for (size_t i = 0; i < st.init.size(); ++i)
      if (!st.init[i])
        throw Error(ErrorKind::kUninitializedRead, "output " + st.decl.name + "[" +
                                                       std::to_string(i) +
                                                       "] never written");
    result[p.outputs[k].name] = TensorValue{p.outputs[k].type(), std::move(st.data)};
  }
  return result;
}

}  // namespace stagefuzz::loop

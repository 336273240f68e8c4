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

#include "stagefuzz/ll_passes.h"

#include <cstdlib>
#include <map>
#include <set>

#include "stagefuzz/error.h"

namespace stagefuzz::ll {

namespace {

using loop::AnnKind;
using loop::Annotation;
using loop::Affine;
using loop::Expr;
using loop::ExprKind;
using loop::Scope;
using loop::Stmt;
using loop::StmtKind;

// --- substitution and access collection ----------------------------------

void SubstExpr(Expr& e, const std::string& var, const Affine& with) {
  if (e.kind == ExprKind::kLoad) e.index = e.index.Substitute(var, with);
  for (auto& a : e.args) SubstExpr(a, var, with);
}

void SubstStmt(Stmt& s, const std::string& var, const Affine& with) {
  s.lo = s.lo.Substitute(var, with);
  s.hi = s.hi.Substitute(var, with);
  s.index = s.index.Substitute(var, with);
  for (auto& c : s.conds) c = c.Substitute(var, with);
  SubstExpr(s.value, var, with);
  for (auto& c : s.body) SubstStmt(c, var, with);
}

struct Access {
  std::string buffer;
  Affine index;
  bool write;
};

struct BodyFacts {
  std::vector<Access> accesses;
  std::map<std::string, std::optional<int64_t>> inner_trips;  // loop var -> trip
  bool has_alloc = false;
  bool has_loop = false;

  std::set<std::string> Written() const {
    std::set<std::string> w;
    for (const auto& a : accesses)
      if (a.write) w.insert(a.buffer);
    return w;
  }
  std::set<std::string> Read() const {
    std::set<std::string> r;
    for (const auto& a : accesses)
      if (!a.write) r.insert(a.buffer);
    return r;
  }
};

void CollectExpr(const Expr& e, BodyFacts& f) {
  if (e.kind == ExprKind::kLoad) f.accesses.push_back({e.buffer, e.index, false});
  for (const auto& a : e.args) CollectExpr(a, f);
}

void Collect(const Stmt& s, BodyFacts& f) {
  switch (s.kind) {
    case StmtKind::kFor:
      f.has_loop = true;
      f.inner_trips[s.var] = s.ConstantTrip();
      break;
    case StmtKind::kStore:
      CollectExpr(s.value, f);
      f.accesses.push_back({s.buffer, s.index, true});
      break;
    case StmtKind::kAlloc:
      f.has_alloc = true;
      break;
    default:
      break;
  }
  for (const auto& c : s.body) Collect(c, f);
}

BodyFacts Facts(const std::vector<Stmt>& body) {
  BodyFacts f;
  for (const auto& s : body) Collect(s, f);
  return f;
}

// Every access to a written buffer uses one index; returns it per buffer.
std::optional<std::map<std::string, Affine>> UniformWriteIndexes(const BodyFacts& f) {
  std::map<std::string, Affine> index;
  const auto written = f.Written();
  for (const auto& a : f.accesses) {
    if (!written.count(a.buffer)) continue;
    auto [it, inserted] = index.emplace(a.buffer, a.index);
    if (!inserted && !(it->second == a.index)) return std::nullopt;
  }
  return index;
}

bool ContainsFor(const std::vector<Stmt>& body) {
  for (const auto& s : body)
    if (s.kind == StmtKind::kFor || ContainsFor(s.body)) return true;
  return false;
}

// --- pass context ---------------------------------------------------------

class Rewriter {
 public:
  Rewriter(LLPassId pass, const LoopProgram& p, const BugSet& bugs,
           std::vector<LLTrace>& traces)
      : pass_(pass), bugs_(bugs), traces_(traces) {
    loop::VisitStmts(p.body, [&](const Stmt& s, const StmtPath&) {
      if (s.kind == StmtKind::kFor) names_.insert(s.var);
    });
  }

  // Post-order: children are rewritten before their parent.
  std::vector<Stmt> Walk(const Stmt& s, const StmtPath& path, int depth) {
    Stmt copy = s;
    copy.body.clear();
    for (size_t i = 0; i < s.body.size(); ++i) {
      StmtPath child = path;
      child.push_back(static_cast<int>(i));
      for (auto& r : Walk(s.body[i], child, depth + 1)) copy.body.push_back(std::move(r));
    }
    return Apply(std::move(copy), path, depth);
  }

  bool intrinsic_used = false;

 private:
  void Trace(const std::string& rule, const StmtPath& path, bool fired = true) {
    traces_.push_back({pass_, rule, path, fired});
  }

  std::string Fresh(const std::string& base) {
    std::string name = base;
    for (int k = 0; names_.count(name); ++k) name = base + std::to_string(k);
    names_.insert(name);
    return name;
  }

  std::vector<Stmt> Apply(Stmt s, const StmtPath& path, int depth) {
    if (pass_ == LLPassId::kIntrinsicMap) {
      if (s.kind == StmtKind::kStore) MapIntrinsics(s, path);
      return {std::move(s)};
    }
    if (s.kind != StmtKind::kFor) return {std::move(s)};
    switch (pass_) {
      case LLPassId::kTileLoops: return Tile(std::move(s), path, depth);
      case LLPassId::kReorderLoops: return Reorder(std::move(s), path);
      case LLPassId::kVectorizeLegalize: return Vectorize(std::move(s), path);
      case LLPassId::kUnrollExpand: return Unroll(std::move(s), path);
      case LLPassId::kMemLatencyHide: return Pipeline(std::move(s), path);
      case LLPassId::kIntrinsicMap: break;
    }
    return {std::move(s)};
  }

  // Parallel loops are the explicit tiling mark; the heuristic takes
  // unannotated top-level loops of trip >= 16.
  std::vector<Stmt> Tile(Stmt s, const StmtPath& path, int depth) {
    const auto trip = s.ConstantTrip();
    if (!trip || !s.lo.IsConstant()) return {std::move(s)};
    const bool marked = s.ann.kind == AnnKind::kParallel && *trip > kTileSize;
    const bool heuristic = s.ann.kind == AnnKind::kSerial && depth == 1 && *trip >= kTileMinTrip;
    if (!marked && !heuristic) return {std::move(s)};

    const int64_t lo = s.lo.constant, tiles = *trip / kTileSize, rest = *trip % kTileSize;
    const std::string inner = Fresh(s.var + "i");
    Stmt tiled = s;
    for (auto& c : tiled.body)
      SubstStmt(c, s.var, Affine::Var(s.var, kTileSize) + Affine::Var(inner) + lo);
    Stmt inner_loop = Stmt::For(inner, Affine::Const(0), Affine::Const(kTileSize),
                                std::move(tiled.body));
    tiled.lo = Affine::Const(0);
    tiled.hi = Affine::Const(tiles);
    tiled.body = {std::move(inner_loop)};
    Trace("tile.split", path);

    std::vector<Stmt> out = {std::move(tiled)};
    if (rest > 0 && !bugs_.Has(BugId::kB2)) {
      Stmt remainder = std::move(s);
      remainder.lo = Affine::Const(lo + tiles * kTileSize);
      remainder.ann = Annotation::Serial();
      out.push_back(std::move(remainder));
      Trace("tile.remainder", path);
    }
    return out;
  }

  // Swaps a perfect two-deep nest when the inner variable has the larger
  // stride in the stored indexes. Legal only when each written buffer is
  // accessed through one index that is injective over the nest.
  std::vector<Stmt> Reorder(Stmt s, const StmtPath& path) {
    if (s.body.size() != 1 || s.body[0].kind != StmtKind::kFor) return {std::move(s)};
    Stmt& in = s.body[0];
    const auto to = s.ConstantTrip(), ti = in.ConstantTrip();
    if (!to || !ti || ContainsFor(in.body)) return {std::move(s)};
    if (in.lo.Uses(s.var) || in.hi.Uses(s.var)) return {std::move(s)};

    const BodyFacts f = Facts(in.body);
    int64_t outer_stride = 0, inner_stride = 0;
    for (const auto& a : f.accesses) {
      if (!a.write) continue;
      outer_stride += std::llabs(a.index.Coeff(s.var));
      inner_stride += std::llabs(a.index.Coeff(in.var));
    }
    if (inner_stride <= outer_stride) return {std::move(s)};

    bool legal = !f.has_alloc;
    const auto indexes = UniformWriteIndexes(f);
    if (!indexes) legal = false;
    if (legal) {
      for (const auto& [buf, idx] : *indexes) {
        const int64_t co = std::llabs(idx.Coeff(s.var)), ci = std::llabs(idx.Coeff(in.var));
        const bool o_ok = *to <= 1 || co > 0, i_ok = *ti <= 1 || ci > 0;
        const bool separated = co > ci * (*ti - 1) || ci > co * (*to - 1);
        if (!(o_ok && i_ok && separated)) legal = false;
      }
    }
    if (!legal) {
      Trace("reorder.illegal", path, false);
      return {std::move(s)};
    }
    std::swap(s.var, in.var);
    std::swap(s.lo, in.lo);
    std::swap(s.hi, in.hi);
    std::swap(s.ann, in.ann);
    Trace("reorder.interchange", path);
    return {std::move(s)};
  }

  std::vector<Stmt> Vectorize(Stmt s, const StmtPath& path) {
    if (s.ann.kind != AnnKind::kVectorize) return {std::move(s)};
    const auto trip = s.ConstantTrip();
    bool keep = !ContainsFor(s.body) && trip && *trip % s.ann.param == 0;
    if (keep && !bugs_.Has(BugId::kB3)) keep = !HasLoopCarriedDependence(s);
    if (keep) {
      Trace("vec.keep", path);
    } else {
      s.ann = Annotation::Serial();
      Trace("vec.demote", path);
    }
    return {std::move(s)};
  }

  std::vector<Stmt> Unroll(Stmt s, const StmtPath& path) {
    if (s.ann.kind != AnnKind::kUnroll) return {std::move(s)};
    const auto trip = s.ConstantTrip();
    if (!trip || !s.lo.IsConstant()) {
      s.ann = Annotation::Serial();
      Trace("unroll.skip", path, false);
      return {std::move(s)};
    }
    const int64_t f = s.ann.param, lo = s.lo.constant;
    const int64_t main = *trip / f, rest = *trip % f;
    bool scoped = false;
    for (const auto& c : s.body) scoped |= c.kind == StmtKind::kAlloc;

    std::vector<Stmt> out;
    if (main > 0) {
      std::vector<Stmt> body;
      for (int64_t j = 0; j < f; ++j) {
        std::vector<Stmt> copy = s.body;
        for (auto& c : copy) SubstStmt(c, s.var, Affine::Var(s.var, f) + (lo + j));
        if (scoped) {
          body.push_back(Stmt::Seq(std::move(copy)));
        } else {
          for (auto& c : copy) body.push_back(std::move(c));
        }
      }
      out.push_back(Stmt::For(s.var, Affine::Const(0), Affine::Const(main), std::move(body)));
      Trace("unroll.expand", path);
    }
    if (rest > 0) {
      const int64_t shift = bugs_.Has(BugId::kB1) ? 1 : 0;
      Stmt remainder = std::move(s);
      remainder.lo = Affine::Const(lo + main * f + shift);
      remainder.hi = Affine::Const(lo + *trip + shift);
      remainder.ann = Annotation::Serial();
      out.push_back(std::move(remainder));
      Trace("unroll.remainder", path);
    }
    return out;
  }

  // for t: [alloc cache s; L(t) writes s; C(t) reads s] becomes
  //   alloc cache s': [T, ...]; L(lo..lo+d-1);
  //   for t: [L(t+d-1); C(t)]; C(tail)
  // with iteration t using slice t-lo of s'.
  std::vector<Stmt> Pipeline(Stmt s, const StmtPath& path) {
    if (s.ann.kind != AnnKind::kPipelined) return {std::move(s)};
    if (s.body.empty() || s.body[0].kind != StmtKind::kAlloc ||
        s.body[0].scope != Scope::kCache)
      return {std::move(s)};
    const std::string stage = s.body[0].alloc.name;
    const int64_t d = s.ann.param;

    size_t split = 1;
    while (split < s.body.size() && Facts({s.body[split]}).Written().count(stage)) ++split;
    std::vector<Stmt> load(s.body.begin() + 1, s.body.begin() + split);
    std::vector<Stmt> compute(s.body.begin() + split, s.body.end());

    const auto trip = s.ConstantTrip();
    const BodyFacts lf = Facts(load), cf = Facts(compute);
    bool legal = trip && *trip >= d && !load.empty() && !compute.empty() && !lf.has_alloc;
    if (legal) {
      const auto lw = lf.Written();
      legal = lw.size() == 1 && !cf.Written().count(stage);
      for (const auto& b : cf.Written()) legal = legal && !lf.Read().count(b);
    }
    if (!legal) {
      Trace("pipeline.skip", path, false);
      return {std::move(s)};
    }

    const Affine lo = s.lo, hi = s.hi;
    loop::Buffer expanded = s.body[0].alloc;
    const int64_t slice = expanded.NumElements();
    expanded.extents.insert(expanded.extents.begin(), *trip);
    const Affine offset = (Affine::Var(s.var) - lo) * slice;
    for (auto* block : {&load, &compute})
      for (auto& st : *block) Reindex(st, stage, offset);

    auto shifted = [&](std::vector<Stmt> body, int64_t by) {
      for (auto& st : body) SubstStmt(st, s.var, Affine::Var(s.var) + by);
      return body;
    };
    std::vector<Stmt> steady = shifted(load, d - 1);
    for (auto& st : compute) steady.push_back(st);

    std::vector<Stmt> out;
    out.push_back(Stmt::Alloc(expanded, Scope::kCache));
    out.push_back(Stmt::For(s.var, lo, lo + (d - 1), load));
    out.push_back(Stmt::For(s.var, lo, hi + (1 - d), std::move(steady)));
    out.push_back(Stmt::For(s.var, hi + (1 - d), hi, std::move(compute)));
    Trace("pipeline.double_buffer", path);
    return {Stmt::Seq(std::move(out))};
  }

  static void ReindexExpr(Expr& e, const std::string& buf, const Affine& offset) {
    if (e.kind == ExprKind::kLoad && e.buffer == buf) e.index = e.index + offset;
    for (auto& a : e.args) ReindexExpr(a, buf, offset);
  }

  static void Reindex(Stmt& s, const std::string& buf, const Affine& offset) {
    if (s.kind == StmtKind::kStore && s.buffer == buf) s.index = s.index + offset;
    ReindexExpr(s.value, buf, offset);
    for (auto& c : s.body) Reindex(c, buf, offset);
  }

  static bool IsBin(const Expr& e, scalar::BinaryOp op) {
    return e.kind == ExprKind::kBinary && e.bop == op && e.dtype == DType::kF32;
  }

  // a*b + c and c + a*b become fma(a, b, c).
  bool Fuse(Expr& e) {
    bool changed = false;
    for (auto& a : e.args) changed |= Fuse(a);
    if (IsBin(e, scalar::BinaryOp::kAdd)) {
      for (int k = 0; k < 2; ++k) {
        if (!IsBin(e.args[k], scalar::BinaryOp::kMul)) continue;
        Expr mul = e.args[k], other = e.args[1 - k];
        e = Expr::Fma(DType::kF32, mul.args[0], mul.args[1], other);
        return true;
      }
    }
    if (bugs_.Has(BugId::kB4) && IsBin(e, scalar::BinaryOp::kMul) &&
        IsBin(e.args[1], scalar::BinaryOp::kAdd)) {
      Expr add = e.args[1];
      e = Expr::Fma(DType::kF32, e.args[0], add.args[0], add.args[1]);
      return true;
    }
    return changed;
  }

  void MapIntrinsics(Stmt& s, const StmtPath& path) {
    if (Fuse(s.value)) {
      intrinsic_used = true;
      Trace("intrin.fma", path);
    }
  }

  LLPassId pass_;
  BugSet bugs_;
  std::vector<LLTrace>& traces_;
  std::set<std::string> names_;
};

}  // namespace

bool HasLoopCarriedDependence(const Stmt& s) {
  const BodyFacts f = Facts(s.body);
  if (f.has_alloc) return true;
  const auto indexes = UniformWriteIndexes(f);
  if (!indexes) return true;
  const auto trip = s.ConstantTrip();
  if (trip && *trip <= 1) return false;
  for (const auto& [buf, idx] : *indexes) {
    const int64_t stride = std::llabs(idx.Coeff(s.var));
    if (stride == 0) return true;
    // Elements touched by one iteration must not reach the next one.
    int64_t span = 0;
    for (const auto& [v, c] : idx.terms) {
      auto it = f.inner_trips.find(v);
      if (it == f.inner_trips.end()) continue;
      if (!it->second) return true;
      span += std::llabs(c) * (*it->second - 1);
    }
    if (stride <= span) return true;
  }
  return false;
}

Tolerance ToleranceFor(const LoopProgram& p) {
  return p.intrinsics_used.empty() ? kDefaultTolerance : kIntrinsicTolerance;
}

std::string_view LLPassName(LLPassId pass) {
  switch (pass) {
    case LLPassId::kUnrollExpand: return "UnrollExpand";
    case LLPassId::kTileLoops: return "TileLoops";
    case LLPassId::kVectorizeLegalize: return "VectorizeLegalize";
    case LLPassId::kReorderLoops: return "ReorderLoops";
    case LLPassId::kIntrinsicMap: return "IntrinsicMap";
    case LLPassId::kMemLatencyHide: return "MemLatencyHide";
  }
  return "?";
}

std::optional<LLPassId> ParseLLPassId(std::string_view name) {
  for (LLPassId p : LLPipelineOrder())
    if (LLPassName(p) == name) return p;
  return std::nullopt;
}

const std::vector<LLPassId>& LLPipelineOrder() {
  static const std::vector<LLPassId> order = {
      LLPassId::kTileLoops,    LLPassId::kReorderLoops,   LLPassId::kVectorizeLegalize,
      LLPassId::kUnrollExpand, LLPassId::kMemLatencyHide, LLPassId::kIntrinsicMap,
  };
  return order;
}

const std::vector<std::string>& KnownLLRuleIds(LLPassId pass) {
  static const std::map<LLPassId, std::vector<std::string>> rules = {
      {LLPassId::kTileLoops, {"tile.split", "tile.remainder"}},
      {LLPassId::kReorderLoops, {"reorder.interchange", "reorder.illegal"}},
      {LLPassId::kVectorizeLegalize, {"vec.keep", "vec.demote"}},
      {LLPassId::kUnrollExpand, {"unroll.expand", "unroll.remainder", "unroll.skip"}},
      {LLPassId::kMemLatencyHide, {"pipeline.double_buffer", "pipeline.skip"}},
      {LLPassId::kIntrinsicMap, {"intrin.fma"}},
  };
  return rules.at(pass);
}

LLPassResult RunLLPass(LLPassId pass, const LoopProgram& p, const BugSet& bugs) {
  LLPassResult result{p, {}};
  try {
    Rewriter rw(pass, p, bugs, result.traces);
    auto body = rw.Walk(p.body, {}, 0);
    if (body.size() != 1) throw Error(ErrorKind::kPassInternal, "root statement split");
    result.program.body = std::move(body[0]);
    if (rw.intrinsic_used) result.program.intrinsics_used.insert("fma");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kPassInternal) throw;
    throw Error(ErrorKind::kPassInternal, std::string(LLPassName(pass)) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kPassInternal, std::string(LLPassName(pass)) + ": " + e.what());
  }
  const auto problems = loop::ValidateProgram(result.program);
  if (!problems.empty()) {
    std::string msg;
    for (const auto& pr : problems) msg += (msg.empty() ? "" : "; ") + pr;
    throw Error(ErrorKind::kPassInternal,
                std::string(LLPassName(pass)) + " produced an invalid program: " + msg);
  }
  return result;
}

LLPipelineResult RunLLPipeline(int level, const LoopProgram& p, const BugSet& bugs,
                               bool record_steps) {
  LLPipelineResult result{p, {}, {}};
  if (level <= 0) return result;
  for (LLPassId pass : LLPipelineOrder()) {
    LLPassResult r = RunLLPass(pass, result.program, bugs);
    result.program = std::move(r.program);
    if (record_steps) result.steps.push_back({pass, result.program, r.traces});
    result.traces.insert(result.traces.end(), r.traces.begin(), r.traces.end());
  }
  return result;
}

}  // namespace stagefuzz::ll

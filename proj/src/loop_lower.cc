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

// Graph to loop-IR lowering. Each node becomes one nest whose operation
// order matches the graph interpreter, so results compare bit for bit.

#include <set>

#include "stagefuzz/error.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::loop {

namespace {

using graph::Node;
using graph::NodeId;
using graph::OpKind;
using scalar::BinaryOp;

std::vector<std::string> Vars(const std::string& prefix, size_t n) {
  std::vector<std::string> v;
  for (size_t i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
  return v;
}

Affine Linear(const std::vector<std::string>& vars, const std::vector<int64_t>& strides) {
  Affine a;
  for (size_t d = 0; d < vars.size(); ++d) a = a + Affine::Var(vars[d], strides[d]);
  return a;
}

// Index into a buffer of `in_shape` broadcast against an output indexed by
// `vars` (right-aligned; extent-1 dims do not move).
Affine BroadcastIndex(const std::vector<std::string>& vars, const Shape& in_shape) {
  const auto strides = Strides(in_shape);
  const size_t offset = vars.size() - in_shape.size();
  Affine a;
  for (size_t d = 0; d < in_shape.size(); ++d)
    if (in_shape[d] != 1) a = a + Affine::Var(vars[offset + d], strides[d]);
  return a;
}

// Wraps `inner` in one loop per dimension of `shape`, outermost first.
Stmt Nest(const Shape& shape, const std::vector<std::string>& vars,
          std::vector<Stmt> inner) {
  std::vector<Stmt> body = std::move(inner);
  for (size_t d = shape.size(); d-- > 0;)
    body = {Stmt::For(vars[d], Affine::Const(0), Affine::Const(shape[d]), std::move(body))};
  return body.size() == 1 ? std::move(body[0]) : Stmt::Seq(std::move(body));
}

bool IsBinary(OpKind k) { return graph::IsBinaryElementwise(k); }

BinaryOp ToBinary(OpKind k) {
  switch (k) {
    case OpKind::kAdd: return BinaryOp::kAdd;
    case OpKind::kSub: return BinaryOp::kSub;
    case OpKind::kMul: return BinaryOp::kMul;
    default: return BinaryOp::kDiv;
  }
}

scalar::UnaryOp ToUnary(OpKind k) {
  switch (k) {
    case OpKind::kNeg: return scalar::UnaryOp::kNeg;
    case OpKind::kRelu: return scalar::UnaryOp::kRelu;
    default: return scalar::UnaryOp::kSigmoid;
  }
}

class Lowerer {
 public:
  explicit Lowerer(const graph::Graph& g) : g_(g) {}

  LoopProgram Run() {
    p_.name = g_.name;
    auto order = graph::TopologicalOrder(g_);
    if (!order) throw Error(ErrorKind::kLoweringUnsupported, "graph is not a DAG");
    const auto live_list = graph::LiveNodes(g_);
    const std::set<NodeId> live(live_list.begin(), live_list.end());
    // Operator nodes listed as outputs write their first output buffer
    // directly; sources and repeated outputs get a copy nest.
    std::map<NodeId, size_t> direct;
    for (size_t k = 0; k < g_.outputs.size(); ++k) {
      const Node& n = g_.at(g_.outputs[k]);
      if (n.kind != OpKind::kInput && n.kind != OpKind::kConstant) direct.emplace(n.id, k);
    }
    for (NodeId id : *order) {
      if (!live.count(id)) continue;
      const Node& n = g_.at(id);
      if (n.kind == OpKind::kInput) {
        name_[id] = std::get<std::string>(n.params.at("name"));
        p_.inputs.push_back({name_[id], n.out_type.dtype, n.out_type.shape});
      } else if (n.kind == OpKind::kConstant) {
        name_[id] = "c" + std::to_string(id);
        p_.constants.push_back({{name_[id], n.out_type.dtype, n.out_type.shape}, n.payload});
      } else if (auto k = direct.find(id); k != direct.end()) {
        name_[id] = "out" + std::to_string(k->second);
        LowerNode(n);
      } else {
        name_[id] = "t" + std::to_string(id);
        body().push_back(Stmt::Alloc({name_[id], n.out_type.dtype, n.out_type.shape}));
        LowerNode(n);
      }
    }
    for (size_t k = 0; k < g_.outputs.size(); ++k) {
      const Node& n = g_.at(g_.outputs[k]);
      const std::string out = "out" + std::to_string(k);
      p_.outputs.push_back({out, n.out_type.dtype, n.out_type.shape});
      if (name_.at(n.id) == out) continue;
      const auto v = Vars("i", 1);
      body().push_back(Nest({n.out_type.NumElements()}, v,
                            {Stmt::Store(out, Affine::Var("i0"),
                                         Load(n.id, Affine::Var("i0")))}));
    }
    return std::move(p_);
  }

 private:
  std::vector<Stmt>& body() { return p_.body.body; }
  const TensorType& TypeOf(NodeId id) const { return g_.at(id).out_type; }
  Expr Load(NodeId id, Affine index) const {
    return Expr::Load(name_.at(id), TypeOf(id).dtype, std::move(index));
  }

  void LowerNode(const Node& n) {
    const std::string& dst = name_.at(n.id);
    const Shape& out = n.out_type.shape;
    const DType dt = n.out_type.dtype;
    const auto vars = Vars("i", out.size());
    const Affine out_index = Linear(vars, Strides(out));
    const Expr zero = Expr::Constant(dt, 0);

    if (graph::IsElementwise(n.kind) || n.kind == OpKind::kCast ||
        n.kind == OpKind::kFusedGroup) {
      body().push_back(Nest(out, vars, {Stmt::Store(dst, out_index, ElementExpr(n, vars))}));
      return;
    }
    switch (n.kind) {
      case OpKind::kMatMul: {
        const Shape& a = TypeOf(n.inputs[0]).shape;
        const int64_t k = a[1], cols = out[1];
        const Expr x = Load(n.inputs[0], Affine::Var("i0", k) + Affine::Var("r0"));
        const Expr w = Load(n.inputs[1], Affine::Var("r0", cols) + Affine::Var("i1"));
        body().push_back(Nest(out, vars, Accumulate(dst, dt, out_index, {"r0"}, {k}, x, w)));
        return;
      }
      case OpKind::kConv2D:
        LowerConv(n);
        return;
      case OpKind::kReshape: {
        const auto v = Vars("i", 1);
        body().push_back(Nest({n.out_type.NumElements()}, v,
                              {Stmt::Store(dst, Affine::Var("i0"),
                                           Load(n.inputs[0], Affine::Var("i0")))}));
        return;
      }
      case OpKind::kTranspose: {
        const auto& perm = std::get<std::vector<int64_t>>(n.params.at("perm"));
        const auto in_strides = Strides(TypeOf(n.inputs[0]).shape);
        Affine src;
        for (size_t d = 0; d < perm.size(); ++d)
          src = src + Affine::Var(vars[d], in_strides[perm[d]]);
        body().push_back(Nest(out, vars, {Stmt::Store(dst, out_index, Load(n.inputs[0], src))}));
        return;
      }
      case OpKind::kConcat: {
        const int rank = static_cast<int>(out.size());
        int64_t axis = std::get<int64_t>(n.params.at("axis"));
        if (axis < 0) axis += rank;
        const auto out_strides = Strides(out);
        int64_t offset = 0;
        for (NodeId in : n.inputs) {
          const Shape& s = TypeOf(in).shape;
          Affine idx = Linear(vars, out_strides) + offset * out_strides[axis];
          body().push_back(
              Nest(s, vars, {Stmt::Store(dst, idx, Load(in, Linear(vars, Strides(s))))}));
          offset += s[axis];
        }
        return;
      }
      case OpKind::kReduceSum: {
        const Shape& s = TypeOf(n.inputs[0]).shape;
        const int rank = static_cast<int>(s.size());
        std::vector<bool> mask(rank, false);
        for (int64_t a : std::get<std::vector<int64_t>>(n.params.at("axes")))
          mask[a < 0 ? a + rank : a] = true;
        Shape kept;
        for (int d = 0; d < rank; ++d)
          if (!mask[d]) kept.push_back(s[d]);
        const auto kept_strides = Strides(kept);
        const auto in_vars = Vars("i", rank);
        Affine idx;
        for (int d = 0, k = 0; d < rank; ++d)
          if (!mask[d]) idx = idx + Affine::Var(in_vars[d], kept_strides[k++]);
        body().push_back(Nest(out, vars, {Stmt::Store(dst, out_index, zero)}));
        const Expr sum = Expr::Binary(BinaryOp::kAdd, dt, Expr::Load(dst, dt, idx),
                                      Load(n.inputs[0], Linear(in_vars, Strides(s))));
        body().push_back(Nest(s, in_vars, {Stmt::Store(dst, idx, sum)}));
        return;
      }
      case OpKind::kPad: {
        const auto& pads = std::get<std::vector<int64_t>>(n.params.at("pads"));
        const Shape& s = TypeOf(n.inputs[0]).shape;
        const auto out_strides = Strides(out);
        body().push_back(Nest(out, vars, {Stmt::Store(dst, out_index, zero)}));
        Affine idx = Linear(vars, out_strides);
        for (size_t d = 0; d < s.size(); ++d) idx = idx + pads[d] * out_strides[d];
        body().push_back(
            Nest(s, vars, {Stmt::Store(dst, idx, Load(n.inputs[0], Linear(vars, Strides(s))))}));
        return;
      }
      default:
        throw Error(ErrorKind::kLoweringUnsupported,
                    "cannot lower " + std::string(graph::OpKindName(n.kind)));
    }
  }

  // dst[idx] = 0; for r...: dst[idx] = dst[idx] + x * w
  std::vector<Stmt> Accumulate(const std::string& dst, DType dt, const Affine& idx,
                               const std::vector<std::string>& rvars, const Shape& rext,
                               const Expr& x, const Expr& w,
                               std::vector<Affine> guard = {}) {
    Stmt update = Stmt::Store(
        dst, idx,
        Expr::Binary(BinaryOp::kAdd, dt, Expr::Load(dst, dt, idx),
                     Expr::Binary(BinaryOp::kMul, dt, x, w)));
    std::vector<Stmt> inner{std::move(update)};
    if (!guard.empty()) inner = {Stmt::If(std::move(guard), std::move(inner))};
    return {Stmt::Store(dst, idx, Expr::Constant(dt, 0)), Nest(rext, rvars, std::move(inner))};
  }

  void LowerConv(const Node& n) {
    const TensorType& xt = TypeOf(n.inputs[0]);
    const TensorType& wt = TypeOf(n.inputs[1]);
    const bool nhwc = [&] {
      auto it = n.params.find("layout");
      return it != n.params.end() && std::get<std::string>(it->second) == "NHWC";
    }();
    std::vector<int64_t> stride{1, 1};
    if (auto it = n.params.find("stride"); it != n.params.end())
      stride = std::get<std::vector<int64_t>>(it->second);
    std::vector<int64_t> pad{0, 0, 0, 0};
    if (auto it = n.params.find("pad"); it != n.params.end()) {
      const auto& p = std::get<std::vector<int64_t>>(it->second);
      pad = p.size() == 2 ? std::vector<int64_t>{p[0], p[1], p[0], p[1]} : p;
    }
    const int64_t C = nhwc ? xt.shape[3] : xt.shape[1];
    const int64_t H = nhwc ? xt.shape[1] : xt.shape[2];
    const int64_t W = nhwc ? xt.shape[2] : xt.shape[3];
    const int64_t KH = wt.shape[2], KW = wt.shape[3];
    const Shape& out = n.out_type.shape;
    const DType dt = n.out_type.dtype;
    const auto vars = Vars("i", 4);
    // Output loop variables in storage order.
    const std::string vn = "i0";
    const std::string vo = nhwc ? "i3" : "i1";
    const std::string voh = nhwc ? "i1" : "i2";
    const std::string vow = nhwc ? "i2" : "i3";
    const Affine ih = Affine::Var(voh, stride[0]) + Affine::Var("r1") + -pad[0];
    const Affine iw = Affine::Var(vow, stride[1]) + Affine::Var("r2") + -pad[1];
    const Affine c = Affine::Var("r0");
    const Affine x_idx = nhwc ? ((Affine::Var(vn) * H + ih) * W + iw) * C + c
                              : ((Affine::Var(vn) * C + c) * H + ih) * W + iw;
    const Affine w_idx = ((Affine::Var(vo) * C + c) * KH + Affine::Var("r1")) * KW +
                         Affine::Var("r2");
    std::vector<Affine> guard;
    if (pad[0] > 0) guard.push_back(ih);
    if (pad[2] > 0) guard.push_back(Affine::Const(H - 1) - ih);
    if (pad[1] > 0) guard.push_back(iw);
    if (pad[3] > 0) guard.push_back(Affine::Const(W - 1) - iw);
    const Affine out_index = Linear(vars, Strides(out));
    body().push_back(Nest(out, vars,
                          Accumulate(name_.at(n.id), dt, out_index, {"r0", "r1", "r2"},
                                     {C, KH, KW}, Load(n.inputs[0], x_idx),
                                     Load(n.inputs[1], w_idx), std::move(guard))));
  }

  Expr ElementExpr(const Node& n, const std::vector<std::string>& vars) const {
    const DType dt = n.out_type.dtype;
    auto operand = [&](NodeId id) { return Load(id, BroadcastIndex(vars, TypeOf(id).shape)); };
    if (n.kind == OpKind::kCast) return Expr::Cast(TypeOf(n.inputs[0]).dtype, dt, operand(n.inputs[0]));
    if (n.kind != OpKind::kFusedGroup) {
      if (IsBinary(n.kind))
        return Expr::Binary(ToBinary(n.kind), dt, operand(n.inputs[0]), operand(n.inputs[1]));
      return Expr::Unary(ToUnary(n.kind), dt, operand(n.inputs[0]));
    }
    std::vector<Expr> steps;
    for (const auto& step : n.fused) {
      std::vector<Expr> args;
      for (int a : step.args) args.push_back(a >= 0 ? operand(n.inputs[a]) : steps[-a - 1]);
      if (IsBinary(step.kind))
        steps.push_back(Expr::Binary(ToBinary(step.kind), dt, args[0], args[1]));
      else
        steps.push_back(Expr::Unary(ToUnary(step.kind), dt, args[0]));
    }
    return steps.back();
  }

  const graph::Graph& g_;
  LoopProgram p_;
  std::map<NodeId, std::string> name_;
};

}  // namespace

LoopProgram LowerGraph(const graph::Graph& g) { return Lowerer(g).Run(); }

}  // namespace stagefuzz::loop

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

#include "stagefuzz/graph_gen.h"

#include <algorithm>
#include <numeric>

#include "stagefuzz/error.h"

namespace stagefuzz::gen {

using graph::Graph;
using graph::GraphBuilder;
using graph::Node;
using graph::NodeId;
using graph::OpKind;
using graph::Params;

std::vector<double> RandomPayload(const TensorType& type, std::mt19937_64& rng,
                                  bool nonzero) {
  std::vector<double> data = RandomTensor(type, rng()).data;
  if (nonzero)
    for (double& v : data)
      if (v == 0) v = type.dtype == DType::kF32 ? 0.5 : 3;
  return data;
}

namespace {

class Generator {
 public:
  Generator(uint64_t seed, const GraphGenOptions& options)
      : rng_(seed ^ 0xA0761D6478BD642FULL), options_(options), builder_("rand") {}

  Graph Run() {
    const int target = Uniform(options_.min_nodes, options_.max_nodes);
    const double r = Real();
    dtype_ = r < 0.8 ? DType::kF32 : (r < 0.92 ? DType::kI32 : DType::kI8);
    const int num_inputs = Uniform(1, 3);
    for (int i = 0; i < num_inputs; ++i) {
      Shape shape;
      if (i == 0 && Real() < 0.3) {
        shape = {Uniform(1, 2), Uniform(1, 3), Uniform(3, 5), Uniform(3, 5)};
      } else if (i == 0 && Real() < 0.3) {
        shape = {Uniform(1, 4), Uniform(1, 4)};
      } else {
        shape = RandomShape();
      }
      builder_.Input("in" + std::to_string(i), {dtype_, shape});
    }
    for (int attempt = 0; attempt < 400 && Size() < target; ++attempt) Step();

    Graph& g = builder_.graph();
    const auto counts = graph::ConsumerCounts(g);
    for (const auto& [id, node] : g.nodes) {
      if (node.kind == OpKind::kInput || node.kind == OpKind::kConstant) continue;
      auto it = counts.find(id);
      const bool sink = it == counts.end() || it->second == 0;
      if ((sink && Real() < 0.92) || (!sink && Real() < 0.08)) builder_.Output(id);
    }
    if (g.outputs.empty()) {
      NodeId last = g.nodes.rbegin()->first;
      builder_.Output(last);
    }
    return builder_.Build();
  }

 private:
  int64_t Uniform(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng_);
  }
  double Real() { return std::uniform_real_distribution<double>(0, 1)(rng_); }
  int Size() { return static_cast<int>(builder_.graph().nodes.size()); }
  const Graph& G() { return builder_.graph(); }

  Shape RandomShape() {
    Shape s(Uniform(1, 4));
    for (auto& d : s) d = Uniform(1, 4);
    return s;
  }

  // Prefers recently created nodes so chains form.
  std::optional<NodeId> Pick(const std::function<bool(const Node&)>& ok) {
    std::vector<NodeId> c;
    for (const auto& [id, n] : G().nodes)
      if (IsNumeric(n.out_type.dtype) && ok(n)) c.push_back(id);
    if (c.empty()) return std::nullopt;
    if (c.size() > 4 && Real() < 0.6)
      return c[c.size() - 1 - Uniform(0, 3)];
    return c[Uniform(0, static_cast<int64_t>(c.size()) - 1)];
  }
  std::optional<NodeId> PickAny() {
    return Pick([](const Node&) { return true; });
  }

  NodeId Const(const TensorType& t, bool nonzero = false) {
    return builder_.Constant(t, RandomPayload(t, rng_, nonzero));
  }
  NodeId Filled(const TensorType& t, double v) {
    return builder_.Constant(t, std::vector<double>(t.NumElements(), v));
  }

  bool Emit(OpKind kind, std::vector<NodeId> inputs, Params params = {}) {
    std::vector<TensorType> types;
    for (NodeId in : inputs) types.push_back(G().at(in).out_type);
    TensorType out;
    try {
      out = graph::InferShape(kind, params, types);
    } catch (const Error&) {
      return false;
    }
    if (out.NumElements() > options_.max_elements || out.NumElements() == 0) return false;
    builder_.Op(kind, std::move(inputs), std::move(params));
    return true;
  }

  void Step() {
    const double r = Real();
    if (r < 0.36) return Binary();
    if (r < 0.52) return Unary();
    if (r < 0.58) return MatMul();
    if (r < 0.64) return Conv();
    if (r < 0.70) return Reshape();
    if (r < 0.77) return Transpose();
    if (r < 0.81) return Concat();
    if (r < 0.86) return Reduce();
    if (r < 0.91) return Cast();
    if (r < 0.95 || !options_.rewrite_hints) return Pad();
    return Duplicate();
  }

  void Binary() {
    static const OpKind kinds[] = {OpKind::kAdd, OpKind::kSub, OpKind::kMul, OpKind::kDiv};
    const OpKind kind = kinds[Uniform(0, 3)];
    auto a = PickAny();
    if (!a) return;
    const TensorType ta = G().at(*a).out_type;
    const bool int_div = kind == OpKind::kDiv && ta.dtype != DType::kF32;
    TensorType tb = ta;
    if (Real() < 0.2 && ta.rank() > 0) tb.shape = {ta.shape.back()};
    NodeId b;
    const double r = Real();
    if (int_div) {
      b = Const(tb, true);
    } else if (r < 0.4) {
      auto other = Pick([&](const Node& n) { return n.out_type == ta; });
      b = other ? *other : Const(tb);
    } else if (r < 0.75) {
      b = Const(tb);
    } else if (r < 0.9 && options_.rewrite_hints) {
      const bool one = kind == OpKind::kMul || kind == OpKind::kDiv;
      b = Filled(ta, one ? 1.0 : 0.0);
    } else {
      b = *a;
    }
    if (Real() < 0.3 && kind != OpKind::kDiv && kind != OpKind::kSub)
      Emit(kind, {b, *a});
    else
      Emit(kind, {*a, b});
  }

  void Unary() {
    const double r = Real();
    if (r < 0.35) {
      if (auto a = Pick([](const Node& n) { return n.out_type.dtype == DType::kF32; }))
        Emit(OpKind::kSigmoid, {*a});
      return;
    }
    if (auto a = PickAny()) Emit(r < 0.65 ? OpKind::kRelu : OpKind::kNeg, {*a});
  }

  void MatMul() {
    auto a = Pick([](const Node& n) { return n.out_type.rank() == 2; });
    if (!a) {
      auto x = PickAny();
      if (!x) return;
      const int64_t n = G().at(*x).out_type.NumElements();
      Emit(OpKind::kReshape, {*x}, {{"shape", std::vector<int64_t>{1, n}}});
      return;
    }
    const TensorType ta = G().at(*a).out_type;
    const int64_t k = ta.shape[1];
    auto other = Pick([&](const Node& n) {
      return n.out_type.rank() == 2 && n.out_type.shape[0] == k &&
             n.out_type.dtype == ta.dtype;
    });
    NodeId b = (other && Real() < 0.4) ? *other : Const({ta.dtype, {k, Uniform(1, 4)}});
    Emit(OpKind::kMatMul, {*a, b});
  }

  void Conv() {
    auto x = Pick([](const Node& n) { return n.out_type.rank() == 4; });
    if (!x) return;
    const TensorType tx = G().at(*x).out_type;
    Params p;
    if (Real() < 0.3) p["stride"] = std::vector<int64_t>{Uniform(1, 2), Uniform(1, 2)};
    if (Real() < 0.5) {
      if (Real() < 0.5)
        p["pad"] = std::vector<int64_t>{Uniform(0, 1), Uniform(0, 1)};
      else
        p["pad"] = std::vector<int64_t>{Uniform(0, 1), Uniform(0, 1), Uniform(0, 1),
                                        Uniform(0, 1)};
    }
    const TensorType tw{tx.dtype,
                        {Uniform(1, 3), tx.shape[1], Uniform(1, 3), Uniform(1, 3)}};
    std::vector<TensorType> types{tx, tw};
    try {
      graph::InferShape(OpKind::kConv2D, p, types);
    } catch (const Error&) {
      return;
    }
    Emit(OpKind::kConv2D, {*x, Const(tw)}, p);
  }

  void Reshape() {
    auto a = PickAny();
    if (!a) return;
    const TensorType ta = G().at(*a).out_type;
    if (options_.rewrite_hints && Real() < 0.15) {
      Emit(OpKind::kReshape, {*a}, {{"shape", ta.shape}});
      return;
    }
    int64_t n = ta.NumElements();
    std::vector<int64_t> shape;
    const int rank = static_cast<int>(Uniform(1, 4));
    for (int d = 0; d + 1 < rank; ++d) {
      std::vector<int64_t> divisors;
      for (int64_t v = 1; v <= n; ++v)
        if (n % v == 0) divisors.push_back(v);
      const int64_t pick = divisors[Uniform(0, static_cast<int64_t>(divisors.size()) - 1)];
      shape.push_back(pick);
      n /= pick;
    }
    shape.push_back(n);
    Emit(OpKind::kReshape, {*a}, {{"shape", shape}});
  }

  void Transpose() {
    auto a = Pick([](const Node& n) { return n.out_type.rank() >= 2; });
    if (!a) return;
    const Node& src = G().at(*a);
    const int rank = src.out_type.rank();
    std::vector<int64_t> perm(rank);
    if (options_.rewrite_hints && src.kind == OpKind::kTranspose && Real() < 0.5) {
      const auto& p = std::get<std::vector<int64_t>>(src.params.at("perm"));
      for (int j = 0; j < rank; ++j) perm[p[j]] = j;
    } else {
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng_);
    }
    Emit(OpKind::kTranspose, {*a}, {{"perm", perm}});
  }

  void Concat() {
    auto a = Pick([](const Node& n) { return n.out_type.rank() > 0; });
    if (!a) return;
    const TensorType ta = G().at(*a).out_type;
    const int64_t axis = Uniform(0, ta.rank() - 1);
    auto other = Pick([&](const Node& n) {
      if (n.out_type.dtype != ta.dtype || n.out_type.rank() != ta.rank()) return false;
      for (int d = 0; d < ta.rank(); ++d)
        if (d != axis && n.out_type.shape[d] != ta.shape[d]) return false;
      return true;
    });
    TensorType tb = ta;
    tb.shape[axis] = Uniform(1, 3);
    NodeId b = (other && Real() < 0.6) ? *other : Const(tb);
    Params p{{"axis", Real() < 0.2 ? axis - ta.rank() : axis}};
    Emit(OpKind::kConcat, {*a, b}, p);
  }

  void Reduce() {
    auto a = Pick([](const Node& n) { return n.out_type.rank() > 0; });
    if (!a) return;
    const int rank = G().at(*a).out_type.rank();
    std::vector<int64_t> axes;
    for (int d = 0; d < rank; ++d)
      if (Real() < 0.5) axes.push_back(d);
    if (axes.empty()) axes.push_back(Uniform(0, rank - 1));
    Params p{{"axes", axes}};
    if (Real() < 0.5) p["keepdims"] = int64_t{1};
    Emit(OpKind::kReduceSum, {*a}, p);
  }

  void Cast() {
    auto a = PickAny();
    if (!a) return;
    static const DType targets[] = {DType::kF32, DType::kI32, DType::kI8};
    const DType to = options_.rewrite_hints && Real() < 0.3 ? G().at(*a).out_type.dtype
                                                            : targets[Uniform(0, 2)];
    Emit(OpKind::kCast, {*a}, {{"to", std::string(DTypeName(to))}});
  }

  void Pad() {
    auto a = PickAny();
    if (!a) return;
    const int rank = G().at(*a).out_type.rank();
    std::vector<int64_t> pads(2 * rank);
    for (auto& v : pads) v = Real() < 0.6 ? 0 : 1;
    Emit(OpKind::kPad, {*a}, {{"pads", pads}});
  }

  // Clone of an existing op node; a CSE opportunity.
  void Duplicate() {
    auto a = Pick([](const Node& n) {
      return n.kind != OpKind::kInput && n.kind != OpKind::kConstant;
    });
    if (!a) return;
    const Node n = G().at(*a);
    Emit(n.kind, n.inputs, n.params);
  }

  std::mt19937_64 rng_;
  GraphGenOptions options_;
  GraphBuilder builder_;
  DType dtype_ = DType::kF32;
};

}  // namespace

Graph RandomGraph(uint64_t seed, const GraphGenOptions& options) {
  return Generator(seed, options).Run();
}

}  // namespace stagefuzz::gen

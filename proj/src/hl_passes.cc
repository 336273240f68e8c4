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

#include "stagefuzz/hl_passes.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "stagefuzz/error.h"
#include "text_util.h"

namespace stagefuzz::hl {

using graph::Node;
using graph::OpKind;

namespace {

constexpr int64_t kFoldElementLimit = 4096;

void ReplaceUses(Graph& g, NodeId from, NodeId to) {
  for (auto& [id, node] : g.nodes)
    for (NodeId& in : node.inputs)
      if (in == from) in = to;
  for (NodeId& out : g.outputs)
    if (out == from) out = to;
}

bool HasUses(const Graph& g, NodeId id) {
  for (const auto& [nid, node] : g.nodes)
    if (std::find(node.inputs.begin(), node.inputs.end(), id) != node.inputs.end())
      return true;
  return std::find(g.outputs.begin(), g.outputs.end(), id) != g.outputs.end();
}

std::vector<NodeId> Order(const Graph& g) {
  auto order = graph::TopologicalOrder(g);
  if (!order) throw Error(ErrorKind::kPassInternal, "input graph is not a DAG");
  return *order;
}

NodeId AddNode(Graph& g, Node n) {
  n.id = g.NextId();
  const NodeId id = n.id;
  g.nodes[id] = std::move(n);
  return id;
}

// ---------------------------------------------------------------- ConstFold

std::string FoldRule(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
      return "fold.binary";
    case OpKind::kNeg:
    case OpKind::kRelu:
    case OpKind::kSigmoid:
    case OpKind::kCast:
      return "fold.unary";
    case OpKind::kReshape:
    case OpKind::kTranspose:
    case OpKind::kConcat:
    case OpKind::kPad:
      return "fold.data";
    default:
      return "fold.compute";
  }
}

void ConstFold(Graph& g, std::vector<RewriteTrace>& traces, const BugSet& bugs) {
  graph::EvalOptions options;
  options.saturate_i8 = bugs.Has(BugId::kH1);
  // One layer per application: only constants present in the pass input
  // count, so a fold result is not folded again in the same run.
  std::set<NodeId> original;
  for (const auto& [id, node] : g.nodes)
    if (node.kind == OpKind::kConstant) original.insert(id);
  for (NodeId id : Order(g)) {
    const Node node = g.nodes.at(id);
    if (node.kind == OpKind::kInput || node.kind == OpKind::kConstant) continue;
    if (node.out_type.NumElements() > kFoldElementLimit) continue;
    std::vector<TensorValue> args;
    bool all_const = true;
    for (NodeId in : node.inputs) {
      const Node& src = g.nodes.at(in);
      if (!original.count(in)) {
        all_const = false;
        break;
      }
      args.push_back({src.out_type, src.payload});
    }
    if (!all_const) continue;
    TensorValue folded;
    try {
      folded = graph::EvaluateNode(node, args, options);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kNumericDomain) continue;  // leave for runtime
      throw;
    }
    Node c;
    c.kind = OpKind::kConstant;
    c.out_type = folded.type;
    c.payload = std::move(folded.data);
    const NodeId cid = AddNode(g, std::move(c));
    ReplaceUses(g, id, cid);
    g.nodes.erase(id);
    for (NodeId in : node.inputs)
      if (g.nodes.count(in) && !HasUses(g, in)) g.nodes.erase(in);
    traces.push_back({PassId::kConstFold, FoldRule(node.kind), {id}, {cid}, true});
  }
}

// --------------------------------------------------------- AlgebraicSimplify

bool ConstantAll(const Node& n, double value) {
  if (n.kind != OpKind::kConstant || n.payload.empty()) return false;
  return std::all_of(n.payload.begin(), n.payload.end(),
                     [&](double v) { return v == value; });
}

const std::vector<int64_t>& Perm(const Node& n) {
  return std::get<std::vector<int64_t>>(n.params.at("perm"));
}

// outer(inner(x)) == x
bool InversePerms(const std::vector<int64_t>& inner, const std::vector<int64_t>& outer) {
  if (inner.size() != outer.size()) return false;
  for (size_t j = 0; j < outer.size(); ++j)
    if (inner[outer[j]] != static_cast<int64_t>(j)) return false;
  return true;
}

// Replaces node `id` by `with` and drops `id` plus any producer that became
// unused as a result.
void Bypass(Graph& g, NodeId id, NodeId with, const std::vector<NodeId>& maybe_dead) {
  ReplaceUses(g, id, with);
  g.nodes.erase(id);
  for (NodeId d : maybe_dead)
    if (d != with && g.nodes.count(d) && !HasUses(g, d)) g.nodes.erase(d);
}

// `origin` maps nodes created earlier in the same pass to the input-graph
// node they replaced, so traces only name pre-pass ids.
bool CancelTransposePair(Graph& g, NodeId id, PassId pass, const std::string& rule,
                         std::vector<RewriteTrace>& traces,
                         const std::map<NodeId, NodeId>& origin = {}) {
  const Node& outer = g.nodes.at(id);
  if (outer.kind != OpKind::kTranspose) return false;
  const Node& inner = g.nodes.at(outer.inputs[0]);
  if (inner.kind != OpKind::kTranspose || !InversePerms(Perm(inner), Perm(outer)))
    return false;
  const NodeId inner_id = inner.id;
  const NodeId x = inner.inputs[0];
  Bypass(g, id, x, {inner_id});
  auto source = [&](NodeId n) {
    auto it = origin.find(n);
    return it == origin.end() ? n : it->second;
  };
  traces.push_back({pass, rule, {source(id), source(inner_id)}, {x}, true});
  return true;
}

// Transpose(MatMul(Transpose(a), Transpose(b))) == MatMul(b, a) for 2-D
// swaps. Every output element sums the same products in the same order.
bool SinkTransposeMatMul(Graph& g, NodeId id, std::vector<RewriteTrace>& traces) {
  const std::vector<int64_t> swap{1, 0};
  const Node& outer = g.nodes.at(id);
  if (outer.kind != OpKind::kTranspose || Perm(outer) != swap) return false;
  const Node& mm = g.nodes.at(outer.inputs[0]);
  if (mm.kind != OpKind::kMatMul) return false;
  const Node& ta = g.nodes.at(mm.inputs[0]);
  const Node& tb = g.nodes.at(mm.inputs[1]);
  if (ta.kind != OpKind::kTranspose || Perm(ta) != swap) return false;
  if (tb.kind != OpKind::kTranspose || Perm(tb) != swap) return false;
  const std::vector<NodeId> matched{id, mm.id, ta.id, tb.id};
  Node fused;
  fused.kind = OpKind::kMatMul;
  fused.inputs = {tb.inputs[0], ta.inputs[0]};
  fused.out_type = outer.out_type;
  const NodeId nid = AddNode(g, std::move(fused));
  Bypass(g, id, nid, {matched[1], matched[2], matched[3]});
  traces.push_back({PassId::kAlgebraicSimplify, "simplify.transpose_matmul",
                    std::set<NodeId>(matched.begin(), matched.end()), {nid}, true});
  return true;
}

// Conv2D(Pad(x), w) with spatial-only zero padding becomes Conv2D(x, w)
// with a wider pad. Needs finite constant weights: a padded zero times an
// infinite weight is NaN, while a skipped tap contributes nothing.
bool FoldPadIntoConv(Graph& g, NodeId id, std::vector<RewriteTrace>& traces) {
  const Node& conv = g.nodes.at(id);
  const Node& pad = g.nodes.at(conv.inputs[0]);
  const Node& w = g.nodes.at(conv.inputs[1]);
  if (pad.kind != OpKind::kPad || w.kind != OpKind::kConstant) return false;
  for (double v : w.payload)
    if (!std::isfinite(v)) return false;
  auto layout = conv.params.find("layout");
  const bool nhwc =
      layout != conv.params.end() && std::get<std::string>(layout->second) == "NHWC";
  const auto& pads = std::get<std::vector<int64_t>>(pad.params.at("pads"));
  // pads = [begin x4, end x4]; spatial dims are (2,3) or (1,2).
  const int h = nhwc ? 1 : 2, wd = h + 1, c = nhwc ? 3 : 1;
  if (pads[0] || pads[4] || pads[c] || pads[c + 4]) return false;
  std::vector<int64_t> merged{0, 0, 0, 0};
  if (auto it = conv.params.find("pad"); it != conv.params.end()) {
    const auto& p = std::get<std::vector<int64_t>>(it->second);
    merged = p.size() == 2 ? std::vector<int64_t>{p[0], p[1], p[0], p[1]} : p;
  }
  merged[0] += pads[h];
  merged[1] += pads[wd];
  merged[2] += pads[h + 4];
  merged[3] += pads[wd + 4];
  Node folded = conv;
  folded.params["pad"] = merged;
  folded.inputs = {pad.inputs[0], conv.inputs[1]};
  const NodeId pad_id = pad.id;
  const NodeId nid = AddNode(g, std::move(folded));
  Bypass(g, id, nid, {pad_id});
  traces.push_back({PassId::kAlgebraicSimplify, "simplify.pad_into_conv", {id, pad_id},
                    {nid}, true});
  return true;
}

// Concat(.., Concat(x, y), ..) on the same axis, inner result used once.
bool FlattenConcat(Graph& g, NodeId id, std::vector<RewriteTrace>& traces) {
  const Node& outer = g.nodes.at(id);
  const int rank = outer.out_type.rank();
  auto axis_of = [&](const Node& n) {
    int64_t a = std::get<int64_t>(n.params.at("axis"));
    return a < 0 ? a + rank : a;
  };
  const auto counts = graph::ConsumerCounts(g);
  const std::set<NodeId> outputs(g.outputs.begin(), g.outputs.end());
  for (size_t k = 0; k < outer.inputs.size(); ++k) {
    const Node& inner = g.nodes.at(outer.inputs[k]);
    if (inner.kind != OpKind::kConcat || axis_of(inner) != axis_of(outer)) continue;
    if (outputs.count(inner.id) || counts.at(inner.id) != 1) continue;
    if (outer.inputs.size() - 1 + inner.inputs.size() > 4) continue;
    Node flat = outer;
    flat.inputs.clear();
    for (size_t j = 0; j < outer.inputs.size(); ++j) {
      if (j == k)
        flat.inputs.insert(flat.inputs.end(), inner.inputs.begin(), inner.inputs.end());
      else
        flat.inputs.push_back(outer.inputs[j]);
    }
    const NodeId inner_id = inner.id;
    const NodeId nid = AddNode(g, std::move(flat));
    Bypass(g, id, nid, {inner_id});
    traces.push_back({PassId::kAlgebraicSimplify, "simplify.concat_flatten",
                      {id, inner_id}, {nid}, true});
    return true;
  }
  return false;
}

void AlgebraicSimplify(Graph& g, std::vector<RewriteTrace>& traces) {
  for (NodeId id : Order(g)) {
    if (!g.nodes.count(id)) continue;
    const Node node = g.nodes.at(id);
    auto try_identity = [&](int operand, double value, const std::string& rule) {
      const NodeId x = node.inputs[operand];
      const NodeId c = node.inputs[1 - operand];
      if (!ConstantAll(g.nodes.at(c), value)) return false;
      if (g.nodes.at(x).out_type != node.out_type) return false;
      Bypass(g, id, x, {c});
      traces.push_back({PassId::kAlgebraicSimplify, rule, {id}, {x}, true});
      return true;
    };
    switch (node.kind) {
      case OpKind::kAdd:
        if (!try_identity(0, 0.0, "simplify.add_zero"))
          try_identity(1, 0.0, "simplify.add_zero");
        break;
      case OpKind::kSub:
        try_identity(0, 0.0, "simplify.sub_zero");
        break;
      case OpKind::kMul:
        if (!try_identity(0, 1.0, "simplify.mul_one"))
          try_identity(1, 1.0, "simplify.mul_one");
        break;
      case OpKind::kDiv:
        try_identity(0, 1.0, "simplify.div_one");
        break;
      case OpKind::kTranspose:
        if (!CancelTransposePair(g, id, PassId::kAlgebraicSimplify,
                                 "simplify.transpose_pair", traces))
          SinkTransposeMatMul(g, id, traces);
        break;
      case OpKind::kConv2D:
        FoldPadIntoConv(g, id, traces);
        break;
      case OpKind::kConcat:
        FlattenConcat(g, id, traces);
        break;
      case OpKind::kReshape:
      case OpKind::kCast: {
        const NodeId x = node.inputs[0];
        if (g.nodes.at(x).out_type == node.out_type) {
          Bypass(g, id, x, {});
          traces.push_back({PassId::kAlgebraicSimplify,
                            node.kind == OpKind::kReshape ? "simplify.reshape_identity"
                                                          : "simplify.cast_identity",
                            {id},
                            {x},
                            true});
        }
        break;
      }
      default:
        break;
    }
  }
}

// ---------------------------------------------------------------------- CSE

bool Commutative(OpKind kind) { return kind == OpKind::kAdd || kind == OpKind::kMul; }

// Operands of commutative ops are keyed in sorted order.
std::string CseKey(const Node& n, bool ignore_payload) {
  std::string key(graph::OpKindName(n.kind));
  key += '|';
  for (const auto& [k, v] : n.params) key += k + "=" + graph::ParamToString(v) + ";";
  key += '|';
  std::vector<NodeId> inputs = n.inputs;
  if (Commutative(n.kind)) std::sort(inputs.begin(), inputs.end());
  for (NodeId in : inputs) key += std::to_string(in) + ",";
  key += '|' + n.out_type.ToString() + '|' + graph::EncodeFusedBody(n.fused) + '|';
  if (!ignore_payload)
    for (double v : n.payload) key += text::FormatNumber(v, n.out_type.dtype) + ",";
  return key;
}

void Cse(Graph& g, std::vector<RewriteTrace>& traces, const BugSet& bugs) {
  std::map<std::string, NodeId> seen;
  for (NodeId id : Order(g)) {
    const Node& node = g.nodes.at(id);
    if (node.kind == OpKind::kInput) continue;
    const std::string key = CseKey(node, bugs.Has(BugId::kH3));
    auto [it, inserted] = seen.emplace(key, id);
    if (inserted) continue;
    const NodeId keep = it->second;
    const bool swapped = g.nodes.at(keep).inputs != node.inputs;
    ReplaceUses(g, id, keep);
    g.nodes.erase(id);
    traces.push_back(
        {PassId::kCSE, swapped ? "cse.commute" : "cse.merge", {keep, id}, {keep}, true});
  }
}

// ---------------------------------------------------------- LayoutTransform

void LayoutTransform(Graph& g, std::vector<RewriteTrace>& traces, const BugSet& bugs) {
  std::map<NodeId, NodeId> origin;
  for (NodeId id : Order(g)) {
    const Node conv = g.nodes.at(id);
    if (conv.kind != OpKind::kConv2D) continue;
    auto layout = conv.params.find("layout");
    if (layout != conv.params.end() && std::get<std::string>(layout->second) == "NHWC")
      continue;
    const auto consumers = graph::ConsumerCounts(g);
    bool node_consumer = false;
    for (const auto& [nid, n] : g.nodes)
      if (std::find(n.inputs.begin(), n.inputs.end(), id) != n.inputs.end())
        node_consumer = true;

    Node to_nhwc;
    to_nhwc.kind = OpKind::kTranspose;
    to_nhwc.params["perm"] = std::vector<int64_t>{0, 2, 3, 1};
    to_nhwc.inputs = {conv.inputs[0]};
    to_nhwc.out_type = graph::InferShape(OpKind::kTranspose, to_nhwc.params,
                                         {g.nodes.at(conv.inputs[0]).out_type});
    const NodeId t1 = AddNode(g, std::move(to_nhwc));

    Node nhwc = conv;
    nhwc.params["layout"] = std::string("NHWC");
    nhwc.inputs = {t1, conv.inputs[1]};
    nhwc.out_type = graph::InferShape(OpKind::kConv2D, nhwc.params,
                                      {g.nodes.at(t1).out_type,
                                       g.nodes.at(conv.inputs[1]).out_type});
    const NodeId c2 = AddNode(g, std::move(nhwc));

    std::set<NodeId> produced{t1, c2};
    origin[t1] = id;
    if (bugs.Has(BugId::kH4) && !node_consumer) {
      ReplaceUses(g, id, c2);
    } else {
      Node to_nchw;
      to_nchw.kind = OpKind::kTranspose;
      to_nchw.params["perm"] = std::vector<int64_t>{0, 3, 1, 2};
      to_nchw.inputs = {c2};
      to_nchw.out_type = graph::InferShape(OpKind::kTranspose, to_nchw.params,
                                           {g.nodes.at(c2).out_type});
      const NodeId t2 = AddNode(g, std::move(to_nchw));
      ReplaceUses(g, id, t2);
      produced.insert(t2);
      origin[t2] = id;
    }
    g.nodes.erase(id);
    traces.push_back({PassId::kLayoutTransform, "layout.conv_nhwc", {id}, produced, true});
  }
  for (NodeId id : Order(g)) {
    if (!g.nodes.count(id)) continue;
    CancelTransposePair(g, id, PassId::kLayoutTransform, "layout.cancel_transpose",
                        traces, origin);
  }
}

// ---------------------------------------------------------- FuseElementwise

bool Fusible(const Node& n) {
  return graph::IsElementwise(n.kind) || n.kind == OpKind::kFusedGroup;
}

bool Reaches(const Graph& g, NodeId from, NodeId to) {
  std::set<NodeId> seen;
  std::vector<NodeId> work{to};
  while (!work.empty()) {
    NodeId id = work.back();
    work.pop_back();
    if (id == from) return true;
    if (!seen.insert(id).second) continue;
    for (NodeId in : g.nodes.at(id).inputs) work.push_back(in);
  }
  return false;
}

// Chain members with consumers outside the chain get those consumers
// rewired to the group result. That is only attempted when it keeps the
// graph well-typed and acyclic.
bool SafeToRewire(const Graph& g, const std::vector<NodeId>& chain,
                  const std::set<NodeId>& members,
                  std::map<NodeId, std::vector<NodeId>>& consumers) {
  const TensorType& result = g.nodes.at(chain.back()).out_type;
  std::vector<NodeId> externals;
  for (NodeId c : chain)
    for (NodeId in : g.nodes.at(c).inputs)
      if (!members.count(in)) externals.push_back(in);
  for (size_t k = 0; k + 1 < chain.size(); ++k) {
    for (NodeId user : consumers[chain[k]]) {
      if (members.count(user)) continue;
      if (g.nodes.at(chain[k]).out_type != result) return false;
      for (NodeId ext : externals)
        if (Reaches(g, user, ext)) return false;
    }
  }
  return true;
}

void FuseElementwise(Graph& g, std::vector<RewriteTrace>& traces, const BugSet& bugs) {
  const auto order = Order(g);
  const auto counts = graph::ConsumerCounts(g);
  std::set<NodeId> outputs(g.outputs.begin(), g.outputs.end());
  // consumers[n] = node consumers in id order.
  std::map<NodeId, std::vector<NodeId>> consumers;
  for (const auto& [id, node] : g.nodes) {
    std::set<NodeId> distinct(node.inputs.begin(), node.inputs.end());
    for (NodeId in : distinct) consumers[in].push_back(id);
  }
  // succ[n]: the chain successor of n.
  std::map<NodeId, NodeId> succ;
  std::map<NodeId, NodeId> pred;
  for (NodeId id : order) {
    const Node& node = g.nodes.at(id);
    if (!Fusible(node) || outputs.count(id)) continue;
    const auto& cs = consumers[id];
    if (cs.empty()) continue;
    auto count = counts.find(id);
    const bool single = count != counts.end() && count->second == 1;
    if (!single && !bugs.Has(BugId::kH2)) continue;
    const NodeId next = cs.front();
    if (!Fusible(g.nodes.at(next)) || pred.count(next)) continue;
    succ[id] = next;
    pred[next] = id;
  }

  std::set<NodeId> done;
  for (NodeId id : order) {
    if (done.count(id) || pred.count(id) || !succ.count(id)) continue;
    std::vector<NodeId> chain{id};
    while (succ.count(chain.back())) chain.push_back(succ.at(chain.back()));
    for (NodeId c : chain) done.insert(c);
    const std::set<NodeId> members(chain.begin(), chain.end());
    if (!SafeToRewire(g, chain, members, consumers)) continue;

    Node group;
    group.kind = OpKind::kFusedGroup;
    std::map<NodeId, int> result_of;  // chain node -> step index of its result
    bool extends = false;
    auto external = [&](NodeId src) {
      auto it = std::find(group.inputs.begin(), group.inputs.end(), src);
      if (it != group.inputs.end()) return static_cast<int>(it - group.inputs.begin());
      group.inputs.push_back(src);
      return static_cast<int>(group.inputs.size()) - 1;
    };
    auto operand = [&](NodeId src) {
      auto it = result_of.find(src);
      return it != result_of.end() ? -(it->second + 1) : external(src);
    };
    for (NodeId c : chain) {
      const Node& n = g.nodes.at(c);
      if (n.kind == OpKind::kFusedGroup) {
        extends = true;
        const int base = static_cast<int>(group.fused.size());
        for (const auto& step : n.fused) {
          graph::FusedOp copy{step.kind, {}};
          for (int a : step.args)
            copy.args.push_back(a >= 0 ? operand(n.inputs[a]) : -(base + (-a - 1) + 1));
          group.fused.push_back(copy);
        }
      } else {
        graph::FusedOp step{n.kind, {}};
        for (NodeId in : n.inputs) step.args.push_back(operand(in));
        group.fused.push_back(step);
      }
      result_of[c] = static_cast<int>(group.fused.size()) - 1;
    }
    group.out_type = g.nodes.at(chain.back()).out_type;
    const NodeId gid = AddNode(g, std::move(group));
    for (NodeId c : chain) ReplaceUses(g, c, gid);
    for (NodeId c : chain) g.nodes.erase(c);
    traces.push_back({PassId::kFuseElementwise, extends ? "fuse.extend" : "fuse.chain",
                      std::set<NodeId>(chain.begin(), chain.end()), {gid}, true});
  }
}

// ------------------------------------------------------------- DeadNodeElim

void DeadNodeElim(Graph& g, std::vector<RewriteTrace>& traces) {
  const auto live_list = graph::LiveNodes(g);
  const std::set<NodeId> live(live_list.begin(), live_list.end());
  std::set<NodeId> dead;
  for (const auto& [id, node] : g.nodes)
    if (!live.count(id)) dead.insert(id);
  // One trace per weakly connected dead component.
  std::set<NodeId> assigned;
  for (NodeId seed : dead) {
    if (assigned.count(seed)) continue;
    std::set<NodeId> component;
    std::vector<NodeId> work{seed};
    while (!work.empty()) {
      NodeId id = work.back();
      work.pop_back();
      if (!dead.count(id) || !component.insert(id).second) continue;
      for (NodeId in : g.nodes.at(id).inputs) work.push_back(in);
      for (const auto& [cid, c] : g.nodes)
        if (std::find(c.inputs.begin(), c.inputs.end(), id) != c.inputs.end())
          work.push_back(cid);
    }
    assigned.insert(component.begin(), component.end());
    traces.push_back({PassId::kDeadNodeElim, "dce.remove", component, {}, true});
  }
  for (NodeId id : dead) g.nodes.erase(id);
}

}  // namespace

std::string_view PassName(PassId pass) {
  switch (pass) {
    case PassId::kConstFold: return "ConstFold";
    case PassId::kFuseElementwise: return "FuseElementwise";
    case PassId::kDeadNodeElim: return "DeadNodeElim";
    case PassId::kAlgebraicSimplify: return "AlgebraicSimplify";
    case PassId::kCSE: return "CSE";
    case PassId::kLayoutTransform: return "LayoutTransform";
  }
  return "?";
}

std::optional<PassId> ParsePassId(std::string_view name) {
  for (PassId p : PipelineOrder())
    if (PassName(p) == name) return p;
  return std::nullopt;
}

const std::vector<PassId>& PipelineOrder() {
  static const std::vector<PassId> order = {
      PassId::kConstFold,       PassId::kAlgebraicSimplify, PassId::kCSE,
      PassId::kLayoutTransform, PassId::kFuseElementwise,   PassId::kDeadNodeElim,
  };
  return order;
}

const std::vector<std::string>& KnownRuleIds(PassId pass) {
  static const std::map<PassId, std::vector<std::string>> rules = {
      {PassId::kConstFold, {"fold.binary", "fold.unary", "fold.data", "fold.compute"}},
      {PassId::kAlgebraicSimplify,
       {"simplify.add_zero", "simplify.sub_zero", "simplify.mul_one",
        "simplify.div_one", "simplify.transpose_pair", "simplify.reshape_identity",
        "simplify.cast_identity", "simplify.transpose_matmul", "simplify.pad_into_conv",
        "simplify.concat_flatten"}},
      {PassId::kCSE, {"cse.merge", "cse.commute"}},
      {PassId::kLayoutTransform, {"layout.conv_nhwc", "layout.cancel_transpose"}},
      {PassId::kFuseElementwise, {"fuse.chain", "fuse.extend"}},
      {PassId::kDeadNodeElim, {"dce.remove"}},
  };
  return rules.at(pass);
}

PassResult RunPass(PassId pass, const Graph& input, const BugSet& bugs) {
  PassResult result{input, {}};
  try {
    Graph& g = result.graph;
    switch (pass) {
      case PassId::kConstFold: ConstFold(g, result.traces, bugs); break;
      case PassId::kAlgebraicSimplify: AlgebraicSimplify(g, result.traces); break;
      case PassId::kCSE: Cse(g, result.traces, bugs); break;
      case PassId::kLayoutTransform: LayoutTransform(g, result.traces, bugs); break;
      case PassId::kFuseElementwise: FuseElementwise(g, result.traces, bugs); break;
      case PassId::kDeadNodeElim: DeadNodeElim(g, result.traces); break;
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kPassInternal) throw;
    throw Error(ErrorKind::kPassInternal, std::string(PassName(pass)) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kPassInternal, std::string(PassName(pass)) + ": " + e.what());
  }
  // Later rewrites in the same run may have consumed earlier products.
  for (auto& t : result.traces)
    std::erase_if(t.produced_nodes,
                  [&](NodeId id) { return !result.graph.nodes.count(id); });
  auto report = graph::ValidateGraph(result.graph);
  if (!report.ok())
    throw Error(ErrorKind::kPassInternal, std::string(PassName(pass)) +
                                              " produced an invalid graph: " +
                                              report.ToString());
  return result;
}

PipelineResult RunPipeline(int level, const Graph& g, const BugSet& bugs,
                           bool record_steps) {
  PipelineResult result;
  result.graph = g;
  if (level <= 0) return result;
  auto apply = [&](PassId pass, int iteration) {
    PassResult r = RunPass(pass, result.graph, bugs);
    const bool fired = !r.traces.empty();
    result.graph = std::move(r.graph);
    if (record_steps) result.steps.push_back({pass, iteration, result.graph, r.traces});
    result.traces.insert(result.traces.end(), r.traces.begin(), r.traces.end());
    return fired;
  };
  if (level == 1) {
    apply(PassId::kConstFold, 0);
    apply(PassId::kDeadNodeElim, 0);
    result.iterations = 1;
    return result;
  }
  result.fixpoint_reached = false;
  for (int it = 0; it < kFixpointCap; ++it) {
    bool any = false;
    for (PassId pass : PipelineOrder()) any |= apply(pass, it);
    result.iterations = it + 1;
    if (!any) {
      result.fixpoint_reached = true;
      break;
    }
  }
  return result;
}

}  // namespace stagefuzz::hl

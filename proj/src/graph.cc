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

#include "stagefuzz/graph.h"

#include <algorithm>
#include <set>
#include <sstream>

#include "stagefuzz/error.h"

namespace stagefuzz::graph {

namespace {

[[noreturn]] void ShapeError(const std::string& msg) {
  throw Error(ErrorKind::kShapeMismatch, msg);
}
[[noreturn]] void ParamError(const std::string& msg) {
  throw Error(ErrorKind::kInvalidParam, msg);
}

struct KindName {
  OpKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {OpKind::kInput, "Input"},       {OpKind::kConstant, "Constant"},
    {OpKind::kAdd, "Add"},           {OpKind::kSub, "Sub"},
    {OpKind::kMul, "Mul"},           {OpKind::kDiv, "Div"},
    {OpKind::kNeg, "Neg"},           {OpKind::kRelu, "ReLU"},
    {OpKind::kSigmoid, "Sigmoid"},   {OpKind::kMatMul, "MatMul"},
    {OpKind::kConv2D, "Conv2D"},     {OpKind::kReshape, "Reshape"},
    {OpKind::kTranspose, "Transpose"}, {OpKind::kConcat, "Concat"},
    {OpKind::kReduceSum, "ReduceSum"}, {OpKind::kCast, "Cast"},
    {OpKind::kPad, "Pad"},           {OpKind::kFusedGroup, "FusedGroup"},
};

std::vector<OpSchema> BuildSchemas() {
  using D = ParamDomain;
  std::vector<OpSchema> s = {
      {OpKind::kInput, 0, 0, {{"name", D::kString, true}}},
      {OpKind::kConstant, 0, 0, {}},
      {OpKind::kAdd, 2, 2, {}},
      {OpKind::kSub, 2, 2, {}},
      {OpKind::kMul, 2, 2, {}},
      {OpKind::kDiv, 2, 2, {}},
      {OpKind::kNeg, 1, 1, {}},
      {OpKind::kRelu, 1, 1, {}},
      {OpKind::kSigmoid, 1, 1, {}},
      {OpKind::kMatMul, 2, 2, {}},
      {OpKind::kConv2D,
       2,
       2,
       {{"stride", D::kIntList, false},
        {"pad", D::kIntList, false},
        {"layout", D::kString, false}}},
      {OpKind::kReshape, 1, 1, {{"shape", D::kIntList, true}}},
      {OpKind::kTranspose, 1, 1, {{"perm", D::kIntList, true}}},
      {OpKind::kConcat, 2, 4, {{"axis", D::kInt, true}}},
      {OpKind::kReduceSum,
       1,
       1,
       {{"axes", D::kIntList, true}, {"keepdims", D::kInt, false}}},
      {OpKind::kCast, 1, 1, {{"to", D::kString, true}}},
      {OpKind::kPad, 1, 1, {{"pads", D::kIntList, true}}},
      {OpKind::kFusedGroup, 1, 8, {}},
  };
  return s;
}

const std::vector<int64_t>* GetList(const Params& p, const std::string& name) {
  auto it = p.find(name);
  if (it == p.end()) return nullptr;
  return std::get_if<std::vector<int64_t>>(&it->second);
}

int64_t GetInt(const Params& p, const std::string& name, int64_t def) {
  auto it = p.find(name);
  if (it == p.end()) return def;
  return std::get<int64_t>(it->second);
}

std::string GetString(const Params& p, const std::string& name,
                      const std::string& def) {
  auto it = p.find(name);
  if (it == p.end()) return def;
  return std::get<std::string>(it->second);
}

void RequireSameNumeric(const std::vector<TensorType>& in, std::string_view op) {
  for (const auto& t : in) {
    if (!IsNumeric(t.dtype))
      ShapeError(std::string(op) + " requires numeric inputs, got " + t.ToString());
    if (t.dtype != in[0].dtype)
      ShapeError(std::string(op) + " dtype mismatch " + in[0].ToString() + " vs " +
                 t.ToString());
  }
}

void CheckRank(const Shape& shape) {
  if (static_cast<int>(shape.size()) > kMaxRank)
    ShapeError("rank " + std::to_string(shape.size()) + " exceeds cap");
  for (int64_t d : shape)
    if (d < 0) ShapeError("negative extent");
}

struct ConvGeometry {
  int64_t n, c, h, w;      // input in logical NCHW order
  int64_t o, kh, kw;
  int64_t sh, sw;
  int64_t pt, pl, pb, pr;  // top, left, bottom, right
  int64_t oh, ow;
  bool nhwc;
};

std::vector<int64_t> NormalizedPads(const Params& params) {
  const auto* pad = GetList(params, "pad");
  if (pad == nullptr) return {0, 0, 0, 0};
  if (pad->size() == 2) return {(*pad)[0], (*pad)[1], (*pad)[0], (*pad)[1]};
  if (pad->size() == 4) return *pad;
  ParamError("Conv2D pad must have 2 or 4 entries");
}

ConvGeometry ConvShape(const Params& params, const TensorType& x,
                       const TensorType& w) {
  if (x.rank() != 4 || w.rank() != 4)
    ShapeError("Conv2D expects rank-4 input and weight, got " + x.ToString() +
               " and " + w.ToString());
  ConvGeometry g{};
  const std::string layout = GetString(params, "layout", "NCHW");
  if (layout != "NCHW" && layout != "NHWC")
    ParamError("Conv2D layout must be NCHW or NHWC");
  g.nhwc = layout == "NHWC";
  g.n = x.shape[0];
  if (g.nhwc) {
    g.h = x.shape[1];
    g.w = x.shape[2];
    g.c = x.shape[3];
  } else {
    g.c = x.shape[1];
    g.h = x.shape[2];
    g.w = x.shape[3];
  }
  g.o = w.shape[0];
  g.kh = w.shape[2];
  g.kw = w.shape[3];
  if (w.shape[1] != g.c)
    ShapeError("Conv2D channel mismatch: input " + x.ToString() + " weight " +
               w.ToString());
  const auto* stride = GetList(params, "stride");
  std::vector<int64_t> s = stride ? *stride : std::vector<int64_t>{1, 1};
  if (s.size() != 2 || s[0] < 1 || s[1] < 1)
    ParamError("Conv2D stride must be two positive integers");
  g.sh = s[0];
  g.sw = s[1];
  auto pads = NormalizedPads(params);
  for (int64_t p : pads)
    if (p < 0) ParamError("Conv2D pad must be non-negative");
  g.pt = pads[0];
  g.pl = pads[1];
  g.pb = pads[2];
  g.pr = pads[3];
  const int64_t hp = g.h + g.pt + g.pb;
  const int64_t wp = g.w + g.pl + g.pr;
  if (g.kh < 1 || g.kw < 1 || hp < g.kh || wp < g.kw)
    ShapeError("Conv2D kernel larger than padded input");
  g.oh = (hp - g.kh) / g.sh + 1;
  g.ow = (wp - g.kw) / g.sw + 1;
  return g;
}

int64_t NormalizeAxis(int64_t axis, int rank) {
  if (axis < -rank || axis >= rank)
    ParamError("axis " + std::to_string(axis) + " out of range for rank " +
               std::to_string(rank));
  return axis < 0 ? axis + rank : axis;
}

std::vector<bool> ReduceMask(const Params& params, int rank) {
  const auto* axes = GetList(params, "axes");
  std::vector<bool> mask(rank, false);
  for (int64_t a : *axes) {
    const int64_t ax = NormalizeAxis(a, rank);
    if (mask[ax]) ParamError("duplicate reduction axis");
    mask[ax] = true;
  }
  return mask;
}

}  // namespace

const std::vector<OpKind>& UserOpKinds() {
  static const std::vector<OpKind> kinds = [] {
    std::vector<OpKind> v;
    for (const auto& kn : kKindNames)
      if (kn.kind != OpKind::kFusedGroup) v.push_back(kn.kind);
    return v;
  }();
  return kinds;
}

std::string_view OpKindName(OpKind kind) {
  for (const auto& kn : kKindNames)
    if (kn.kind == kind) return kn.name;
  return "?";
}

std::optional<OpKind> ParseOpKind(std::string_view name) {
  for (const auto& kn : kKindNames)
    if (kn.name == name) return kn.kind;
  return std::nullopt;
}

bool IsElementwise(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv:
    case OpKind::kNeg:
    case OpKind::kRelu:
    case OpKind::kSigmoid:
      return true;
    default:
      return false;
  }
}

bool IsBinaryElementwise(OpKind kind) {
  return kind == OpKind::kAdd || kind == OpKind::kSub || kind == OpKind::kMul ||
         kind == OpKind::kDiv;
}

const OpSchema& Schema(OpKind kind) {
  static const std::vector<OpSchema> schemas = BuildSchemas();
  return schemas[static_cast<size_t>(kind)];
}

void CheckParamSchema(OpKind kind, const Params& params) {
  const OpSchema& schema = Schema(kind);
  for (const auto& [name, value] : params) {
    auto it = std::find_if(schema.params.begin(), schema.params.end(),
                           [&](const ParamSpec& s) { return s.name == name; });
    if (it == schema.params.end())
      ParamError(std::string(OpKindName(kind)) + " has no parameter '" + name + "'");
    const bool ok = (it->domain == ParamDomain::kInt &&
                     std::holds_alternative<int64_t>(value)) ||
                    (it->domain == ParamDomain::kIntList &&
                     std::holds_alternative<std::vector<int64_t>>(value)) ||
                    (it->domain == ParamDomain::kString &&
                     std::holds_alternative<std::string>(value));
    if (!ok)
      ParamError("parameter '" + name + "' of " + std::string(OpKindName(kind)) +
                 " has the wrong value domain");
  }
  for (const auto& spec : schema.params)
    if (spec.required && !params.count(spec.name))
      ParamError(std::string(OpKindName(kind)) + " requires parameter '" +
                 spec.name + "'");
}

std::string ParamToString(const ParamValue& value) {
  if (const auto* i = std::get_if<int64_t>(&value)) return std::to_string(*i);
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  const auto& list = std::get<std::vector<int64_t>>(value);
  std::string out = "[";
  for (size_t i = 0; i < list.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(list[i]);
  }
  return out + "]";
}

std::string EncodeFusedBody(const std::vector<FusedOp>& body) {
  std::string out;
  for (size_t i = 0; i < body.size(); ++i) {
    if (i) out += '|';
    out += OpKindName(body[i].kind);
    for (int a : body[i].args) {
      out += ':';
      out += a >= 0 ? "i" + std::to_string(a) : "t" + std::to_string(-a - 1);
    }
  }
  return out;
}

std::vector<FusedOp> DecodeFusedBody(std::string_view text) {
  std::vector<FusedOp> body;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t bar = text.find('|', pos);
    if (bar == std::string_view::npos) bar = text.size();
    std::string_view step = text.substr(pos, bar - pos);
    std::vector<std::string_view> parts;
    size_t p = 0;
    while (p <= step.size()) {
      size_t colon = step.find(':', p);
      if (colon == std::string_view::npos) colon = step.size();
      parts.push_back(step.substr(p, colon - p));
      p = colon + 1;
    }
    auto kind = ParseOpKind(parts[0]);
    if (!kind || !IsElementwise(*kind))
      ParamError("fused body step '" + std::string(step) + "' is not elementwise");
    FusedOp op{*kind, {}};
    for (size_t i = 1; i < parts.size(); ++i) {
      auto part = parts[i];
      if (part.size() < 2 || (part[0] != 'i' && part[0] != 't'))
        ParamError("bad fused operand '" + std::string(part) + "'");
      int v = 0;
      for (char c : part.substr(1)) {
        if (c < '0' || c > '9') ParamError("bad fused operand");
        v = v * 10 + (c - '0');
      }
      op.args.push_back(part[0] == 'i' ? v : -(v + 1));
    }
    body.push_back(std::move(op));
    pos = bar + 1;
  }
  return body;
}

const Node& Graph::at(NodeId id) const {
  auto it = nodes.find(id);
  if (it == nodes.end())
    throw Error(ErrorKind::kInvalidParam, "no node " + std::to_string(id));
  return it->second;
}

std::optional<Shape> BroadcastShapes(const Shape& a, const Shape& b) {
  const size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (size_t i = 0; i < rank; ++i) {
    const int64_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const int64_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da == db || db == 1) {
      out[i] = da;
    } else if (da == 1) {
      out[i] = db;
    } else {
      return std::nullopt;
    }
  }
  return out;
}

TensorType InferShape(OpKind kind, const Params& params,
                      const std::vector<TensorType>& in) {
  const OpSchema& schema = Schema(kind);
  if (static_cast<int>(in.size()) < schema.min_arity ||
      static_cast<int>(in.size()) > schema.max_arity)
    ShapeError(std::string(OpKindName(kind)) + " expects " +
               std::to_string(schema.min_arity) + " inputs, got " +
               std::to_string(in.size()));
  CheckParamSchema(kind, params);
  TensorType out;
  switch (kind) {
    case OpKind::kInput:
    case OpKind::kConstant:
      ParamError("source nodes carry their own type");
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul:
    case OpKind::kDiv: {
      RequireSameNumeric(in, OpKindName(kind));
      auto shape = BroadcastShapes(in[0].shape, in[1].shape);
      if (!shape)
        ShapeError("cannot broadcast " + in[0].ToString() + " with " +
                   in[1].ToString());
      out = {in[0].dtype, *shape};
      break;
    }
    case OpKind::kNeg:
    case OpKind::kRelu:
      RequireSameNumeric(in, OpKindName(kind));
      out = in[0];
      break;
    case OpKind::kSigmoid:
      if (in[0].dtype != DType::kF32) ShapeError("Sigmoid requires F32");
      out = in[0];
      break;
    case OpKind::kMatMul: {
      RequireSameNumeric(in, "MatMul");
      if (in[0].rank() != 2 || in[1].rank() != 2 ||
          in[0].shape[1] != in[1].shape[0])
        ShapeError("MatMul shapes " + in[0].ToString() + " x " + in[1].ToString());
      out = {in[0].dtype, {in[0].shape[0], in[1].shape[1]}};
      break;
    }
    case OpKind::kConv2D: {
      RequireSameNumeric(in, "Conv2D");
      const ConvGeometry g = ConvShape(params, in[0], in[1]);
      out = {in[0].dtype,
             g.nhwc ? Shape{g.n, g.oh, g.ow, g.o} : Shape{g.n, g.o, g.oh, g.ow}};
      break;
    }
    case OpKind::kReshape: {
      const auto& shape = *GetList(params, "shape");
      CheckRank(shape);
      out = {in[0].dtype, shape};
      if (out.NumElements() != in[0].NumElements())
        ShapeError("Reshape " + in[0].ToString() + " to " + out.ToString() +
                   " changes element count");
      break;
    }
    case OpKind::kTranspose: {
      const auto& perm = *GetList(params, "perm");
      if (static_cast<int>(perm.size()) != in[0].rank())
        ParamError("Transpose perm length does not match rank");
      std::vector<bool> seen(perm.size(), false);
      for (int64_t p : perm) {
        if (p < 0 || p >= in[0].rank() || seen[p])
          ParamError("Transpose perm is not a permutation");
        seen[p] = true;
      }
      out.dtype = in[0].dtype;
      for (int64_t p : perm) out.shape.push_back(in[0].shape[p]);
      break;
    }
    case OpKind::kConcat: {
      const int rank = in[0].rank();
      if (rank == 0) ShapeError("Concat of scalars");
      const int64_t axis = NormalizeAxis(GetInt(params, "axis", 0), rank);
      out = in[0];
      out.shape[axis] = 0;
      for (const auto& t : in) {
        if (t.dtype != in[0].dtype || t.rank() != rank)
          ShapeError("Concat inputs disagree: " + in[0].ToString() + " vs " +
                     t.ToString());
        for (int d = 0; d < rank; ++d)
          if (d != axis && t.shape[d] != in[0].shape[d])
            ShapeError("Concat extent mismatch: " + in[0].ToString() + " vs " +
                       t.ToString());
        out.shape[axis] += t.shape[axis];
      }
      break;
    }
    case OpKind::kReduceSum: {
      RequireSameNumeric(in, "ReduceSum");
      const auto mask = ReduceMask(params, in[0].rank());
      const int64_t keep = GetInt(params, "keepdims", 0);
      if (keep != 0 && keep != 1) ParamError("keepdims must be 0 or 1");
      out.dtype = in[0].dtype;
      for (int d = 0; d < in[0].rank(); ++d) {
        if (!mask[d]) {
          out.shape.push_back(in[0].shape[d]);
        } else if (keep) {
          out.shape.push_back(1);
        }
      }
      break;
    }
    case OpKind::kCast: {
      auto to = ParseDType(GetString(params, "to", ""));
      if (!to) ParamError("Cast target is not a dtype");
      out = {*to, in[0].shape};
      break;
    }
    case OpKind::kPad: {
      const auto& pads = *GetList(params, "pads");
      const int rank = in[0].rank();
      if (static_cast<int>(pads.size()) != 2 * rank)
        ParamError("Pad expects 2*rank entries");
      out = in[0];
      for (int d = 0; d < rank; ++d) {
        if (pads[d] < 0 || pads[d + rank] < 0) ParamError("negative pad");
        out.shape[d] += pads[d] + pads[d + rank];
      }
      break;
    }
    case OpKind::kFusedGroup:
      ParamError("FusedGroup types need the node body");
  }
  CheckRank(out.shape);
  return out;
}

TensorType InferNodeType(const Node& node, const std::vector<TensorType>& in) {
  if (node.kind != OpKind::kFusedGroup) return InferShape(node.kind, node.params, in);
  if (in.empty() || in.size() > 8) ShapeError("FusedGroup arity");
  if (node.fused.empty()) ParamError("empty FusedGroup body");
  std::vector<TensorType> results;
  for (const auto& step : node.fused) {
    std::vector<TensorType> args;
    for (int a : step.args) {
      if (a >= 0) {
        if (a >= static_cast<int>(in.size())) ParamError("fused operand out of range");
        args.push_back(in[a]);
      } else {
        const int k = -a - 1;
        if (k >= static_cast<int>(results.size()))
          ParamError("fused operand refers forward");
        args.push_back(results[k]);
      }
    }
    results.push_back(InferShape(step.kind, {}, args));
  }
  return results.back();
}

NodeId GraphBuilder::Input(const std::string& name, TensorType type) {
  Node n;
  n.id = graph_.NextId();
  n.kind = OpKind::kInput;
  n.params["name"] = name;
  n.out_type = std::move(type);
  graph_.nodes[n.id] = n;
  return n.id;
}

NodeId GraphBuilder::Constant(TensorType type, std::vector<double> data) {
  Node n;
  n.id = graph_.NextId();
  n.kind = OpKind::kConstant;
  n.out_type = std::move(type);
  n.payload = std::move(data);
  TensorValue{n.out_type, n.payload}.Check();
  graph_.nodes[n.id] = n;
  return n.id;
}

NodeId GraphBuilder::Op(OpKind kind, std::vector<NodeId> inputs, Params params) {
  Node n;
  n.id = graph_.NextId();
  n.kind = kind;
  n.params = std::move(params);
  n.inputs = std::move(inputs);
  std::vector<TensorType> types;
  for (NodeId i : n.inputs) types.push_back(graph_.at(i).out_type);
  n.out_type = InferShape(kind, n.params, types);
  graph_.nodes[n.id] = n;
  return n.id;
}

std::string_view ViolationKindName(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::kCycleDetected: return "CycleDetected";
    case ViolationKind::kDanglingInput: return "DanglingInput";
    case ViolationKind::kDanglingOutput: return "DanglingOutput";
    case ViolationKind::kNoOutputs: return "NoOutputs";
    case ViolationKind::kNoSource: return "NoSource";
    case ViolationKind::kArityMismatch: return "ArityMismatch";
    case ViolationKind::kParamInvalid: return "ParamInvalid";
    case ViolationKind::kShapeMismatch: return "ShapeMismatch";
    case ViolationKind::kTypeMismatch: return "TypeMismatch";
    case ViolationKind::kPayloadMismatch: return "PayloadMismatch";
    case ViolationKind::kIdMismatch: return "IdMismatch";
  }
  return "?";
}

bool ValidationReport::Has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::ToString() const {
  std::string s;
  for (const auto& v : violations) {
    if (!s.empty()) s += "; ";
    s += std::string(ViolationKindName(v.kind));
    if (v.node >= 0) s += "(" + std::to_string(v.node) + ")";
    if (!v.message.empty()) s += ": " + v.message;
  }
  return s;
}

std::optional<std::vector<NodeId>> TopologicalOrder(const Graph& g) {
  // 0 = unvisited, 1 = on stack, 2 = done.
  std::map<NodeId, int> state;
  std::vector<NodeId> order;
  order.reserve(g.nodes.size());
  for (const auto& [root, unused] : g.nodes) {
    if (state[root] == 2) continue;
    std::vector<std::pair<NodeId, size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto& [id, next] = stack.back();
      const Node& node = g.nodes.at(id);
      if (next < node.inputs.size()) {
        const NodeId in = node.inputs[next++];
        if (!g.nodes.count(in)) return std::nullopt;
        int& s = state[in];
        if (s == 1) return std::nullopt;
        if (s == 0) {
          s = 1;
          stack.emplace_back(in, 0);
        }
      } else {
        state[id] = 2;
        order.push_back(id);
        stack.pop_back();
      }
    }
  }
  return order;
}

std::vector<NodeId> LiveNodes(const Graph& g) {
  std::set<NodeId> live;
  std::vector<NodeId> work(g.outputs.begin(), g.outputs.end());
  while (!work.empty()) {
    NodeId id = work.back();
    work.pop_back();
    if (!g.nodes.count(id) || !live.insert(id).second) continue;
    for (NodeId in : g.nodes.at(id).inputs) work.push_back(in);
  }
  return {live.begin(), live.end()};
}

std::map<NodeId, int> ConsumerCounts(const Graph& g) {
  std::map<NodeId, int> counts;
  for (const auto& [id, node] : g.nodes) {
    std::set<NodeId> distinct(node.inputs.begin(), node.inputs.end());
    for (NodeId in : distinct) ++counts[in];
  }
  for (NodeId out : g.outputs) ++counts[out];
  return counts;
}

ValidationReport ValidateGraph(const Graph& g) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, NodeId node, std::string msg) {
    report.violations.push_back({kind, node, std::move(msg)});
  };
  if (g.outputs.empty()) add(ViolationKind::kNoOutputs, -1, "graph has no outputs");
  for (NodeId out : g.outputs)
    if (!g.nodes.count(out))
      add(ViolationKind::kDanglingOutput, out, "output refers to missing node");
  bool has_source = false;
  bool dangling = false;
  for (const auto& [id, node] : g.nodes) {
    if (node.id != id) add(ViolationKind::kIdMismatch, id, "node id does not match key");
    if (node.kind == OpKind::kInput || node.kind == OpKind::kConstant)
      has_source = true;
    for (NodeId in : node.inputs) {
      if (!g.nodes.count(in)) {
        add(ViolationKind::kDanglingInput, in,
            "node " + std::to_string(id) + " reads missing node");
        dangling = true;
      }
    }
  }
  if (!has_source) add(ViolationKind::kNoSource, -1, "no Input or Constant node");
  if (dangling) return report;
  auto order = TopologicalOrder(g);
  if (!order) {
    add(ViolationKind::kCycleDetected, -1, "edges form a cycle");
    return report;
  }
  for (NodeId id : *order) {
    const Node& node = g.nodes.at(id);
    const OpSchema& schema = Schema(node.kind);
    const int arity = static_cast<int>(node.inputs.size());
    if (arity < schema.min_arity || arity > schema.max_arity) {
      add(ViolationKind::kArityMismatch, id,
          std::string(OpKindName(node.kind)) + " with " + std::to_string(arity) +
              " inputs");
      continue;
    }
    try {
      CheckParamSchema(node.kind, node.params);
    } catch (const Error& e) {
      add(ViolationKind::kParamInvalid, id, e.detail());
      continue;
    }
    if (node.kind == OpKind::kInput || node.kind == OpKind::kConstant) {
      if (node.out_type.rank() > kMaxRank ||
          std::any_of(node.out_type.shape.begin(), node.out_type.shape.end(),
                      [](int64_t d) { return d < 0; }))
        add(ViolationKind::kShapeMismatch, id, "invalid source shape");
      if (node.kind == OpKind::kConstant) {
        try {
          TensorValue{node.out_type, node.payload}.Check();
        } catch (const Error& e) {
          add(ViolationKind::kPayloadMismatch, id, e.detail());
        }
      }
      continue;
    }
    std::vector<TensorType> types;
    for (NodeId in : node.inputs) types.push_back(g.nodes.at(in).out_type);
    try {
      TensorType inferred = InferNodeType(node, types);
      if (inferred != node.out_type)
        add(ViolationKind::kTypeMismatch, id,
            "declared " + node.out_type.ToString() + " but inferred " +
                inferred.ToString());
    } catch (const Error& e) {
      add(e.kind() == ErrorKind::kInvalidParam ? ViolationKind::kParamInvalid
                                               : ViolationKind::kShapeMismatch,
          id, e.detail());
    }
  }
  return report;
}

namespace {

std::vector<int64_t> Unravel(int64_t flat, const Shape& shape) {
  std::vector<int64_t> idx(shape.size());
  for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
    idx[d] = shape[d] == 0 ? 0 : flat % shape[d];
    flat = shape[d] == 0 ? 0 : flat / shape[d];
  }
  return idx;
}

// Flat index into `in_shape` for an output multi-index under trailing
// broadcast alignment.
int64_t BroadcastIndex(const std::vector<int64_t>& out_idx, const Shape& in_shape) {
  const size_t offset = out_idx.size() - in_shape.size();
  int64_t flat = 0;
  for (size_t d = 0; d < in_shape.size(); ++d) {
    const int64_t i = in_shape[d] == 1 ? 0 : out_idx[d + offset];
    flat = flat * in_shape[d] + i;
  }
  return flat;
}

scalar::BinaryOp ToBinary(OpKind kind) {
  switch (kind) {
    case OpKind::kAdd: return scalar::BinaryOp::kAdd;
    case OpKind::kSub: return scalar::BinaryOp::kSub;
    case OpKind::kMul: return scalar::BinaryOp::kMul;
    default: return scalar::BinaryOp::kDiv;
  }
}

scalar::UnaryOp ToUnary(OpKind kind) {
  switch (kind) {
    case OpKind::kNeg: return scalar::UnaryOp::kNeg;
    case OpKind::kRelu: return scalar::UnaryOp::kRelu;
    default: return scalar::UnaryOp::kSigmoid;
  }
}

TensorValue EvalElementwise(OpKind kind, const std::vector<const TensorValue*>& in,
                            const EvalOptions& options) {
  std::vector<TensorType> types;
  for (const auto* v : in) types.push_back(v->type);
  TensorValue out{InferShape(kind, {}, types), {}};
  const int64_t n = out.type.NumElements();
  out.data.resize(n);
  const DType dt = out.type.dtype;
  for (int64_t i = 0; i < n; ++i) {
    const auto idx = Unravel(i, out.type.shape);
    if (IsBinaryElementwise(kind)) {
      const double a = in[0]->data[BroadcastIndex(idx, in[0]->type.shape)];
      const double b = in[1]->data[BroadcastIndex(idx, in[1]->type.shape)];
      out.data[i] = scalar::Binary(ToBinary(kind), dt, a, b, options.saturate_i8);
    } else {
      out.data[i] = scalar::Unary(ToUnary(kind), dt, in[0]->data[i]);
    }
  }
  return out;
}

}  // namespace

TensorValue EvaluateNode(const Node& node, const std::vector<TensorValue>& in,
                         const EvalOptions& options) {
  using scalar::BinaryOp;
  if (node.kind == OpKind::kConstant) return {node.out_type, node.payload};
  if (node.kind == OpKind::kInput)
    throw Error(ErrorKind::kMissingInput, "Input nodes are bound by name");
  if (IsElementwise(node.kind)) {
    std::vector<const TensorValue*> ptrs;
    for (const auto& v : in) ptrs.push_back(&v);
    return EvalElementwise(node.kind, ptrs, options);
  }
  std::vector<TensorType> types;
  for (const auto& v : in) types.push_back(v.type);
  TensorValue out{InferNodeType(node, types), {}};
  const DType dt = out.type.dtype;
  out.data.assign(out.type.NumElements(), 0.0);
  switch (node.kind) {
    case OpKind::kMatMul: {
      const int64_t m = in[0].type.shape[0];
      const int64_t k = in[0].type.shape[1];
      const int64_t n = in[1].type.shape[1];
      for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (int64_t p = 0; p < k; ++p) {
            const double prod = scalar::Binary(BinaryOp::kMul, dt, in[0].data[i * k + p],
                                               in[1].data[p * n + j]);
            acc = scalar::Binary(BinaryOp::kAdd, dt, acc, prod);
          }
          out.data[i * n + j] = acc;
        }
      break;
    }
    case OpKind::kConv2D: {
      const ConvGeometry g = ConvShape(node.params, in[0].type, in[1].type);
      const auto& x = in[0].data;
      const auto& w = in[1].data;
      auto x_at = [&](int64_t n, int64_t c, int64_t h, int64_t ww) {
        return g.nhwc ? x[((n * g.h + h) * g.w + ww) * g.c + c]
                      : x[((n * g.c + c) * g.h + h) * g.w + ww];
      };
      for (int64_t n = 0; n < g.n; ++n)
        for (int64_t o = 0; o < g.o; ++o)
          for (int64_t oh = 0; oh < g.oh; ++oh)
            for (int64_t ow = 0; ow < g.ow; ++ow) {
              double acc = 0.0;
              for (int64_t c = 0; c < g.c; ++c)
                for (int64_t kh = 0; kh < g.kh; ++kh)
                  for (int64_t kw = 0; kw < g.kw; ++kw) {
                    const int64_t ih = oh * g.sh + kh - g.pt;
                    const int64_t iw = ow * g.sw + kw - g.pl;
                    if (ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                    const double prod = scalar::Binary(
                        BinaryOp::kMul, dt, x_at(n, c, ih, iw),
                        w[((o * g.c + c) * g.kh + kh) * g.kw + kw]);
                    acc = scalar::Binary(BinaryOp::kAdd, dt, acc, prod);
                  }
              const int64_t flat = g.nhwc ? ((n * g.oh + oh) * g.ow + ow) * g.o + o
                                          : ((n * g.o + o) * g.oh + oh) * g.ow + ow;
              out.data[flat] = acc;
            }
      break;
    }
    case OpKind::kReshape:
      out.data = in[0].data;
      break;
    case OpKind::kTranspose: {
      const auto& perm = std::get<std::vector<int64_t>>(node.params.at("perm"));
      const auto in_strides = Strides(in[0].type.shape);
      for (int64_t i = 0; i < static_cast<int64_t>(out.data.size()); ++i) {
        const auto idx = Unravel(i, out.type.shape);
        int64_t src = 0;
        for (size_t d = 0; d < perm.size(); ++d) src += idx[d] * in_strides[perm[d]];
        out.data[i] = in[0].data[src];
      }
      break;
    }
    case OpKind::kConcat: {
      const int rank = out.type.rank();
      const int64_t axis =
          NormalizeAxis(std::get<int64_t>(node.params.at("axis")), rank);
      int64_t offset = 0;
      const auto out_strides = Strides(out.type.shape);
      for (const auto& v : in) {
        for (int64_t i = 0; i < static_cast<int64_t>(v.data.size()); ++i) {
          auto idx = Unravel(i, v.type.shape);
          idx[axis] += offset;
          int64_t dst = 0;
          for (int d = 0; d < rank; ++d) dst += idx[d] * out_strides[d];
          out.data[dst] = v.data[i];
        }
        offset += v.type.shape[axis];
      }
      break;
    }
    case OpKind::kReduceSum: {
      const auto mask = ReduceMask(node.params, in[0].type.rank());
      Shape kept;
      for (int d = 0; d < in[0].type.rank(); ++d)
        if (!mask[d]) kept.push_back(in[0].type.shape[d]);
      const auto kept_strides = Strides(kept);
      for (int64_t i = 0; i < static_cast<int64_t>(in[0].data.size()); ++i) {
        const auto idx = Unravel(i, in[0].type.shape);
        int64_t dst = 0;
        int k = 0;
        for (int d = 0; d < in[0].type.rank(); ++d)
          if (!mask[d]) dst += idx[d] * kept_strides[k++];
        out.data[dst] = scalar::Binary(BinaryOp::kAdd, dt, out.data[dst], in[0].data[i]);
      }
      break;
    }
    case OpKind::kCast:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = scalar::Cast(in[0].type.dtype, dt, in[0].data[i]);
      break;
    case OpKind::kPad: {
      const auto& pads = std::get<std::vector<int64_t>>(node.params.at("pads"));
      const int rank = in[0].type.rank();
      const auto out_strides = Strides(out.type.shape);
      for (int64_t i = 0; i < static_cast<int64_t>(in[0].data.size()); ++i) {
        const auto idx = Unravel(i, in[0].type.shape);
        int64_t dst = 0;
        for (int d = 0; d < rank; ++d) dst += (idx[d] + pads[d]) * out_strides[d];
        out.data[dst] = in[0].data[i];
      }
      break;
    }
    case OpKind::kFusedGroup: {
      std::vector<TensorValue> results;
      for (const auto& step : node.fused) {
        std::vector<const TensorValue*> args;
        for (int a : step.args) args.push_back(a >= 0 ? &in[a] : &results[-a - 1]);
        results.push_back(EvalElementwise(step.kind, args, options));
      }
      out = std::move(results.back());
      break;
    }
    default:
      throw Error(ErrorKind::kInvalidParam, "cannot evaluate " +
                                                std::string(OpKindName(node.kind)));
  }
  return out;
}

std::vector<TensorValue> InterpretGraph(const Graph& g, const Bindings& inputs,
                                        const EvalOptions& options) {
  auto order = TopologicalOrder(g);
  if (!order) throw Error(ErrorKind::kInvalidParam, "graph is not a DAG");
  const auto live_list = LiveNodes(g);
  const std::set<NodeId> live(live_list.begin(), live_list.end());
  std::map<NodeId, TensorValue> values;
  for (NodeId id : *order) {
    if (!live.count(id)) continue;
    const Node& node = g.nodes.at(id);
    if (node.kind == OpKind::kInput) {
      const auto& name = std::get<std::string>(node.params.at("name"));
      auto it = inputs.find(name);
      if (it == inputs.end())
        throw Error(ErrorKind::kMissingInput, "input '" + name + "' is not bound");
      if (it->second.type != node.out_type)
        throw Error(ErrorKind::kMissingInput, "input '" + name + "' bound to " +
                                                  it->second.type.ToString() +
                                                  ", expected " +
                                                  node.out_type.ToString());
      values[id] = it->second;
      continue;
    }
    std::vector<TensorValue> args;
    args.reserve(node.inputs.size());
    for (NodeId in : node.inputs) args.push_back(values.at(in));
    values[id] = EvaluateNode(node, args, options);
  }
  std::vector<TensorValue> outs;
  for (NodeId id : g.outputs) outs.push_back(values.at(id));
  return outs;
}

Bindings RandomBindings(const Graph& g, uint64_t seed) {
  Bindings b;
  for (const auto& [id, node] : g.nodes) {
    if (node.kind != OpKind::kInput) continue;
    b[std::get<std::string>(node.params.at("name"))] =
        RandomTensor(node.out_type, seed * 1000003ULL + static_cast<uint64_t>(id));
  }
  return b;
}

}  // namespace stagefuzz::graph

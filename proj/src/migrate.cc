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

#include "stagefuzz/migrate.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stagefuzz/error.h"
#include "stagefuzz/hash.h"
#include "text_util.h"

namespace stagefuzz::migrate {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void Violation(const std::string& msg) {
  throw Error(ErrorKind::kSchemaViolation, msg);
}

graph::ParamValue ParamFromJson(const std::string& name, const json& v) {
  if (v.is_number_integer()) return v.get<int64_t>();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::vector<int64_t> list;
    for (const auto& e : v) {
      if (!e.is_number_integer()) Violation("parameter '" + name + "' has a non-integer entry");
      list.push_back(e.get<int64_t>());
    }
    return list;
  }
  Violation("parameter '" + name + "' has an unsupported value");
}

InputSpec InputFromJson(const json& j, size_t k) {
  const std::string where = "input " + std::to_string(k);
  if (!j.is_object()) Violation(where + " is not an object");
  InputSpec spec;
  if (!j.contains("shape") || !j["shape"].is_array()) Violation(where + " lacks a shape");
  for (const auto& d : j["shape"]) {
    if (!d.is_number_integer()) Violation(where + " has a non-integer extent");
    spec.type.shape.push_back(d.get<int64_t>());
  }
  if (!j.contains("dtype") || !j["dtype"].is_string()) Violation(where + " lacks a dtype");
  const auto dt = ParseDType(j["dtype"].get<std::string>());
  if (!dt || *dt == DType::kBool) Violation(where + " has unsupported dtype");
  spec.type.dtype = *dt;

  if (spec.type.rank() > kMaxRank) Violation(where + " exceeds the rank cap");
  for (int64_t e : spec.type.shape)
    if (e < 1 || e > kMaxExtent) Violation(where + " has extent outside [1, 64]");
  if (spec.type.NumElements() > kMaxRecordElements) Violation(where + " is too large");

  if (!j.contains("src") || !j["src"].is_object()) Violation(where + " lacks a data source");
  const json& src = j["src"];
  if (src.contains("random") == src.contains("data"))
    Violation(where + " needs exactly one of random/data");
  if (src.contains("random")) {
    if (!src["random"].is_number_unsigned()) Violation(where + " random seed must be >= 0");
    spec.random_seed = src["random"].get<uint64_t>();
  } else {
    if (!src["data"].is_array()) Violation(where + " data must be a list");
    for (const auto& v : src["data"]) {
      if (!v.is_number()) Violation(where + " data must be numeric");
      spec.inline_data.push_back(v.get<double>());
    }
    try {
      TensorValue{spec.type, spec.inline_data}.Check();
    } catch (const Error& e) {
      Violation(where + ": " + e.detail());
    }
  }
  return spec;
}

ojson NumberJson(double v) {
  if (v == static_cast<double>(static_cast<int64_t>(v))) return static_cast<int64_t>(v);
  return v;
}

}  // namespace

OperatorInstanceRecord ParseRecord(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    Violation(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) Violation("record is not an object");
  if (!j.contains("kind") || !j["kind"].is_string()) Violation("record lacks a kind");
  const std::string kind_name = j["kind"].get<std::string>();
  const auto kind = graph::ParseOpKind(kind_name);
  if (!kind || *kind == OpKind::kInput || *kind == OpKind::kConstant ||
      *kind == OpKind::kFusedGroup)
    Violation("unknown operator kind '" + kind_name + "'");

  OperatorInstanceRecord r;
  r.kind = *kind;
  if (j.contains("params")) {
    if (!j["params"].is_object()) Violation("params must be an object");
    for (const auto& [name, v] : j["params"].items()) r.params[name] = ParamFromJson(name, v);
  }
  try {
    graph::CheckParamSchema(r.kind, r.params);
  } catch (const Error& e) {
    Violation(e.detail());
  }
  if (!j.contains("inputs") || !j["inputs"].is_array()) Violation("record lacks inputs");
  for (size_t k = 0; k < j["inputs"].size(); ++k)
    r.inputs.push_back(InputFromJson(j["inputs"][k], k));
  // Arity belongs to the shape rule: a wrong count makes a negative record.
  if (r.inputs.size() > 8) Violation("too many inputs");
  if (!j.contains("origin") || !j["origin"].is_string()) Violation("record lacks an origin");
  r.origin = j["origin"].get<std::string>();
  return r;
}

std::string RecordToJson(const OperatorInstanceRecord& r) {
  ojson j;
  j["kind"] = std::string(graph::OpKindName(r.kind));
  ojson params = ojson::object();
  for (const auto& [name, v] : r.params) {
    if (const auto* i = std::get_if<int64_t>(&v)) {
      params[name] = *i;
    } else if (const auto* s = std::get_if<std::string>(&v)) {
      params[name] = *s;
    } else {
      params[name] = std::get<std::vector<int64_t>>(v);
    }
  }
  j["params"] = params;
  ojson inputs = ojson::array();
  for (const auto& in : r.inputs) {
    ojson spec;
    spec["shape"] = in.type.shape;
    spec["dtype"] = std::string(DTypeName(in.type.dtype));
    ojson src;
    if (in.random_seed) {
      src["random"] = *in.random_seed;
    } else {
      ojson data = ojson::array();
      for (double v : in.inline_data) data.push_back(NumberJson(v));
      src["data"] = data;
    }
    spec["src"] = src;
    inputs.push_back(spec);
  }
  j["inputs"] = inputs;
  j["origin"] = r.origin;
  return j.dump();
}

IngestResult IngestText(const std::string& text) {
  IngestResult result;
  const auto lines = text::SplitLines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.records.push_back(ParseRecord(lines[i]));
    } catch (const Error& e) {
      ++result.skipped;
      result.problems.push_back("line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (result.records.empty() && result.skipped == 0) result.warnings.push_back("empty corpus");
  return result;
}

IngestResult IngestCorpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kCorpusUnreadable, "cannot open corpus '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return IngestText(ss.str());
}

// --- wrapping -------------------------------------------------------------

namespace {

std::vector<graph::NodeId> AddSources(graph::GraphBuilder& b, const OperatorInstanceRecord& r) {
  std::vector<graph::NodeId> ids;
  for (size_t k = 0; k < r.inputs.size(); ++k) {
    const auto& in = r.inputs[k];
    if (in.random_seed) {
      ids.push_back(b.Input("in" + std::to_string(k), in.type));
    } else {
      ids.push_back(b.Constant(in.type, in.inline_data));
    }
  }
  return ids;
}

std::string RecordName(const OperatorInstanceRecord& r) {
  return r.origin.empty() ? std::string(graph::OpKindName(r.kind)) : r.origin;
}

}  // namespace

Graph WrapInstance(const OperatorInstanceRecord& r) {
  graph::GraphBuilder b(RecordName(r));
  const auto ids = AddSources(b, r);
  try {
    b.Output(b.Op(r.kind, ids, r.params));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kShapeMismatch) throw;
    throw Error(ErrorKind::kShapeMismatch, e.detail());
  }
  return b.Build();
}

graph::Bindings RecordBindings(const OperatorInstanceRecord& r) {
  graph::Bindings bindings;
  for (size_t k = 0; k < r.inputs.size(); ++k)
    if (r.inputs[k].random_seed)
      bindings["in" + std::to_string(k)] = RandomTensor(r.inputs[k].type, *r.inputs[k].random_seed);
  return bindings;
}

Graph LoadRecord(const OperatorInstanceRecord& r, const BugSet& bugs) {
  graph::GraphBuilder b(RecordName(r));
  const auto ids = AddSources(b, r);
  Params params = r.params;
  const auto in_type = [&](size_t k) { return r.inputs.at(k).type; };

  if (r.kind == OpKind::kConv2D && bugs.Has(BugId::kL1)) {
    auto it = params.find("pad");
    if (it != params.end()) {
      const auto& pad = std::get<std::vector<int64_t>>(it->second);
      if (pad.size() == 4) it->second = std::vector<int64_t>{pad[0], pad[1]};
    }
  }
  if (r.kind == OpKind::kCast && bugs.Has(BugId::kL2) && in_type(0).dtype == DType::kI32) {
    b.Output(ids[0]);
    return b.Build();
  }
  if (r.kind == OpKind::kConcat && bugs.Has(BugId::kL3)) {
    auto& axis = std::get<int64_t>(params.at("axis"));
    if (axis < 0) axis -= 1;
  }
  if (r.kind == OpKind::kTranspose && bugs.Has(BugId::kL4)) {
    // Only range and length are checked; repeated entries slip through.
    const auto& perm = std::get<std::vector<int64_t>>(params.at("perm"));
    const TensorType t = in_type(0);
    bool in_range = static_cast<int>(perm.size()) == t.rank();
    for (int64_t p : perm) in_range = in_range && p >= 0 && p < t.rank();
    if (in_range) {
      graph::Node n;
      n.id = b.graph().NextId();
      n.kind = OpKind::kTranspose;
      n.params = params;
      n.inputs = {ids[0]};
      n.out_type.dtype = t.dtype;
      for (int64_t p : perm) n.out_type.shape.push_back(t.shape[p]);
      b.graph().nodes[n.id] = n;
      b.Output(n.id);
      return b.Build();
    }
  }
  b.Output(b.Op(r.kind, ids, params));
  return b.Build();
}

// --- corpus synthesis -----------------------------------------------------

namespace {

class CorpusGen {
 public:
  explicit CorpusGen(uint64_t seed) : rng_(seed) {}

  OperatorInstanceRecord Make(OpKind kind, int index, bool negative) {
    OperatorInstanceRecord r;
    r.kind = kind;
    r.origin = "t_" + Lower(graph::OpKindName(kind)) + (negative ? "_neg_" : "_") +
               std::to_string(index);
    // Library suites call most operators the ordinary way most of the time.
    if (!negative && Chance(kCanonicalShare)) {
      Canonical(r);
      return r;
    }
    switch (kind) {
      case OpKind::kAdd:
      case OpKind::kSub:
      case OpKind::kMul:
      case OpKind::kDiv: Binary(r, negative); break;
      case OpKind::kNeg:
      case OpKind::kRelu:
      case OpKind::kSigmoid: Unary(r); break;
      case OpKind::kMatMul: MatMul(r, negative); break;
      case OpKind::kConv2D: Conv(r, negative); break;
      case OpKind::kReshape: Reshape(r, negative); break;
      case OpKind::kTranspose: Transpose(r, negative); break;
      case OpKind::kConcat: Concat(r, negative); break;
      case OpKind::kReduceSum: Reduce(r); break;
      case OpKind::kCast: Cast(r); break;
      case OpKind::kPad: Pad(r); break;
      default: break;
    }
    return r;
  }

 private:
  static std::string Lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }

  static constexpr double kCanonicalShare = 0.6;

  // F32, rank 2, default or simplest parameters.
  void Canonical(OperatorInstanceRecord& r) {
    const Shape a = RandShape(2);
    const TensorType f32{DType::kF32, a};
    switch (r.kind) {
      case OpKind::kMatMul: {
        const int64_t k = Uniform(1, 8);
        r.inputs.push_back(Spec({DType::kF32, {Uniform(1, 8), k}}));
        r.inputs.push_back(Spec({DType::kF32, {k, Uniform(1, 8)}}));
        break;
      }
      case OpKind::kConv2D:
        r.inputs.push_back(Spec({DType::kF32, {1, Uniform(1, 3), Uniform(4, 8), Uniform(4, 8)}},
                                false));
        r.inputs.push_back(Spec({DType::kF32, {Uniform(1, 4), r.inputs[0].type.shape[1],
                                               Uniform(1, 3), Uniform(1, 3)}}));
        break;
      case OpKind::kReshape:
        r.inputs.push_back(Spec(f32));
        r.params["shape"] = Shape{f32.NumElements()};
        break;
      case OpKind::kTranspose:
        r.inputs.push_back(Spec(f32));
        r.params["perm"] = std::vector<int64_t>{1, 0};
        break;
      case OpKind::kConcat: {
        r.inputs.push_back(Spec(f32));
        Shape b = a;
        b[0] = Uniform(1, 4);
        r.inputs.push_back(Spec({DType::kF32, b}));
        r.params["axis"] = int64_t{0};
        break;
      }
      case OpKind::kReduceSum:
        r.inputs.push_back(Spec(f32));
        r.params["axes"] = std::vector<int64_t>{1};
        break;
      case OpKind::kCast:
        r.inputs.push_back(Spec(f32));
        r.params["to"] = std::string(DTypeName(DType::kI32));
        break;
      case OpKind::kPad:
        r.inputs.push_back(Spec(f32));
        r.params["pads"] = std::vector<int64_t>{1, 1, 1, 1};
        break;
      case OpKind::kAdd:
      case OpKind::kSub:
      case OpKind::kMul:
      case OpKind::kDiv:
        r.inputs.push_back(Spec(f32));
        r.inputs.push_back(Spec(f32));
        break;
      default:
        r.inputs.push_back(Spec(f32));
        break;
    }
  }

  int64_t Uniform(int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng_);
  }
  bool Chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  Shape RandShape(int rank, int64_t max_extent = 6) {
    Shape s;
    for (int d = 0; d < rank; ++d) s.push_back(Uniform(1, max_extent));
    return s;
  }

  DType RandDType(bool allow_int = true) {
    if (!allow_int) return DType::kF32;
    const int64_t x = Uniform(0, 9);
    return x < 7 ? DType::kF32 : (x < 9 ? DType::kI32 : DType::kI8);
  }

  InputSpec Spec(TensorType type, bool allow_inline = true) {
    InputSpec s{std::move(type), std::nullopt, {}};
    if (allow_inline && s.type.NumElements() <= 16 && Chance(0.15)) {
      s.inline_data = RandomTensor(s.type, rng_()).data;
    } else {
      s.random_seed = rng_() % 1000000;
    }
    return s;
  }

  // Nonzero inline divisor for integer Div.
  InputSpec NonZero(TensorType type) {
    InputSpec s{type, std::nullopt, {}};
    for (int64_t i = 0; i < type.NumElements(); ++i) {
      int64_t v = Uniform(1, 9);
      s.inline_data.push_back(static_cast<double>(Chance(0.5) ? v : -v));
    }
    return s;
  }

  void Binary(OperatorInstanceRecord& r, bool negative) {
    const DType dt = RandDType();
    const Shape a = RandShape(static_cast<int>(Uniform(1, 4)));
    Shape b = a;
    if (negative) {
      b.back() = a.back() + 1;
    } else if (Chance(0.3)) {
      b = {a.back()};
    } else if (Chance(0.15)) {
      b = {1};
    }
    r.inputs.push_back(Spec({dt, a}));
    const bool int_div = r.kind == OpKind::kDiv && dt != DType::kF32;
    r.inputs.push_back(int_div ? NonZero({dt, b}) : Spec({dt, b}));
  }

  void Unary(OperatorInstanceRecord& r) {
    const DType dt = RandDType(r.kind != OpKind::kSigmoid);
    r.inputs.push_back(Spec({dt, RandShape(static_cast<int>(Uniform(1, 4)))}));
  }

  void MatMul(OperatorInstanceRecord& r, bool negative) {
    const DType dt = Chance(0.8) ? DType::kF32 : DType::kI32;
    if (negative) {
      r.inputs.push_back(Spec({dt, {3, 4}}));
      r.inputs.push_back(Spec({dt, {5, 6}}));
      return;
    }
    const int64_t m = Uniform(1, 8), k = Uniform(1, 8), n = Uniform(1, 8);
    r.inputs.push_back(Spec({dt, {m, k}}));
    r.inputs.push_back(Spec({dt, {k, n}}));
  }

  void Conv(OperatorInstanceRecord& r, bool negative) {
    const int64_t n = Uniform(1, 2), c = Uniform(1, 3), h = Uniform(4, 8), w = Uniform(4, 8);
    const int64_t o = Uniform(1, 4), kh = Uniform(1, 3), kw = Uniform(1, 3);
    r.inputs.push_back(Spec({DType::kF32, {n, c, h, w}}, false));
    r.inputs.push_back(Spec({DType::kF32, {o, negative ? c + 1 : c, kh, kw}}));
    if (Chance(0.6)) {
      const int64_t s = Uniform(1, 2);
      r.params["stride"] = std::vector<int64_t>{s, s};
    }
    const int64_t mode = Uniform(0, 2);
    if (mode == 1) {
      const int64_t p = Uniform(0, 1);
      r.params["pad"] = std::vector<int64_t>{p, p};
    } else if (mode == 2) {
      r.params["pad"] =
          std::vector<int64_t>{Uniform(0, 2), Uniform(0, 2), Uniform(0, 2), Uniform(0, 2)};
    }
  }

  void Reshape(OperatorInstanceRecord& r, bool negative) {
    const DType dt = RandDType();
    const Shape s = RandShape(static_cast<int>(Uniform(1, 3)));
    const int64_t total = TensorType{dt, s}.NumElements();
    Shape target;
    std::vector<int64_t> divisors;
    for (int64_t d = 1; d <= total; ++d)
      if (total % d == 0) divisors.push_back(d);
    const int64_t a = divisors[Uniform(0, static_cast<int64_t>(divisors.size()) - 1)];
    if (Chance(0.3)) {
      target = {total};
    } else {
      target = {a, total / a};
    }
    if (negative) target.back() += 1;
    r.inputs.push_back(Spec({dt, s}));
    r.params["shape"] = target;
  }

  void Transpose(OperatorInstanceRecord& r, bool negative) {
    const DType dt = RandDType();
    const int rank = static_cast<int>(Uniform(2, 4));
    std::vector<int64_t> perm(rank);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng_);
    if (negative) perm[0] = perm[1];
    r.inputs.push_back(Spec({dt, RandShape(rank, 5)}));
    r.params["perm"] = perm;
  }

  void Concat(OperatorInstanceRecord& r, bool negative) {
    const DType dt = RandDType();
    const int rank = static_cast<int>(Uniform(1, 3));
    const Shape base = RandShape(rank);
    const int64_t axis = Uniform(0, rank - 1);
    const int parts = static_cast<int>(Uniform(2, 3));
    for (int k = 0; k < parts; ++k) {
      Shape s = base;
      s[axis] = Uniform(1, 4);
      if (negative && k == 1) {
        const int other = (static_cast<int>(axis) + 1) % rank;
        if (other != axis) {
          s[other] += 1;
        } else {
          s.push_back(1);
        }
      }
      r.inputs.push_back(Spec({dt, s}));
    }
    r.params["axis"] = Chance(0.5) ? axis - rank : axis;
  }

  void Reduce(OperatorInstanceRecord& r) {
    const DType dt = RandDType();
    const int rank = static_cast<int>(Uniform(1, 4));
    std::vector<int64_t> axes;
    for (int d = 0; d < rank; ++d)
      if (Chance(0.5)) axes.push_back(Chance(0.3) ? d - rank : d);
    if (axes.empty()) axes.push_back(Uniform(0, rank - 1));
    r.inputs.push_back(Spec({dt, RandShape(rank)}));
    r.params["axes"] = axes;
    if (Chance(0.5)) r.params["keepdims"] = Uniform(0, 1);
  }

  void Cast(OperatorInstanceRecord& r) {
    static const DType kTypes[] = {DType::kF32, DType::kI32, DType::kI8};
    const DType from = kTypes[Uniform(0, 2)], to = kTypes[Uniform(0, 2)];
    r.inputs.push_back(Spec({from, RandShape(static_cast<int>(Uniform(1, 3)))}));
    r.params["to"] = std::string(DTypeName(to));
  }

  void Pad(OperatorInstanceRecord& r) {
    const DType dt = RandDType();
    const int rank = static_cast<int>(Uniform(1, 3));
    std::vector<int64_t> pads;
    for (int d = 0; d < 2 * rank; ++d) pads.push_back(Uniform(0, 2));
    r.inputs.push_back(Spec({dt, RandShape(rank)}));
    r.params["pads"] = pads;
  }

  std::mt19937_64 rng_;
};

}  // namespace

std::vector<OperatorInstanceRecord> GenerateCorpus(uint64_t seed, int count) {
  std::vector<OpKind> kinds;
  for (OpKind k : graph::UserOpKinds())
    if (k != OpKind::kInput && k != OpKind::kConstant) kinds.push_back(k);
  // Kinds with an error path worth keeping as negative loader tests.
  const std::set<OpKind> has_negative = {OpKind::kAdd,      OpKind::kSub,       OpKind::kMul,
                                         OpKind::kDiv,      OpKind::kMatMul,    OpKind::kConv2D,
                                         OpKind::kReshape,  OpKind::kTranspose, OpKind::kConcat};
  CorpusGen gen(seed);
  std::vector<OperatorInstanceRecord> out;
  for (int i = 0; i < count; ++i) {
    const OpKind kind = kinds[i % kinds.size()];
    const bool negative = has_negative.count(kind) && (i / kinds.size()) % 12 == 5;
    out.push_back(gen.Make(kind, i, negative));
  }
  return out;
}

// --- features -------------------------------------------------------------

const std::vector<std::string>& FeatureParamNames() {
  static const std::vector<std::string> names = {"stride", "pad",      "layout", "shape",
                                                 "perm",   "axis",     "axes",   "keepdims",
                                                 "to",     "pads"};
  return names;
}

int ParamBucket(const graph::ParamValue& value) {
  return static_cast<int>(Fnv1a(graph::ParamToString(value)) % kParamBuckets);
}

int KindSlot(OpKind kind) { return static_cast<int>(kind); }

int ParamSlot(const std::string& name, int bucket) {
  const auto& names = FeatureParamNames();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorKind::kInvalidParam, "no feature slot for " + name);
  return static_cast<int>(graph::UserOpKinds().size()) +
         static_cast<int>(it - names.begin()) * kParamBuckets + bucket;
}

int RankSlot(int input) {
  return static_cast<int>(graph::UserOpKinds().size()) +
         static_cast<int>(FeatureParamNames().size()) * kParamBuckets + input;
}

int DTypeSlot(int input) { return RankSlot(kInputSlots) + input; }

int FeatureSize() { return DTypeSlot(kInputSlots); }

FeatureVec FeatureVector(const OperatorInstanceRecord& r) {
  FeatureVec v(FeatureSize(), 0);
  v[KindSlot(r.kind)] = 1;
  for (const auto& [name, value] : r.params) v[ParamSlot(name, ParamBucket(value))] = 1;
  for (int k = 0; k < kInputSlots && k < static_cast<int>(r.inputs.size()); ++k) {
    v[RankSlot(k)] = r.inputs[k].type.rank() + 1;
    v[DTypeSlot(k)] = static_cast<int>(r.inputs[k].type.dtype) + 1;
  }
  return v;
}

FeatureVec ClusterSignature(const OperatorInstanceRecord& r) {
  FeatureVec full = FeatureVector(r);
  FeatureVec sig(full.begin(), full.begin() + RankSlot(0));
  std::vector<int> ranks;
  for (const auto& in : r.inputs) ranks.push_back(in.type.rank() + 1);
  std::sort(ranks.begin(), ranks.end());
  ranks.resize(kInputSlots, 0);
  sig.insert(sig.end(), ranks.begin(), ranks.end());
  return sig;
}

double HammingDistance(const FeatureVec& a, const FeatureVec& b) {
  if (a.size() != b.size() || a.empty()) return 1.0;
  int diff = 0;
  for (size_t i = 0; i < a.size(); ++i) diff += a[i] != b[i];
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

std::vector<Cluster> ClusterInstances(const std::vector<OperatorInstanceRecord>& records,
                                      double threshold) {
  std::vector<Cluster> exact;
  std::map<FeatureVec, size_t> by_sig;
  for (size_t i = 0; i < records.size(); ++i) {
    FeatureVec sig = ClusterSignature(records[i]);
    auto [it, inserted] = by_sig.emplace(sig, exact.size());
    if (inserted) exact.push_back({std::move(sig), {}});
    exact[it->second].members.push_back(static_cast<int>(i));
  }
  if (threshold <= 0.0) return exact;

  std::vector<size_t> parent(exact.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<size_t(size_t)> find = [&](size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (size_t a = 0; a < exact.size(); ++a)
    for (size_t b = a + 1; b < exact.size(); ++b)
      if (HammingDistance(exact[a].signature, exact[b].signature) <= threshold) {
        const size_t ra = find(a), rb = find(b);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
  std::vector<Cluster> merged;
  std::map<size_t, size_t> slot;
  for (size_t c = 0; c < exact.size(); ++c) {
    const size_t root = find(c);
    auto [it, inserted] = slot.emplace(root, merged.size());
    if (inserted) merged.push_back({exact[root].signature, {}});
    auto& m = merged[it->second].members;
    m.insert(m.end(), exact[c].members.begin(), exact[c].members.end());
  }
  for (auto& c : merged) std::sort(c.members.begin(), c.members.end());
  return merged;
}

std::optional<Order> ParseOrder(const std::string& name) {
  if (name == "diversity") return Order::kDiversity;
  if (name == "random") return Order::kRandom;
  if (name == "fifo") return Order::kFifo;
  return std::nullopt;
}

std::vector<int> Prioritize(const std::vector<Cluster>& clusters, uint64_t seed) {
  std::vector<std::vector<int>> queues;
  for (const auto& c : clusters) queues.push_back(c.members);
  std::vector<size_t> order(clusters.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return queues[a].size() > queues[b].size();
  });
  std::mt19937_64 rng(seed);
  for (size_t c : order) std::shuffle(queues[c].begin(), queues[c].end(), rng);

  std::vector<int> out;
  for (size_t round = 0;; ++round) {
    bool any = false;
    for (size_t c : order) {
      if (round < queues[c].size()) {
        out.push_back(queues[c][round]);
        any = true;
      }
    }
    if (!any) break;
  }
  return out;
}

std::vector<int> OrderRecords(const std::vector<OperatorInstanceRecord>& records, Order order,
                              uint64_t seed) {
  std::vector<int> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  switch (order) {
    case Order::kDiversity: return Prioritize(ClusterInstances(records), seed);
    case Order::kRandom: {
      std::mt19937_64 rng(seed);
      std::shuffle(idx.begin(), idx.end(), rng);
      return idx;
    }
    case Order::kFifo: return idx;
  }
  return idx;
}

std::vector<int> SignatureCoverage(const std::vector<Cluster>& clusters,
                                   const std::vector<int>& order) {
  std::map<int, size_t> cluster_of;
  for (size_t c = 0; c < clusters.size(); ++c)
    for (int m : clusters[c].members) cluster_of[m] = c;
  std::set<size_t> seen;
  std::vector<int> coverage;
  for (int r : order) {
    seen.insert(cluster_of.at(r));
    coverage.push_back(static_cast<int>(seen.size()));
  }
  return coverage;
}

}  // namespace stagefuzz::migrate

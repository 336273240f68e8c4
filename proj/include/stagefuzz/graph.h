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

// High-level computational graph IR: operator vocabulary, shape inference,
// validation and the reference interpreter.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "stagefuzz/tensor.h"

namespace stagefuzz::graph {

enum class OpKind {
  kInput,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kRelu,
  kSigmoid,
  kMatMul,
  kConv2D,
  kReshape,
  kTranspose,
  kConcat,
  kReduceSum,
  kCast,
  kPad,
  // Produced by FuseElementwise; never appears in frontend models.
  kFusedGroup,
};

// The 17 user-facing kinds (everything except kFusedGroup).
const std::vector<OpKind>& UserOpKinds();

std::string_view OpKindName(OpKind kind);
std::optional<OpKind> ParseOpKind(std::string_view name);

bool IsElementwise(OpKind kind);  // Add..Sigmoid
bool IsBinaryElementwise(OpKind kind);

using ParamValue = std::variant<int64_t, std::vector<int64_t>, std::string>;
using Params = std::map<std::string, ParamValue>;

enum class ParamDomain { kInt, kIntList, kString };

struct ParamSpec {
  std::string name;
  ParamDomain domain;
  bool required;
};

struct OpSchema {
  OpKind kind;
  int min_arity;
  int max_arity;
  std::vector<ParamSpec> params;
};

const OpSchema& Schema(OpKind kind);

// Checks names and value domains only. Throws Error(kInvalidParam).
void CheckParamSchema(OpKind kind, const Params& params);

std::string ParamToString(const ParamValue& value);

// One step of a fused elementwise region. Args >= 0 index the group's
// external inputs; arg -(k+1) refers to the result of step k.
struct FusedOp {
  OpKind kind;
  std::vector<int> args;

  friend bool operator==(const FusedOp&, const FusedOp&) = default;
};

std::string EncodeFusedBody(const std::vector<FusedOp>& body);
std::vector<FusedOp> DecodeFusedBody(std::string_view text);

using NodeId = int64_t;

struct Node {
  NodeId id = 0;
  OpKind kind = OpKind::kInput;
  Params params;
  std::vector<NodeId> inputs;
  TensorType out_type;
  // Constant payload, row-major.
  std::vector<double> payload;
  // FusedGroup body.
  std::vector<FusedOp> fused;

  friend bool operator==(const Node&, const Node&) = default;
};

struct Graph {
  std::string name = "g";
  std::map<NodeId, Node> nodes;
  std::vector<NodeId> outputs;

  NodeId NextId() const { return nodes.empty() ? 0 : nodes.rbegin()->first + 1; }
  const Node& at(NodeId id) const;

  friend bool operator==(const Graph&, const Graph&) = default;
};

// Shape/type rule. Throws Error(kShapeMismatch) or Error(kInvalidParam).
TensorType InferShape(OpKind kind, const Params& params,
                      const std::vector<TensorType>& input_types);
// Overload that also understands FusedGroup bodies.
TensorType InferNodeType(const Node& node,
                         const std::vector<TensorType>& input_types);

std::optional<Shape> BroadcastShapes(const Shape& a, const Shape& b);

// Helpers for building graphs in code.
class GraphBuilder {
 public:
  explicit GraphBuilder(std::string name = "g") { graph_.name = std::move(name); }

  NodeId Input(const std::string& name, TensorType type);
  NodeId Constant(TensorType type, std::vector<double> data);
  // Infers the output type; throws on shape errors.
  NodeId Op(OpKind kind, std::vector<NodeId> inputs, Params params = {});
  void Output(NodeId id) { graph_.outputs.push_back(id); }
  Graph Build() const { return graph_; }
  Graph& graph() { return graph_; }

 private:
  Graph graph_;
};

enum class ViolationKind {
  kCycleDetected,
  kDanglingInput,
  kDanglingOutput,
  kNoOutputs,
  kNoSource,
  kArityMismatch,
  kParamInvalid,
  kShapeMismatch,
  kTypeMismatch,
  kPayloadMismatch,
  kIdMismatch,
};

std::string_view ViolationKindName(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  NodeId node = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  bool Has(ViolationKind kind) const;
  std::string ToString() const;
};

ValidationReport ValidateGraph(const Graph& g);

// Node ids in dependency order; nullopt when the graph has a cycle or a
// dangling reference.
std::optional<std::vector<NodeId>> TopologicalOrder(const Graph& g);
// Node ids reachable (backwards) from the outputs.
std::vector<NodeId> LiveNodes(const Graph& g);
// Consumer count per node, counting each consumer node once; graph outputs
// count as consumers.
std::map<NodeId, int> ConsumerCounts(const Graph& g);

struct EvalOptions {
  bool saturate_i8 = false;
};

using Bindings = std::map<std::string, TensorValue>;

// Evaluates one node on concrete inputs.
TensorValue EvaluateNode(const Node& node, const std::vector<TensorValue>& inputs,
                         const EvalOptions& options = {});

// Reference interpreter. Only nodes live from the outputs are evaluated.
// Throws Error(kMissingInput) for unbound inputs and Error(kNumericDomain)
// for integer division by zero.
std::vector<TensorValue> InterpretGraph(const Graph& g, const Bindings& inputs,
                                        const EvalOptions& options = {});

// Random bindings for every Input node, derived from `seed` and node ids.
Bindings RandomBindings(const Graph& g, uint64_t seed);

// Canonical text form. Constants with more than 64 elements go to sidecar
// files when `sidecars` is non-null (key = relative path).
using Sidecars = std::map<std::string, std::string>;
std::string SerializeGraph(const Graph& g, Sidecars* sidecars = nullptr);

// Resolves `data=@relpath` references.
using SidecarResolver = std::function<std::string(const std::string& relpath)>;
// Throws ParseError with line/column.
Graph ParseGraph(std::string_view text, const SidecarResolver& resolver = {});
Graph LoadGraphFile(const std::string& path);

}  // namespace stagefuzz::graph

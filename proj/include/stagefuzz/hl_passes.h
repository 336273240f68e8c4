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

// Hardware-independent graph passes. Every rewrite is reported as a
// RewriteTrace whose rule_id is the unit of rule coverage.

#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stagefuzz/bugs.h"
#include "stagefuzz/graph.h"

namespace stagefuzz::hl {

using graph::Graph;
using graph::NodeId;

enum class PassId {
  kConstFold,
  kFuseElementwise,
  kDeadNodeElim,
  kAlgebraicSimplify,
  kCSE,
  kLayoutTransform,
};

std::string_view PassName(PassId pass);
std::optional<PassId> ParsePassId(std::string_view name);

// Level-2 order.
const std::vector<PassId>& PipelineOrder();

// Every rule id a pass can emit, for coverage accounting.
const std::vector<std::string>& KnownRuleIds(PassId pass);

struct RewriteTrace {
  PassId pass;
  std::string rule_id;
  std::set<NodeId> matched_nodes;   // ids in the pass input
  std::set<NodeId> produced_nodes;  // ids in the pass output
  bool fired = true;
};

struct PassResult {
  Graph graph;
  std::vector<RewriteTrace> traces;
};

// Runs one pass. Any failure inside the pass, including producing an
// invalid graph, surfaces as Error(kPassInternal).
PassResult RunPass(PassId pass, const Graph& g, const BugSet& bugs = {});

struct PipelineStep {
  PassId pass;
  int iteration;
  Graph after;
  std::vector<RewriteTrace> traces;
};

struct PipelineResult {
  Graph graph;
  std::vector<RewriteTrace> traces;
  int iterations = 0;
  bool fixpoint_reached = true;
  // Populated only when requested; one entry per pass application.
  std::vector<PipelineStep> steps;
};

inline constexpr int kFixpointCap = 10;

// level 0: identity; 1: ConstFold, DeadNodeElim; 2: all passes in
// PipelineOrder() iterated until nothing fires (at most kFixpointCap rounds).
PipelineResult RunPipeline(int level, const Graph& g, const BugSet& bugs = {},
                           bool record_steps = false);

}  // namespace stagefuzz::hl

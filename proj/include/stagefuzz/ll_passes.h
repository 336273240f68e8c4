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

// Hardware-oriented loop transformations. Legality failures never corrupt
// the program: the transformation is skipped or the annotation demoted, and
// the decision is recorded as a trace.

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stagefuzz/bugs.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::ll {

using loop::LoopProgram;
using loop::StmtPath;

enum class LLPassId {
  kUnrollExpand,
  kTileLoops,
  kVectorizeLegalize,
  kReorderLoops,
  kIntrinsicMap,
  kMemLatencyHide,
};

std::string_view LLPassName(LLPassId pass);
std::optional<LLPassId> ParseLLPassId(std::string_view name);
const std::vector<LLPassId>& LLPipelineOrder();
const std::vector<std::string>& KnownLLRuleIds(LLPassId pass);

inline constexpr int kTileSize = 8;
inline constexpr int64_t kTileMinTrip = 16;

struct LLTrace {
  LLPassId pass;
  std::string rule_id;
  StmtPath loop_path;  // in the pass input
  bool fired = true;
};

struct LLPassResult {
  LoopProgram program;
  std::vector<LLTrace> traces;
};

// Errors inside a pass surface as Error(kPassInternal).
LLPassResult RunLLPass(LLPassId pass, const LoopProgram& p, const BugSet& bugs = {});

struct LLPipelineStep {
  LLPassId pass;
  LoopProgram after;
  std::vector<LLTrace> traces;
};

struct LLPipelineResult {
  LoopProgram program;
  std::vector<LLTrace> traces;
  std::vector<LLPipelineStep> steps;  // when requested
};

// level 0: identity; level 2: LLPipelineOrder(), one sweep.
LLPipelineResult RunLLPipeline(int level, const LoopProgram& p, const BugSet& bugs = {},
                               bool record_steps = false);

// Dependence test used by VectorizeLegalize and the mutation guards: true
// when iterations of `loop` may touch the same element of a buffer that the
// body writes (conservative).
bool HasLoopCarriedDependence(const loop::Stmt& loop);

// Tolerance the oracle uses for a program.
Tolerance ToleranceFor(const LoopProgram& p);

}  // namespace stagefuzz::ll

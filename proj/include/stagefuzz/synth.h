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

// Optimization-aware graph synthesis. Patterns are mined from traced pass
// tests and spliced into seed graphs; frontier slots are resolved against
// the host graph.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stagefuzz/graph.h"
#include "stagefuzz/hl_passes.h"

namespace stagefuzz::synth {

using graph::Graph;
using graph::NodeId;
using hl::PassId;

// A pattern body is a graph whose first nodes (ids 0..k-1) are the frontier
// slots, Inputs named "slot<k>". Outputs are the pattern sinks; patterns
// mined from DeadNodeElim have none, since their trigger is being dead.
struct Pattern {
  PassId pass = PassId::kConstFold;
  std::string rule_id;
  Graph body;
  std::vector<TensorType> frontier;
  std::string source;  // pass-test file name, annotation only

  bool dead() const { return pass == PassId::kDeadNodeElim; }
  // "pattern <Pass> <rule>\n" + graph text + "end\n"; excludes `source`.
  std::string Canonical() const;
  uint64_t Hash() const;
};

// Node-local rules keep matched nodes plus immediate producers; region
// rules keep the matched nodes. Edges from outside become slots, one per
// distinct producer. Throws Error(kDegeneratePattern) when nothing but
// sources remains.
Pattern DerivePattern(const Graph& g, const hl::RewriteTrace& trace);

// The pattern with its slots as fresh Inputs, plus an anchor output for
// dead patterns: the graph the fidelity check runs the source pass on.
Graph WrapPattern(const Pattern& p);
bool CheckFidelity(const Pattern& p);

struct PassTest {
  std::string file;
  PassId pass = PassId::kConstFold;
  std::string rule_id;
  Graph graph;
};

// Header "#expect-pass: <Pass> <rule>" or "#expect-pass: <Pass>" followed by
// "#expect-rule: <rule>". Throws Error(kTestLoadError).
PassTest LoadPassTest(const std::string& path);

struct CaptureReport {
  std::vector<Pattern> patterns;  // deduplicated, in discovery order
  int tests_run = 0;
  std::vector<std::string> stale_tests;   // expected rule did not fire
  std::vector<std::string> load_errors;   // "file: message"
  int degenerate = 0;
  int infidel = 0;     // derived but failed the fidelity check
  int duplicates = 0;  // derived but already present
};

// Runs every *.graph file of `dir` (sorted) through the level-2 pipeline
// with tracing and derives patterns from every fired trace.
CaptureReport CapturePatterns(const std::string& dir);

// Pattern library text: "# source: <file>" then the canonical text, per
// pattern.
std::string SerializeLibrary(const std::vector<Pattern>& patterns);
std::vector<Pattern> ParseLibrary(const std::string& text);
std::vector<Pattern> LoadLibrary(const std::string& path);

// --- synthesis -------------------------------------------------------------

enum class SpliceMode { kFeedIntoPattern, kPatternFeedsConsumer };

struct SynthesisPoint {
  NodeId anchor = -1;
  SpliceMode mode = SpliceMode::kFeedIntoPattern;
};

enum class FixStrategy { kReuse, kAdapter, kFreshInput, kFreshConstant };

struct FixReport {
  std::vector<FixStrategy> strategies;  // one per resolved slot
};

// Resolves each slot (an Input placeholder in `g`) against the nodes of `g`
// outside `exclude` and not downstream of any slot: exact type reuse, then a single Cast or Reshape
// adapter, then a fresh Input "syn<k>" or Constant (coin flip).
Graph FixDangling(Graph g, const std::vector<NodeId>& slots, std::mt19937_64& rng,
                  const std::set<NodeId>& exclude = {}, FixReport* report = nullptr);

struct SynthesisResult {
  Graph graph;
  SynthesisPoint point;
  FixReport fixes;
  std::set<NodeId> pattern_nodes;  // ids in `graph`
  int attempts = 0;
};

inline constexpr int kSynthesisAttempts = 16;

// Throws Error(kSynthesisFailed) after kSynthesisAttempts illegal splices,
// or at once when the seed has no numeric node to splice against.
SynthesisResult Synthesize(const Pattern& pattern, const Graph& seed,
                           std::mt19937_64& rng);

// Seed graphs: the random generator without planted rewrite triggers.
Graph SeedGraph(uint64_t seed);

// Deterministic test stream: test i is a pure function of (seed, i), so
// workers can draw indices in any order. With patterns, each test splices
// a random pattern into a random seed graph, which is sometimes an earlier
// test of the stream (recycling). Without patterns, test i is a seed graph.
class SynthesisStream {
 public:
  SynthesisStream(std::vector<Pattern> patterns, uint64_t seed, bool use_patterns = true);

  struct Test {
    Graph graph;
    std::string lineage;  // "seed:<n>", "pattern:<hash>@<lineage>"
  };
  Test Get(int64_t index);

  const std::vector<Pattern>& patterns() const { return patterns_; }

 private:
  Test Build(int64_t index);

  std::vector<Pattern> patterns_;
  uint64_t seed_;
  bool use_patterns_;
  std::mutex mu_;
  std::map<int64_t, Test> cache_;
};

}  // namespace stagefuzz::synth

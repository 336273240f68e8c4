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

// Verdict oracles, failure signatures and the campaign driver that feeds
// the three generators through them.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "stagefuzz/bugs.h"
#include "stagefuzz/graph.h"
#include "stagefuzz/loop_ir.h"
#include "stagefuzz/migrate.h"

namespace stagefuzz::oracle {

enum class VerdictTag { kPass, kCrash, kMismatch, kInvalidRejection, kMissedRejection };
std::string_view VerdictName(VerdictTag tag);
std::optional<VerdictTag> ParseVerdict(std::string_view name);

// "loader", "hlopt", "llopt".
std::string_view StageKey(Stage stage);
std::optional<Stage> ParseStageKey(std::string_view name);

using Payload = std::variant<graph::Graph, loop::LoopProgram, migrate::OperatorInstanceRecord>;

struct TestCase {
  int64_t id = 0;
  Stage stage = Stage::kHighLevel;
  Payload payload;
  uint64_t data_seed = 0;  // input data; records carry their own
  std::string lineage;
};

struct Verdict {
  VerdictTag tag = VerdictTag::kPass;
  std::string message;
  // Pass (or, for the loader, operator kind) where the failure first shows.
  std::string context;
  std::string last_rule;  // last rule fired up to and including `context`
  int output = -1;        // divergent output
  Divergence divergence;
  // Every rule id fired by the optimizing run; coverage input.
  std::set<std::string> fired;
  // Reference execution undefined (integer division by zero); counted as Pass.
  bool skipped = false;
};

// Loader: reference wrap vs the frontend graph lowered and run at level 0;
// negative records must be rejected. hlopt: graph level 0 vs level 2.
// llopt: serial unoptimized program vs level 2 in target execution.
// Never throws for well-formed test cases.
Verdict DiffTest(const TestCase& tc, const BugSet& bugs = {});

// "stage|context|verdict|message", digits stripped from the message.
std::string NormalizeMessage(const std::string& message);
std::string DedupKey(const Verdict& v, Stage stage);

// --- test files ------------------------------------------------------------

// Payload text preceded by "# key: value" header lines. Extensions: .graph
// (hlopt), .lir (llopt), .rec (loader, one JSON record).
struct TestFile {
  TestCase test;
  std::map<std::string, std::string> header;
};

std::string PayloadExtension(Stage stage);
std::string SerializePayload(const Payload& payload);
std::string WriteTestFile(const TestCase& tc, const std::map<std::string, std::string>& header);
// Throws Error(kTestLoadError).
TestFile ReadTestFile(const std::string& path);

struct RegressionCase {
  BugId bug;
  std::string file;
  TestCase test;
};

// Every file of `dir` whose header names a seeded bug ("# bug: L1").
std::vector<RegressionCase> LoadRegressions(const std::string& dir);

struct RegressionResult {
  RegressionCase test;
  Verdict off;  // bug disabled
  Verdict on;   // only this bug enabled
  bool flips() const { return off.tag == VerdictTag::kPass && on.tag != VerdictTag::kPass; }
};
std::vector<RegressionResult> RunRegressions(const std::string& dir);

// --- campaigns -------------------------------------------------------------

struct CampaignConfig {
  std::string stage = "all";  // loader | hlopt | llopt | all
  int64_t budget = 300;
  uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir;  // empty: no files written
  BugSet bugs;
  migrate::Order order = migrate::Order::kDiversity;
  bool guided = true;    // patterns for hlopt, mutation rules for llopt
  std::string provider;  // command or http URL, llopt seeds and rules
  std::string data_dir;  // defaults to the bundled data directory
  std::string corpus;    // loader records; defaults to <data_dir>/corpus/operators.jsonl
};

struct FailureRecord {
  std::string signature;
  Stage stage = Stage::kHighLevel;
  std::string context;
  VerdictTag tag = VerdictTag::kCrash;
  std::string message;  // from the first hit
  int64_t first_hit = 0;
  int64_t count = 0;
  std::vector<std::string> bugs;  // enabled bugs that alone reproduce the first hit
  std::string artifact;           // reproduction path relative to out_dir
};

struct CampaignReport {
  CampaignConfig config;
  int64_t tests_run = 0;
  std::map<VerdictTag, int64_t> verdicts;
  std::map<Stage, std::map<VerdictTag, int64_t>> per_stage;
  int64_t skipped = 0;
  std::set<std::string> hl_rules;
  std::set<std::string> ll_rules;
  std::vector<FailureRecord> failures;  // by first hit
  std::vector<std::string> incidents;   // provider and documentation problems
  double wall_seconds = 0;
  std::string hash;

  int64_t NonPass() const;
  // Full report; `hash` covers every field except wall time, jobs and the
  // output directory.
  std::string ToJson() const;
};

// Test i of a campaign. With stage "all", stages interleave loader, hlopt,
// llopt by index.
class TestSource {
 public:
  explicit TestSource(const CampaignConfig& config);
  ~TestSource();
  TestCase Get(int64_t index);
  const std::vector<std::string>& incidents() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Throws Error(kConfigError) for bad settings or missing bundled data.
CampaignReport RunCampaign(const CampaignConfig& config);

// Default bundled data directory (compile-time).
std::string DefaultDataDir();

}  // namespace stagefuzz::oracle

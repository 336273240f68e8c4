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

#include "stagefuzz/oracle.h"

#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stagefuzz/error.h"

namespace stagefuzz::oracle {
namespace {

namespace fs = std::filesystem;
using graph::GraphBuilder;
using graph::OpKind;

const std::string kData = STAGEFUZZ_DATA_DIR;
const std::string kRegressions = kData + "/regressions";
const std::string kFixtures = std::string(STAGEFUZZ_TEST_DIR) + "/fixtures";

TensorType F32(Shape s) { return {DType::kF32, std::move(s)}; }

template <typename F>
ErrorKind KindOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kPassInternal;
}

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stagefuzz_oracle_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

TestCase Hl(graph::Graph g, uint64_t data_seed = 1) {
  TestCase tc;
  tc.stage = Stage::kHighLevel;
  tc.payload = std::move(g);
  tc.data_seed = data_seed;
  return tc;
}

TestCase Ll(const std::string& text, uint64_t data_seed = 1) {
  TestCase tc;
  tc.stage = Stage::kLowLevel;
  tc.payload = loop::ParseLoop(text);
  tc.data_seed = data_seed;
  return tc;
}

TestCase Loader(const std::string& json) {
  TestCase tc;
  tc.stage = Stage::kLoader;
  tc.payload = migrate::ParseRecord(json);
  return tc;
}

Stage BugStage(BugId id) { return SeededBugCatalog()[static_cast<size_t>(id)].stage; }

TestCase FromFile(const std::string& path) { return ReadTestFile(path).test; }

CampaignConfig Small(const std::string& stage, int64_t budget) {
  CampaignConfig c;
  c.stage = stage;
  c.budget = budget;
  c.seed = 7;
  return c;
}

// ----------------------------------------------------------------- verdicts

TEST(Verdict, NamesRoundTrip) {
  for (VerdictTag t : {VerdictTag::kPass, VerdictTag::kCrash, VerdictTag::kMismatch,
                       VerdictTag::kInvalidRejection, VerdictTag::kMissedRejection})
    EXPECT_EQ(ParseVerdict(VerdictName(t)), t);
  EXPECT_FALSE(ParseVerdict("Timeout"));
  for (Stage s : {Stage::kLoader, Stage::kHighLevel, Stage::kLowLevel})
    EXPECT_EQ(ParseStageKey(StageKey(s)), s);
  EXPECT_FALSE(ParseStageKey("backend"));
}

TEST(Verdict, ValidAddGraphPasses) {
  GraphBuilder b;
  b.Output(b.Op(OpKind::kAdd, {b.Input("x", F32({4})), b.Input("y", F32({4}))}));
  const Verdict v = DiffTest(Hl(b.Build()));
  EXPECT_EQ(v.tag, VerdictTag::kPass);
  EXPECT_FALSE(v.skipped);
  EXPECT_TRUE(v.message.empty());
}

TEST(Verdict, SaturatingFoldIsMismatchWithDivergentIndex) {
  const TestCase tc = FromFile(kRegressions + "/h1_i8_fold_wraps.graph");
  const Verdict v = DiffTest(tc, BugSet().With(BugId::kH1));
  ASSERT_EQ(v.tag, VerdictTag::kMismatch);
  EXPECT_EQ(v.context, "ConstFold");
  EXPECT_EQ(v.output, 0);
  // In I8, 100 + 100 wraps to -56 and -100 + -100 wraps to 56; saturation
  // gives 127 and -128. Both cells differ, by 183 and 184.
  EXPECT_EQ(v.divergence.first_index, 0);
  EXPECT_EQ(v.divergence.max_abs, 184);
  EXPECT_NE(v.message.find("first index 0"), std::string::npos);
  EXPECT_FALSE(v.last_rule.empty());
}

TEST(Verdict, AcceptedNegativeRecordIsMissedRejection) {
  const TestCase tc = FromFile(kRegressions + "/l4_transpose_duplicate_perm.rec");
  EXPECT_EQ(DiffTest(tc).tag, VerdictTag::kPass);
  const Verdict v = DiffTest(tc, BugSet().With(BugId::kL4));
  EXPECT_EQ(v.tag, VerdictTag::kMissedRejection);
  EXPECT_EQ(v.context, "Transpose");
}

TEST(Verdict, RejectedValidRecordIsInvalidRejection) {
  // Axis -2 of a rank-2 input is axis 0; the off-by-one makes it -3.
  const TestCase tc = Loader(
      R"({"kind":"Concat","params":{"axis":-2},"inputs":[)"
      R"({"shape":[2,2],"dtype":"F32","src":{"random":1}},)"
      R"({"shape":[3,2],"dtype":"F32","src":{"random":2}}],"origin":"c"})");
  EXPECT_EQ(DiffTest(tc).tag, VerdictTag::kPass);
  const Verdict v = DiffTest(tc, BugSet().With(BugId::kL3));
  EXPECT_EQ(v.tag, VerdictTag::kInvalidRejection);
  EXPECT_EQ(v.context, "Concat");
}

TEST(Verdict, CrashCarriesPassContext) {
  const Verdict v =
      DiffTest(FromFile(kRegressions + "/b1_unroll_remainder.lir"), BugSet().With(BugId::kB1));
  EXPECT_EQ(v.tag, VerdictTag::kCrash);
  EXPECT_EQ(v.context, "UnrollExpand");
  EXPECT_EQ(v.message, "runtime:OutOfBounds");
  EXPECT_TRUE(v.fired.count(v.last_rule)) << v.last_rule;
}

TEST(Verdict, FmaToleranceAdmitsContractionButNotDistribution) {
  // a * b + c maps to an intrinsic legitimately; its rounding stays inside
  // the intrinsic tolerance.
  const std::string fma =
      "program f\ninput a: F32[8]\ninput b: F32[8]\ninput c: F32[8]\noutput out0: F32[8]\n"
      "body:\n  for i in 0 .. 8:\n"
      "    out0[i] = add.f32(mul.f32(load a[i], load b[i]), load c[i])\n";
  for (uint64_t seed = 0; seed < 20; ++seed)
    EXPECT_EQ(DiffTest(Ll(fma, seed)).tag, VerdictTag::kPass) << seed;
  const Verdict v =
      DiffTest(FromFile(kRegressions + "/b4_distributed_fma.lir"), BugSet().With(BugId::kB4));
  EXPECT_EQ(v.tag, VerdictTag::kMismatch);
  EXPECT_EQ(v.context, "IntrinsicMap");
  EXPECT_GT(v.divergence.max_rel, 1e-4);
}

TEST(Verdict, UndefinedReferenceIsSkipped) {
  GraphBuilder b;
  auto x = b.Input("x", {DType::kI32, {2}});
  b.Output(b.Op(OpKind::kDiv, {x, b.Constant({DType::kI32, {2}}, {0, 0})}));
  const Verdict v = DiffTest(Hl(b.Build()));
  EXPECT_EQ(v.tag, VerdictTag::kPass);
  EXPECT_TRUE(v.skipped);
}

TEST(Verdict, PayloadOfTheWrongStageIsAFrameworkCrash) {
  TestCase tc = FromFile(kRegressions + "/b2_tile_remainder.lir");
  tc.stage = Stage::kHighLevel;
  const Verdict v = DiffTest(tc);
  EXPECT_EQ(v.tag, VerdictTag::kCrash);
  EXPECT_EQ(v.context, "framework");
}

TEST(Verdict, NoBugsMeansNoFailuresOnBundledSeeds) {
  for (const auto& entry : fs::directory_iterator(kData + "/seeds")) {
    TestCase tc;
    tc.stage = Stage::kLowLevel;
    tc.payload = loop::LoadLoopFile(entry.path().string());
    for (uint64_t seed = 0; seed < 5; ++seed) {
      tc.data_seed = seed;
      EXPECT_EQ(DiffTest(tc).tag, VerdictTag::kPass) << entry.path();
    }
  }
}

// -------------------------------------------------------------------- dedup

TEST(Dedup, NumbersAreStripped) {
  EXPECT_EQ(NormalizeMessage("node 17 has 3 inputs"), "node has inputs");
  EXPECT_EQ(NormalizeMessage("max abs 1.5e-07, max rel inf"), "max abs , max rel");
  EXPECT_EQ(NormalizeMessage("shape  F32[2,3]  vs F32[4]"), "shape F[] vs F[]");
  EXPECT_EQ(NormalizeMessage("value -0.25 at [1][2]"), "value at [][]");
}

TEST(Dedup, DifferentNodeIdsShareASignature) {
  Verdict a, b;
  a.tag = b.tag = VerdictTag::kCrash;
  a.context = b.context = "CSE";
  a.message = "CSE: node 4 has no users";
  b.message = "CSE: node 19 has no users";
  EXPECT_EQ(DedupKey(a, Stage::kHighLevel), DedupKey(b, Stage::kHighLevel));
  EXPECT_EQ(DedupKey(a, Stage::kHighLevel), "hlopt|CSE|Crash|CSE: node has no users");
}

TEST(Dedup, CrashAndMismatchInOnePassDiffer) {
  Verdict a, b;
  a.context = b.context = "TileLoops";
  a.message = b.message = "output 0";
  a.tag = VerdictTag::kCrash;
  b.tag = VerdictTag::kMismatch;
  EXPECT_NE(DedupKey(a, Stage::kLowLevel), DedupKey(b, Stage::kLowLevel));
  b.tag = VerdictTag::kCrash;
  EXPECT_NE(DedupKey(a, Stage::kLowLevel), DedupKey(b, Stage::kHighLevel));
}

TEST(Dedup, FixturePairYieldsOneSignature) {
  std::set<std::string> keys;
  int files = 0;
  for (const auto& entry : fs::directory_iterator(kFixtures + "/dedup")) {
    const TestFile f = ReadTestFile(entry.path().string());
    const Verdict v = DiffTest(f.test, BugSet::Parse(f.header.at("bug")));
    EXPECT_NE(v.tag, VerdictTag::kPass) << entry.path();
    keys.insert(DedupKey(v, f.test.stage));
    ++files;
  }
  EXPECT_EQ(files, 2);
  EXPECT_EQ(keys.size(), 1u);
}

// --------------------------------------------------------------- test files

TEST(TestFiles, RoundTripEveryStage) {
  const auto dir = TempDir("roundtrip");
  for (const auto& entry : fs::directory_iterator(kRegressions)) {
    TestCase tc = FromFile(entry.path().string());
    tc.id = 41;
    tc.data_seed = 99;
    tc.lineage = "pattern:ab@seed:3";
    const fs::path out = dir / ("copy" + PayloadExtension(tc.stage));
    std::ofstream(out) << WriteTestFile(tc, {{"note", "x"}});
    const TestFile back = ReadTestFile(out.string());
    EXPECT_EQ(back.test.stage, tc.stage);
    EXPECT_EQ(back.test.id, 41);
    EXPECT_EQ(back.test.data_seed, 99u);
    EXPECT_EQ(back.test.lineage, tc.lineage);
    EXPECT_EQ(back.header.at("note"), "x");
    EXPECT_EQ(back.header.at("stage"), StageKey(tc.stage));
    EXPECT_EQ(SerializePayload(back.test.payload), SerializePayload(tc.payload));
  }
}

TEST(TestFiles, BadFilesAreTestLoadErrors) {
  const auto dir = TempDir("bad");
  std::ofstream(dir / "x.graph") << "graph g\nnode 0 Frobnicate\n";
  std::ofstream(dir / "x.txt") << "hello\n";
  std::ofstream(dir / "y.lir") << "# data-seed: many\nprogram p\n";
  EXPECT_EQ(KindOf([&] { ReadTestFile((dir / "x.graph").string()); }), ErrorKind::kTestLoadError);
  EXPECT_EQ(KindOf([&] { ReadTestFile((dir / "x.txt").string()); }), ErrorKind::kTestLoadError);
  EXPECT_EQ(KindOf([&] { ReadTestFile((dir / "y.lir").string()); }), ErrorKind::kTestLoadError);
  EXPECT_EQ(KindOf([&] { ReadTestFile((dir / "missing.rec").string()); }),
            ErrorKind::kTestLoadError);
}

// -------------------------------------------------------------- regressions

TEST(Regressions, EverySeededBugHasOneFlippingTest) {
  const auto results = RunRegressions(kRegressions);
  std::set<BugId> covered;
  for (const auto& r : results) {
    EXPECT_TRUE(covered.insert(r.test.bug).second) << r.test.file;
    EXPECT_EQ(r.off.tag, VerdictTag::kPass) << r.test.file << ": " << r.off.message;
    EXPECT_NE(r.on.tag, VerdictTag::kPass) << r.test.file;
    EXPECT_TRUE(r.flips()) << r.test.file;
    EXPECT_EQ(r.test.test.stage, BugStage(r.test.bug)) << r.test.file;
  }
  EXPECT_EQ(covered.size(), SeededBugCatalog().size());
}

TEST(Regressions, VerdictsAreDeterministic) {
  const auto a = RunRegressions(kRegressions);
  const auto b = RunRegressions(kRegressions);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i)
    EXPECT_EQ(DedupKey(a[i].on, a[i].test.test.stage), DedupKey(b[i].on, b[i].test.test.stage));
}

TEST(Regressions, OtherBugsLeaveEachTestAlone) {
  // A test is specific to its bug: every other seeded bug of the same
  // stage, enabled alone, still passes.
  for (const auto& c : LoadRegressions(kRegressions)) {
    for (const auto& info : SeededBugCatalog()) {
      if (info.id == c.bug || info.stage != BugStage(c.bug)) continue;
      EXPECT_EQ(DiffTest(c.test, BugSet().With(info.id)).tag, VerdictTag::kPass)
          << c.file << " with " << info.name;
    }
  }
}

// ---------------------------------------------------------------- campaigns

TEST(Campaign, StagesInterleaveByIndex) {
  TestSource source(Small("all", 0));
  const Stage order[] = {Stage::kLoader, Stage::kHighLevel, Stage::kLowLevel};
  for (int64_t i = 0; i < 12; ++i) {
    const TestCase tc = source.Get(i);
    EXPECT_EQ(tc.id, i);
    EXPECT_EQ(tc.stage, order[i % 3]);
    EXPECT_FALSE(tc.lineage.empty());
  }
  EXPECT_EQ(SerializePayload(source.Get(5).payload), SerializePayload(source.Get(5).payload));
}

TEST(Campaign, NoBugsNoFailures) {
  const CampaignReport r = RunCampaign(Small("all", 900));
  EXPECT_EQ(r.tests_run, 900);
  EXPECT_EQ(r.NonPass(), 0);
  EXPECT_TRUE(r.failures.empty());
  for (Stage s : {Stage::kLoader, Stage::kHighLevel, Stage::kLowLevel})
    EXPECT_EQ(r.per_stage.at(s).at(VerdictTag::kPass), 300);
  EXPECT_FALSE(r.hl_rules.empty());
  EXPECT_FALSE(r.ll_rules.empty());
  EXPECT_TRUE(r.incidents.empty());
}

TEST(Campaign, SingleStageRunsOnlyThatStage) {
  const CampaignReport r = RunCampaign(Small("llopt", 60));
  EXPECT_EQ(r.per_stage.size(), 1u);
  EXPECT_EQ(r.per_stage.begin()->first, Stage::kLowLevel);
  EXPECT_TRUE(r.hl_rules.empty());
  EXPECT_FALSE(r.ll_rules.empty());
}

TEST(Campaign, HashIsDeterministicAndJobIndependent) {
  CampaignConfig c = Small("all", 300);
  c.bugs = BugSet::Parse("all");
  const CampaignReport a = RunCampaign(c);
  const CampaignReport b = RunCampaign(c);
  c.jobs = 4;
  const CampaignReport d = RunCampaign(c);
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_EQ(a.hash, d.hash);
  EXPECT_GT(a.NonPass(), 0);
  c.jobs = 1;
  c.seed = 8;
  EXPECT_NE(RunCampaign(c).hash, a.hash);
}

TEST(Campaign, BudgetZeroIsEmpty) {
  const CampaignReport r = RunCampaign(Small("all", 0));
  EXPECT_EQ(r.tests_run, 0);
  EXPECT_EQ(r.NonPass(), 0);
  EXPECT_TRUE(r.failures.empty());
  EXPECT_TRUE(r.hl_rules.empty());
  EXPECT_TRUE(r.ll_rules.empty());
  EXPECT_EQ(r.hash.size(), 16u);
}

TEST(Campaign, BadSettingsAreConfigErrors) {
  CampaignConfig c = Small("backend", 10);
  EXPECT_EQ(KindOf([&] { RunCampaign(c); }), ErrorKind::kConfigError);
  c = Small("all", -1);
  EXPECT_EQ(KindOf([&] { RunCampaign(c); }), ErrorKind::kConfigError);
  c = Small("all", 10);
  c.jobs = 0;
  EXPECT_EQ(KindOf([&] { RunCampaign(c); }), ErrorKind::kConfigError);
  c = Small("loader", 10);
  c.data_dir = TempDir("empty").string();
  EXPECT_EQ(KindOf([&] { RunCampaign(c); }), ErrorKind::kConfigError);
}

TEST(Campaign, FailuresAreDeduplicatedAndAttributed) {
  CampaignConfig c = Small("all", 600);
  c.bugs = BugSet::Parse("all");
  const CampaignReport r = RunCampaign(c);
  std::set<std::string> signatures;
  int64_t counted = 0;
  for (const auto& f : r.failures) {
    EXPECT_TRUE(signatures.insert(f.signature).second);
    EXPECT_EQ(f.signature.rfind(std::string(StageKey(f.stage)) + "|", 0), 0u);
    EXPECT_GE(f.count, 1);
    EXPECT_FALSE(f.bugs.empty()) << f.signature;
    for (const auto& b : f.bugs) EXPECT_EQ(BugStage(BugSet::Parse(b).Enabled().at(0)), f.stage);
    counted += f.count;
  }
  EXPECT_EQ(counted, r.NonPass());
  for (size_t i = 1; i < r.failures.size(); ++i)
    EXPECT_LT(r.failures[i - 1].first_hit, r.failures[i].first_hit);
}

TEST(Campaign, ArtifactsReproduceTheirVerdicts) {
  const auto dir = TempDir("artifacts");
  CampaignConfig c = Small("all", 300);
  c.bugs = BugSet::Parse("all");
  c.out_dir = dir.string();
  const CampaignReport r = RunCampaign(c);
  ASSERT_FALSE(r.failures.empty());
  for (const auto& f : r.failures) {
    const TestFile file = ReadTestFile((dir / f.artifact).string());
    EXPECT_EQ(file.test.id, f.first_hit);
    EXPECT_EQ(file.header.at("signature"), f.signature);
    const Verdict v = DiffTest(file.test, BugSet::Parse(file.header.at("bugs")));
    EXPECT_EQ(v.tag, f.tag) << f.artifact;
    EXPECT_EQ(DedupKey(v, file.test.stage), f.signature) << f.artifact;
  }

  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["hash"], r.hash);
  EXPECT_EQ(j["tests_run"], 300);
  EXPECT_EQ(j["failures"].size(), r.failures.size());
  EXPECT_EQ(j["config"]["jobs"], 1);
  EXPECT_TRUE(j.contains("wall_time_s"));
  int64_t sum = 0;
  for (const auto& [name, n] : j["verdicts"].items()) sum += n.get<int64_t>();
  EXPECT_EQ(sum, 300);
}

}  // namespace
}  // namespace stagefuzz::oracle

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

#include "stagefuzz/ll_passes.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "stagefuzz/error.h"
#include "stagefuzz/graph_gen.h"

namespace stagefuzz::ll {
namespace {

using loop::AnnKind;
using loop::Annotation;
using loop::Affine;
using loop::LoopBindings;
using loop::Stmt;
using loop::StmtKind;

std::string SeedDir() { return std::string(STAGEFUZZ_DATA_DIR) + "/seeds"; }

std::vector<std::string> SeedFiles() {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(SeedDir()))
    if (e.path().extension() == ".lir") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  return files;
}

LoopProgram Seed(const std::string& name) {
  return loop::LoadLoopFile(SeedDir() + "/" + name + ".lir");
}

std::vector<TensorValue> Execute(const LoopProgram& p, const LoopBindings& in,
                             bool lockstep = true) {
  loop::InterpOptions opts;
  opts.lockstep_vectorize = lockstep;
  return loop::OrderedOutputs(p, loop::InterpretLoop(p, in, opts));
}

// Reference run: annotations erased, serial execution.
std::vector<TensorValue> Reference(const LoopProgram& p, const LoopBindings& in) {
  return Execute(loop::StripAnnotations(p), in, false);
}

::testing::AssertionResult SameOutputs(const std::vector<TensorValue>& want,
                                       const std::vector<TensorValue>& got, Tolerance tol) {
  if (want.size() != got.size()) return ::testing::AssertionFailure() << "output count";
  for (size_t i = 0; i < want.size(); ++i) {
    const auto d = CompareTensors(want[i], got[i], tol);
    if (!d.equal)
      return ::testing::AssertionFailure()
             << "output " << i << " differs at " << d.first_index << " (abs " << d.max_abs
             << ")";
  }
  return ::testing::AssertionSuccess();
}

std::multiset<std::string> FiredRules(const std::vector<LLTrace>& traces) {
  std::multiset<std::string> r;
  for (const auto& t : traces)
    if (t.fired) r.insert(t.rule_id);
  return r;
}

bool AnyAnnotation(const Stmt& root, AnnKind kind) {
  bool found = false;
  loop::VisitStmts(root, [&](const Stmt& s, const loop::StmtPath&) {
    found |= s.kind == StmtKind::kFor && s.ann.kind == kind;
  });
  return found;
}

LoopProgram Parse(const std::string& body_and_header) {
  return loop::ParseLoop(body_and_header);
}

const char* kUnroll8 =
    "program u8\n"
    "input x: F32[8]\n"
    "input y: F32[8]\n"
    "output out0: F32[8]\n"
    "body:\n"
    "  for i in 0 .. 8 @unroll(4):\n"
    "    out0[i] = add.f32(load x[i], load y[i])\n";

TEST(Unroll, TripEightFactorFour) {
  const LoopProgram p = Parse(kUnroll8);
  const auto r = RunLLPass(LLPassId::kUnrollExpand, p);
  ASSERT_EQ(r.program.body.body.size(), 1u);
  const Stmt& main = r.program.body.body[0];
  EXPECT_EQ(main.ConstantTrip(), 2);
  EXPECT_EQ(main.ann.kind, AnnKind::kSerial);
  ASSERT_EQ(main.body.size(), 4u);
  for (int j = 0; j < 4; ++j)
    EXPECT_EQ(main.body[j].index, Affine::Var(main.var, 4) + j) << j;
  EXPECT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"unroll.expand"}));

  // Independent oracle: elementwise sum computed here.
  const auto in = loop::RandomLoopBindings(p, 3);
  const auto got = Execute(r.program, in);
  for (int i = 0; i < 8; ++i)
    EXPECT_EQ(got[0].data[i], static_cast<float>(in.at("x").data[i] + in.at("y").data[i]));
}

TEST(Unroll, TripTenEmitsRemainder) {
  const LoopProgram p = Seed("add_10");
  const auto r = RunLLPass(LLPassId::kUnrollExpand, p);
  ASSERT_EQ(r.program.body.body.size(), 2u);
  const Stmt& main = r.program.body.body[0];
  const Stmt& rest = r.program.body.body[1];
  EXPECT_EQ(main.ConstantTrip(), 2);
  EXPECT_EQ(main.body.size(), 4u);
  EXPECT_EQ(rest.lo, Affine::Const(8));
  EXPECT_EQ(rest.hi, Affine::Const(10));
  EXPECT_EQ(FiredRules(r.traces),
            (std::multiset<std::string>{"unroll.expand", "unroll.remainder"}));
  for (uint64_t s = 0; s < 3; ++s) {
    const auto in = loop::RandomLoopBindings(p, s);
    const auto got = Execute(r.program, in);
    for (int i = 0; i < 10; ++i)
      EXPECT_EQ(got[0].data[i], static_cast<float>(in.at("x").data[i] + in.at("y").data[i]));
  }
}

TEST(Unroll, ShortTripIsRemainderOnly) {
  const auto p = Parse(
      "program s\ninput x: I32[3]\noutput out0: I32[3]\nbody:\n"
      "  for i in 0 .. 3 @unroll(4):\n    out0[i] = neg.i32(load x[i])\n");
  const auto r = RunLLPass(LLPassId::kUnrollExpand, p);
  EXPECT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"unroll.remainder"}));
  EXPECT_FALSE(AnyAnnotation(r.program.body, AnnKind::kUnroll));
  const auto in = loop::RandomLoopBindings(p, 1);
  EXPECT_TRUE(SameOutputs(Reference(p, in), Execute(r.program, in), {0, 0}));
}

TEST(Vectorize, DependentLoopIsDemoted) {
  const auto p = Parse(
      "program dep\ninput x: F32[9]\noutput out0: F32[9]\nbody:\n"
      "  out0[0] = load x[0]\n"
      "  for i in 1 .. 9 @vectorize(4):\n"
      "    out0[i] = add.f32(load out0[i - 1], const.f32(1))\n");
  const auto r = RunLLPass(LLPassId::kVectorizeLegalize, p);
  EXPECT_EQ(r.program.body.body[1].ann, Annotation::Serial());
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].rule_id, "vec.demote");
  EXPECT_EQ(r.traces[0].loop_path, (loop::StmtPath{1}));
}

TEST(Vectorize, IndependentLoopIsKept) {
  const auto p = Parse(
      "program ind\ninput x: F32[8]\noutput out0: F32[8]\nbody:\n"
      "  for i in 0 .. 8 @vectorize(4):\n"
      "    out0[i] = mul.f32(load x[i], load x[-i + 7])\n");
  const auto r = RunLLPass(LLPassId::kVectorizeLegalize, p);
  EXPECT_EQ(r.program.body.body[0].ann, Annotation::Vectorize(4));
  EXPECT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"vec.keep"}));
}

TEST(Vectorize, IndivisibleTripIsDemoted) {
  const auto p = Parse(
      "program odd\ninput x: F32[6]\noutput out0: F32[6]\nbody:\n"
      "  for i in 0 .. 6 @vectorize(4):\n    out0[i] = load x[i]\n");
  const auto r = RunLLPass(LLPassId::kVectorizeLegalize, p);
  EXPECT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"vec.demote"}));
}

TEST(Dependence, SubscriptTest) {
  auto loop_of = [](const std::string& body) {
    return Parse("program d\ninput x: F32[64]\noutput out0: F32[64]\nbody:\n" + body)
        .body.body.back();
  };
  EXPECT_FALSE(HasLoopCarriedDependence(
      loop_of("  for i in 0 .. 8:\n    out0[i] = load x[i]\n")));
  EXPECT_TRUE(HasLoopCarriedDependence(
      loop_of("  out0[0] = const.f32(0)\n"
              "  for i in 1 .. 8:\n    out0[i] = load out0[i - 1]\n")));
  // Accumulation into one element.
  EXPECT_TRUE(HasLoopCarriedDependence(
      loop_of("  out0[0] = const.f32(0)\n"
              "  for i in 0 .. 8:\n    out0[0] = add.f32(load out0[0], load x[i])\n")));
  // Inner loop spans 8 elements per outer step of 8: disjoint.
  EXPECT_FALSE(HasLoopCarriedDependence(
      loop_of("  for i in 0 .. 8:\n    for j in 0 .. 8:\n"
              "      out0[8*i + j] = load x[j]\n")));
  // Outer step 4 with inner span 8: overlap.
  EXPECT_TRUE(HasLoopCarriedDependence(
      loop_of("  for i in 0 .. 8:\n    for j in 0 .. 8:\n"
              "      out0[4*i + j] = load x[j]\n")));
}

TEST(Tile, MarkedLoopSplitsWithRemainder) {
  const auto p = Parse(
      "program t\ninput x: F32[10]\noutput out0: F32[10]\nbody:\n"
      "  for i in 0 .. 10 @parallel:\n    out0[i] = relu.f32(load x[i])\n");
  const auto r = RunLLPass(LLPassId::kTileLoops, p);
  ASSERT_EQ(r.program.body.body.size(), 2u);
  const Stmt& outer = r.program.body.body[0];
  EXPECT_EQ(outer.ConstantTrip(), 1);
  EXPECT_EQ(outer.ann.kind, AnnKind::kParallel);
  ASSERT_EQ(outer.body.size(), 1u);
  EXPECT_EQ(outer.body[0].ConstantTrip(), kTileSize);
  EXPECT_EQ(r.program.body.body[1].lo, Affine::Const(8));
  EXPECT_EQ(FiredRules(r.traces),
            (std::multiset<std::string>{"tile.split", "tile.remainder"}));
  const auto in = loop::RandomLoopBindings(p, 5);
  EXPECT_TRUE(SameOutputs(Reference(p, in), Execute(r.program, in), {0, 0}));
}

TEST(Tile, HeuristicTakesLongTopLevelLoops) {
  const auto p = Parse(
      "program h\ninput x: F32[4, 16]\noutput out0: F32[4, 16]\nbody:\n"
      "  for i in 0 .. 4:\n    for j in 0 .. 16:\n"
      "      out0[16*i + j] = load x[16*i + j]\n"
      "  for k in 0 .. 1:\n    out0[0] = load x[0]\n");
  EXPECT_TRUE(RunLLPass(LLPassId::kTileLoops, p).traces.empty());
  const auto q = Parse(
      "program h\ninput x: F32[20]\noutput out0: F32[20]\nbody:\n"
      "  for i in 0 .. 20:\n    out0[i] = load x[i]\n");
  const auto r = RunLLPass(LLPassId::kTileLoops, q);
  EXPECT_EQ(FiredRules(r.traces),
            (std::multiset<std::string>{"tile.split", "tile.remainder"}));
}

TEST(Reorder, InterchangesColumnMajorNest) {
  const auto p = Seed("matmul_16");
  const auto r = RunLLPass(LLPassId::kReorderLoops, p);
  ASSERT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"reorder.interchange"}));
  const Stmt& nest = r.program.body.body.back();
  EXPECT_EQ(nest.var, "i");
  EXPECT_EQ(nest.body[0].var, "j");
  const auto in = loop::RandomLoopBindings(p, 2);
  EXPECT_TRUE(SameOutputs(Reference(p, in), Execute(r.program, in), {0, 0}));
}

TEST(Reorder, AccumulationIsIllegal) {
  const auto p = Parse(
      "program acc\ninput x: F32[4, 4]\noutput out0: F32[4]\nbody:\n"
      "  for i in 0 .. 4:\n    out0[i] = const.f32(0)\n"
      "  for j in 0 .. 4:\n    for i in 0 .. 4:\n"
      "      out0[i] = add.f32(load out0[i], load x[4*i + j])\n");
  const auto r = RunLLPass(LLPassId::kReorderLoops, p);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].rule_id, "reorder.illegal");
  EXPECT_FALSE(r.traces[0].fired);
  EXPECT_EQ(r.program, p);
}

TEST(Pipeline, StencilGetsPrologueSteadyEpilogue) {
  const auto p = Seed("stencil_cache");
  const auto r = RunLLPass(LLPassId::kMemLatencyHide, p);
  ASSERT_EQ(FiredRules(r.traces), (std::multiset<std::string>{"pipeline.double_buffer"}));
  const Stmt& seq = r.program.body.body[0];
  ASSERT_EQ(seq.kind, StmtKind::kSeq);
  ASSERT_EQ(seq.body.size(), 4u);
  EXPECT_EQ(seq.body[0].kind, StmtKind::kAlloc);
  EXPECT_EQ(seq.body[0].alloc.extents, (Shape{8, 18}));
  EXPECT_EQ(seq.body[1].ConstantTrip(), 2);  // depth 3 prefetches two iterations
  EXPECT_EQ(seq.body[2].ConstantTrip(), 6);
  EXPECT_EQ(seq.body[3].ConstantTrip(), 2);
  for (uint64_t s = 0; s < 3; ++s) {
    const auto in = loop::RandomLoopBindings(p, s);
    EXPECT_TRUE(SameOutputs(Reference(p, in), Execute(r.program, in), {0, 0}));
  }
}

TEST(Pipeline, LoopWithoutCacheIsUntouched) {
  const auto p = Parse(
      "program n\ninput x: F32[4]\noutput out0: F32[4]\nbody:\n"
      "  for i in 0 .. 4 @pipelined(2):\n    out0[i] = load x[i]\n");
  const auto r = RunLLPass(LLPassId::kMemLatencyHide, p);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_EQ(r.program, p);
}

TEST(Intrinsic, MulAddBecomesFma) {
  const auto p = Parse(
      "program f\ninput a: F32[4]\ninput b: F32[4]\noutput out0: F32[4]\nbody:\n"
      "  for i in 0 .. 4:\n"
      "    out0[i] = add.f32(load b[i], mul.f32(load a[i], load b[i]))\n");
  const auto r = RunLLPass(LLPassId::kIntrinsicMap, p);
  EXPECT_EQ(loop::ExprToString(r.program.body.body[0].body[0].value),
            "fma.f32(load a[i], load b[i], load b[i])");
  EXPECT_EQ(r.program.intrinsics_used, (std::set<std::string>{"fma"}));
  EXPECT_EQ(ToleranceFor(r.program).rel, 1e-4);
  EXPECT_EQ(ToleranceFor(p).rel, 1e-5);
  ASSERT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.traces[0].loop_path, (loop::StmtPath{0, 0}));
}

TEST(Intrinsic, IntegerAndPlainMulUntouched) {
  const auto p = Parse(
      "program f\ninput a: I32[4]\ninput b: F32[4]\noutput out0: I32[4]\n"
      "output out1: F32[4]\nbody:\n"
      "  for i in 0 .. 4:\n"
      "    out0[i] = add.i32(load a[i], mul.i32(load a[i], load a[i]))\n"
      "    out1[i] = mul.f32(load b[i], add.f32(load b[i], load b[i]))\n");
  const auto r = RunLLPass(LLPassId::kIntrinsicMap, p);
  EXPECT_TRUE(r.traces.empty());
  EXPECT_TRUE(r.program.intrinsics_used.empty());
}

TEST(Pipeline, LevelZeroIsIdentity) {
  for (const auto& f : SeedFiles()) {
    const auto p = loop::LoadLoopFile(f);
    const auto r = RunLLPipeline(0, p);
    EXPECT_EQ(loop::SerializeLoop(r.program), loop::SerializeLoop(p)) << f;
    EXPECT_TRUE(r.traces.empty());
  }
}

TEST(Pipeline, MatmulSeedFiresAllSixPasses) {
  const auto p = Seed("matmul_16");
  const auto r = RunLLPipeline(2, p, {}, true);
  std::set<LLPassId> fired;
  for (const auto& t : r.traces)
    if (t.fired) fired.insert(t.pass);
  EXPECT_EQ(fired.size(), 6u);
  ASSERT_EQ(r.steps.size(), 6u);

  // Independent oracle: plain matmul plus bias, and elementwise product.
  const auto in = loop::RandomLoopBindings(p, 11);
  const auto& a = in.at("a").data;
  const auto& b = in.at("b").data;
  const auto& bias = in.at("bias").data;
  const auto got = Execute(r.program, in);
  for (int i = 0; i < 16; ++i) {
    for (int j = 0; j < 16; ++j) {
      double acc = 0;
      for (int k = 0; k < 16; ++k) acc += a[16 * i + k] * b[16 * k + j];
      EXPECT_NEAR(got[0].data[16 * i + j], acc + bias[j], 1e-4);
      EXPECT_EQ(got[1].data[16 * i + j], static_cast<float>(a[16 * i + j] * b[16 * i + j]));
    }
  }
}

TEST(Pipeline, UnannotatedLoweringOnlyTiles) {
  graph::GraphBuilder gb;
  auto x = gb.Input("a", {DType::kF32, {40}});
  auto y = gb.Input("b", {DType::kF32, {40}});
  gb.Output(gb.Op(graph::OpKind::kAdd, {x, y}));
  const auto p = loop::LowerGraph(gb.Build());
  const auto r = RunLLPipeline(2, p);
  for (const auto& t : r.traces) EXPECT_EQ(t.pass, LLPassId::kTileLoops) << t.rule_id;
  const auto in = loop::RandomLoopBindings(p, 4);
  EXPECT_TRUE(SameOutputs(Reference(p, in), Execute(r.program, in), kDefaultTolerance));
}

TEST(Pipeline, InternalErrorsAreWrapped) {
  // An input shadowed by an output name fails validation after the pass.
  LoopProgram p = Parse(kUnroll8);
  p.outputs.push_back(p.inputs[0]);
  try {
    RunLLPass(LLPassId::kTileLoops, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPassInternal);
  }
}

// Random annotations on lowered random graphs exercise every pass on shapes
// the hand-written seeds do not cover.
LoopProgram Annotate(LoopProgram p, std::mt19937_64& rng) {
  std::vector<loop::StmtPath> loops;
  loop::VisitStmts(p.body, [&](const Stmt& s, const loop::StmtPath& path) {
    if (s.kind == StmtKind::kFor) loops.push_back(path);
  });
  const int pick[] = {2, 4, 8};
  for (const auto& path : loops) {
    Stmt* s = loop::Resolve(p.body, path);
    switch (rng() % 6) {
      case 0: s->ann = Annotation::Vectorize(pick[rng() % 3]); break;
      case 1: s->ann = Annotation::Unroll(pick[rng() % 3]); break;
      case 2: s->ann = Annotation::Parallel(); break;
      case 3: s->ann = Annotation::Pipelined(2 + static_cast<int>(rng() % 2)); break;
      default: break;
    }
  }
  return p;
}

std::vector<LoopProgram> Corpus() {
  std::vector<LoopProgram> out;
  for (const auto& f : SeedFiles()) out.push_back(loop::LoadLoopFile(f));
  std::mt19937_64 rng(77);
  for (uint64_t s = 0; s < 150; ++s) {
    const auto g = gen::RandomGraph(s);
    out.push_back(Annotate(loop::LowerGraph(g), rng));
  }
  return out;
}

TEST(Property, EveryPassPreservesSemantics) {
  std::set<LLPassId> fired;
  for (const auto& p : Corpus()) {
    for (LLPassId pass : LLPipelineOrder()) {
      const auto r = RunLLPass(pass, p);
      for (const auto& t : r.traces) {
        if (t.fired) fired.insert(t.pass);
        const Stmt* at = loop::Resolve(p.body, t.loop_path);
        ASSERT_NE(at, nullptr) << t.rule_id;
        EXPECT_EQ(at->kind, pass == LLPassId::kIntrinsicMap ? StmtKind::kStore : StmtKind::kFor);
      }
      for (uint64_t s = 0; s < 3; ++s) {
        const auto in = loop::RandomLoopBindings(p, s);
        std::vector<TensorValue> want;
        try {
          want = Reference(p, in);
        } catch (const Error& e) {
          ASSERT_EQ(e.kind(), ErrorKind::kNumericDomain);
          continue;
        }
        // Lock-step execution is only sound once VectorizeLegalize has run.
        const bool lockstep = pass == LLPassId::kVectorizeLegalize;
        EXPECT_TRUE(
            SameOutputs(want, Execute(r.program, in, lockstep), ToleranceFor(r.program)))
            << LLPassName(pass) << "\n"
            << loop::SerializeLoop(p) << "----\n"
            << loop::SerializeLoop(r.program);
      }
    }
    const auto full = RunLLPipeline(2, p);
    const auto in = loop::RandomLoopBindings(p, 9);
    try {
      const auto want = Reference(p, in);
      EXPECT_TRUE(SameOutputs(want, Execute(full.program, in), ToleranceFor(full.program)))
          << loop::SerializeLoop(p);
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::kNumericDomain);
    }
  }
  EXPECT_EQ(fired.size(), 6u);
}

TEST(Property, NoVectorizeOnDependentLoops) {
  for (const auto& p : Corpus()) {
    const auto r = RunLLPass(LLPassId::kVectorizeLegalize, p);
    loop::VisitStmts(r.program.body, [&](const Stmt& s, const loop::StmtPath&) {
      if (s.kind == StmtKind::kFor && s.ann.kind == AnnKind::kVectorize) {
        EXPECT_FALSE(HasLoopCarriedDependence(s)) << loop::SerializeLoop(p);
      }
    });
  }
}

TEST(Property, NoUnrollAnnotationsRemain) {
  for (const auto& p : Corpus()) {
    const auto r = RunLLPass(LLPassId::kUnrollExpand, p);
    EXPECT_FALSE(AnyAnnotation(r.program.body, AnnKind::kUnroll));
  }
}

TEST(Property, Deterministic) {
  for (const auto& f : SeedFiles()) {
    const auto p = loop::LoadLoopFile(f);
    EXPECT_EQ(loop::SerializeLoop(RunLLPipeline(2, p).program),
              loop::SerializeLoop(RunLLPipeline(2, p).program));
  }
}

// Each seeded defect changes the verdict on a dedicated program.
::testing::AssertionResult Diverges(const LoopProgram& p, BugId bug) {
  const auto in = loop::RandomLoopBindings(p, 1);
  const auto want = Reference(p, in);
  const auto clean = RunLLPipeline(2, p);
  if (!SameOutputs(want, Execute(clean.program, in), ToleranceFor(clean.program)))
    return ::testing::AssertionFailure() << "clean pipeline already diverges";
  const auto buggy = RunLLPipeline(2, p, BugSet().With(bug));
  try {
    if (SameOutputs(want, Execute(buggy.program, in), ToleranceFor(buggy.program)))
      return ::testing::AssertionFailure() << "no divergence";
  } catch (const Error& e) {
    return ::testing::AssertionSuccess() << e.what();
  }
  return ::testing::AssertionSuccess();
}

TEST(SeededBugs, B1UnrollRemainder) { EXPECT_TRUE(Diverges(Seed("add_10"), BugId::kB1)); }

TEST(SeededBugs, B2TileRemainder) {
  const auto p = Parse(
      "program t\ninput x: F32[10]\noutput out0: F32[10]\nbody:\n"
      "  for i in 0 .. 10 @parallel:\n    out0[i] = relu.f32(load x[i])\n");
  EXPECT_TRUE(Diverges(p, BugId::kB2));
}

TEST(SeededBugs, B3DependenceCheck) { EXPECT_TRUE(Diverges(Seed("prefix_scan"), BugId::kB3)); }

TEST(SeededBugs, B4DistributedFma) {
  const auto p = Parse(
      "program f\ninput a: F32[8]\ninput b: F32[8]\noutput out0: F32[8]\nbody:\n"
      "  for i in 0 .. 8:\n"
      "    out0[i] = mul.f32(load a[i], add.f32(load b[i], const.f32(1.5)))\n");
  EXPECT_TRUE(Diverges(p, BugId::kB4));
}

}  // namespace
}  // namespace stagefuzz::ll

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

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "stagefuzz/error.h"
#include "stagefuzz/graph_gen.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::loop {
namespace {

using graph::GraphBuilder;
using graph::OpKind;

TensorType F32(Shape s) { return {DType::kF32, std::move(s)}; }

constexpr Tolerance kLowering{0.0, 1e-6};

// Compares the loop interpreter on the lowered program with the graph
// interpreter on the same bindings.
void ExpectLoweringMatches(const graph::Graph& g, uint64_t seed) {
  const auto bindings = graph::RandomBindings(g, seed);
  std::vector<TensorValue> want;
  try {
    want = graph::InterpretGraph(g, bindings);
  } catch (const Error& e) {
    ASSERT_EQ(e.kind(), ErrorKind::kNumericDomain);
    return;
  }
  const LoopProgram p = LowerGraph(g);
  const auto problems = ValidateProgram(p);
  ASSERT_TRUE(problems.empty()) << problems.front() << "\n" << SerializeLoop(p);
  const auto got = OrderedOutputs(p, InterpretLoop(p, bindings));
  ASSERT_EQ(want.size(), got.size());
  for (size_t i = 0; i < want.size(); ++i) {
    const auto d = CompareTensors(want[i], got[i], kLowering);
    EXPECT_TRUE(d.equal) << "output " << i << "\n"
                         << graph::SerializeGraph(g) << SerializeLoop(p);
  }
}

int CountLoops(const Stmt& s) {
  int n = 0;
  VisitStmts(s, [&](const Stmt& x, const StmtPath&) { n += x.kind == StmtKind::kFor; });
  return n;
}

TEST(Lower, AddIsOneLoop) {
  GraphBuilder b;
  auto x = b.Input("a", F32({4}));
  auto y = b.Input("b", F32({4}));
  b.Output(b.Op(OpKind::kAdd, {x, y}));
  const LoopProgram p = LowerGraph(b.Build());
  ASSERT_EQ(p.body.body.size(), 1u);
  const Stmt& loop = p.body.body[0];
  ASSERT_EQ(loop.kind, StmtKind::kFor);
  EXPECT_EQ(loop.ConstantTrip(), 4);
  ASSERT_EQ(loop.body.size(), 1u);
  const Stmt& store = loop.body[0];
  EXPECT_EQ(store.kind, StmtKind::kStore);
  EXPECT_EQ(store.buffer, "out0");
  EXPECT_EQ(store.index, Affine::Var(loop.var));
  EXPECT_EQ(ExprToString(store.value), "add.f32(load a[i0], load b[i0])");
}

TEST(Interpret, AddExample) {
  GraphBuilder b;
  auto x = b.Input("a", F32({4}));
  auto y = b.Input("b", F32({4}));
  b.Output(b.Op(OpKind::kAdd, {x, y}));
  const LoopProgram p = LowerGraph(b.Build());
  LoopBindings in{{"a", {F32({4}), {1, 2, 3, 4}}}, {"b", {F32({4}), {10, 20, 30, 40}}}};
  auto out = InterpretLoop(p, in);
  EXPECT_EQ(out.at("out0").data, (std::vector<double>{11, 22, 33, 44}));
}

LoopProgram Parse(const std::string& text) { return ParseLoop(text); }

TEST(Interpret, StoreAtExtentIsOutOfBounds) {
  const auto p = Parse(
      "program oob\n"
      "input a: F32[4]\n"
      "output out0: F32[4]\n"
      "body:\n"
      "  for i in 0 .. 4:\n"
      "    out0[i + 1] = load a[i]\n");
  LoopBindings in{{"a", RandomTensor(F32({4}), 1)}};
  try {
    InterpretLoop(p, in);
    FAIL() << "expected OutOfBounds";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kOutOfBounds);
  }
}

TEST(Interpret, UninitializedRead) {
  const auto p = Parse(
      "program uninit\n"
      "input a: F32[4]\n"
      "output out0: F32[4]\n"
      "body:\n"
      "  alloc global t: F32[4]\n"
      "  for i in 0 .. 4:\n"
      "    out0[i] = add.f32(load a[i], load t[i])\n");
  LoopBindings in{{"a", RandomTensor(F32({4}), 1)}};
  try {
    InterpretLoop(p, in);
    FAIL() << "expected UninitializedRead";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUninitializedRead);
  }
}

TEST(Interpret, UnwrittenOutputIsUninitialized) {
  const auto p = Parse(
      "program partial\n"
      "input a: F32[4]\n"
      "output out0: F32[4]\n"
      "body:\n"
      "  for i in 0 .. 3:\n"
      "    out0[i] = load a[i]\n");
  LoopBindings in{{"a", RandomTensor(F32({4}), 1)}};
  EXPECT_THROW(InterpretLoop(p, in), Error);
}

TEST(Interpret, MissingBinding) {
  const auto p = Parse("program p\ninput a: F32[4]\noutput out0: F32[4]\nbody:\n");
  try {
    InterpretLoop(p, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
  }
}

TEST(Lower, MatMulTripleNestMatchesGraph) {
  GraphBuilder b;
  auto x = b.Input("x", F32({2, 3}));
  auto w = b.Input("w", F32({3, 2}));
  b.Output(b.Op(OpKind::kMatMul, {x, w}));
  const auto g = b.Build();
  const LoopProgram p = LowerGraph(g);
  EXPECT_EQ(CountLoops(p.body), 3);
  for (uint64_t seed = 0; seed < 20; ++seed) ExpectLoweringMatches(g, seed);
}

TEST(Lower, FusedGroupIsOneNest) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3, 4}));
  auto y = b.Input("y", F32({4}));
  graph::Graph g = b.Build();
  graph::Node grp{2, OpKind::kFusedGroup, {}, {x, y}, F32({3, 4}), {},
                  graph::DecodeFusedBody("Add:i0:i1|ReLU:t0")};
  g.nodes[2] = grp;
  g.outputs = {2};
  ASSERT_TRUE(graph::ValidateGraph(g).ok());
  const LoopProgram p = LowerGraph(g);
  EXPECT_EQ(p.body.body.size(), 1u);
  EXPECT_EQ(CountLoops(p.body), 2);
  for (uint64_t seed = 0; seed < 20; ++seed) ExpectLoweringMatches(g, seed);
}

TEST(Lower, ConvMatchesGraph) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    GraphBuilder b;
    auto x = b.Input("x", F32({1, 2, 5, 5}));
    const TensorType wt = F32({pick(1, 3), 2, pick(1, 3), pick(1, 3)});
    auto w = b.Constant(wt, RandomTensor(wt, trial).data);
    graph::Params params{{"stride", std::vector<int64_t>{pick(1, 2), pick(1, 2)}},
                         {"pad", std::vector<int64_t>{pick(0, 2), pick(0, 1), pick(0, 1), pick(0, 2)}}};
    if (trial % 3 == 0) params["layout"] = std::string("NCHW");
    b.Output(b.Op(OpKind::kConv2D, {x, w}, params));
    ExpectLoweringMatches(b.Build(), trial);
  }
}

TEST(Lower, NhwcConvMatchesGraph) {
  GraphBuilder b;
  auto x = b.Input("x", F32({1, 5, 4, 2}));
  const TensorType wt = F32({3, 2, 2, 2});
  auto w = b.Constant(wt, RandomTensor(wt, 3).data);
  b.Output(b.Op(OpKind::kConv2D, {x, w},
                {{"layout", std::string("NHWC")}, {"pad", std::vector<int64_t>{1, 1}}}));
  for (uint64_t seed = 0; seed < 5; ++seed) ExpectLoweringMatches(b.Build(), seed);
}

TEST(Lower, DataMovementAndReductions) {
  GraphBuilder b;
  auto x = b.Input("x", {DType::kI32, {2, 3, 2}});
  auto t = b.Op(OpKind::kTranspose, {x}, {{"perm", std::vector<int64_t>{2, 0, 1}}});
  auto r = b.Op(OpKind::kReduceSum, {t}, {{"axes", std::vector<int64_t>{-1}}, {"keepdims", int64_t{1}}});
  auto p = b.Op(OpKind::kPad, {r}, {{"pads", std::vector<int64_t>{0, 1, 0, 1, 0, 0}}});
  auto c = b.Op(OpKind::kConcat, {p, p}, {{"axis", int64_t{-2}}});
  auto rs = b.Op(OpKind::kReshape, {c}, {{"shape", std::vector<int64_t>{3, 6}}});
  auto cast = b.Op(OpKind::kCast, {rs}, {{"to", std::string("I8")}});
  b.Output(cast);
  b.Output(x);
  b.Output(cast);
  for (uint64_t seed = 0; seed < 10; ++seed) ExpectLoweringMatches(b.Build(), seed);
}

TEST(Text, UnknownAnnotationIsParseError) {
  try {
    Parse("program p\ninput a: F32[4]\noutput out0: F32[4]\nbody:\n"
          "  for i in 0 .. 4 @simd(4):\n    out0[i] = load a[i]\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
    EXPECT_EQ(e.kind(), ErrorKind::kParseError);
  }
}

TEST(Text, OutOfRangeAnnotationIsParseError) {
  EXPECT_THROW(Parse("program p\noutput out0: F32[4]\nbody:\n"
                     "  for i in 0 .. 4 @vectorize(3):\n    out0[i] = const.f32(0)\n"),
               ParseError);
}

TEST(Text, RoundTripHandWritten) {
  const std::string text =
      "program sample\n"
      "input a: F32[8]\n"
      "output out0: F32[8]\n"
      "const c0: F32[2] = [0.5,-1]\n"
      "intrinsics: fma\n"
      "body:\n"
      "  alloc cache s: F32[8]\n"
      "  for i in 0 .. 8 @vectorize(4):\n"
      "    s[i] = fma.f32(load a[i], load c0[0], const.f32(0.25))\n"
      "  for i in 0 .. 8 @unroll(2):\n"
      "    if i - 1 >= 0, -i + 6 >= 0:\n"
      "      out0[i] = cast.i32.f32(cast.f32.i32(load s[-i + 7]))\n"
      "    seq:\n"
      "      out0[0] = sigmoid.f32(neg.f32(load s[0]))\n"
      "  for j in 0 .. 1 @pipelined(2):\n"
      "    out0[7] = relu.f32(sub.f32(load s[7], load c0[1]))\n"
      "  for k in 0 .. 1 @parallel:\n"
      "    out0[6] = div.f32(mul.f32(load s[6], load s[2*k + 6]), const.f32(2))\n";
  const auto p = Parse(text);
  EXPECT_EQ(SerializeLoop(p), text);
  EXPECT_EQ(ParseLoop(SerializeLoop(p)), p);
  EXPECT_TRUE(ValidateProgram(p).empty());
}

TEST(Validate, FlagsUndeclaredNames) {
  const auto p = Parse(
      "program bad\ninput a: F32[4]\noutput out0: F32[4]\nbody:\n"
      "  for i in 0 .. 4:\n    out0[j] = load b[i]\n    a[i] = const.f32(1)\n");
  const auto problems = ValidateProgram(p);
  EXPECT_EQ(problems.size(), 3u);
}

TEST(Lockstep, ScanDiffersFromSerial) {
  const auto p = Parse(
      "program scan\ninput a: F32[8]\noutput out0: F32[8]\nbody:\n"
      "  out0[0] = load a[0]\n"
      "  for i in 1 .. 8 @vectorize(2):\n"
      "    out0[i] = add.f32(load out0[i - 1], load a[i])\n");
  LoopBindings in{{"a", {F32({8}), {1, 1, 1, 1, 1, 1, 1, 1}}}};
  EXPECT_EQ(InterpretLoop(p, in).at("out0").data[7], 8);
  // Lane 1 of each vector reads the value from before the vector store.
  EXPECT_THROW(InterpretLoop(p, in, {.lockstep_vectorize = true}), Error);
}

// Properties over the random generator.
TEST(LoweringProperty, FiveHundredRandomGraphs) {
  for (uint64_t seed = 0; seed < 500; ++seed) {
    const auto g = gen::RandomGraph(seed + 7000);
    ExpectLoweringMatches(g, seed);
    if (HasFailure()) FAIL() << "seed " << seed;
  }
}

TEST(TextProperty, LoweredProgramsRoundTrip) {
  for (uint64_t seed = 0; seed < 200; ++seed) {
    const LoopProgram p = LowerGraph(gen::RandomGraph(seed));
    const std::string text = SerializeLoop(p);
    EXPECT_EQ(SerializeLoop(ParseLoop(text)), text);
  }
}

// Random valid annotations never change serial interpretation.
TEST(AnnotationProperty, ErasureKeepsResults) {
  std::mt19937_64 rng(11);
  const Annotation choices[] = {Annotation::Parallel(), Annotation::Vectorize(4),
                                Annotation::Unroll(2), Annotation::Pipelined(3),
                                Annotation::Vectorize(8), Annotation::Unroll(8)};
  for (uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = gen::RandomGraph(seed + 300);
    LoopProgram p = LowerGraph(g);
    std::function<void(Stmt&)> annotate = [&](Stmt& s) {
      if (s.kind == StmtKind::kFor && rng() % 2) s.ann = choices[rng() % 6];
      for (auto& c : s.body) annotate(c);
    };
    annotate(p.body);
    ASSERT_TRUE(ValidateProgram(p).empty());
    const auto bind = graph::RandomBindings(g, seed);
    std::map<std::string, TensorValue> a, b;
    try {
      a = InterpretLoop(p, bind);
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::kNumericDomain);
      continue;
    }
    b = InterpretLoop(StripAnnotations(p), bind);
    for (const auto& [name, v] : a)
      EXPECT_TRUE(CompareTensors(v, b.at(name), {0, 0}).equal) << name;
  }
}

TEST(Seeds, BundledSeedsParseAndValidate) {
  const LoopProgram p = LoadLoopFile(std::string(STAGEFUZZ_DATA_DIR) + "/seeds/matmul_16.lir");
  EXPECT_TRUE(ValidateProgram(p).empty());
  int files = 0;
  for (const auto& e :
       std::filesystem::directory_iterator(std::string(STAGEFUZZ_DATA_DIR) + "/seeds")) {
    if (e.path().extension() != ".lir") continue;
    ++files;
    const LoopProgram q = LoadLoopFile(e.path().string());
    const auto problems = ValidateProgram(q);
    EXPECT_TRUE(problems.empty()) << e.path() << ": " << problems.front();
    EXPECT_EQ(ParseLoop(SerializeLoop(q)), q);
    EXPECT_NO_THROW(InterpretLoop(q, RandomLoopBindings(q, 0)));
  }
  EXPECT_GE(files, 5);
}

}  // namespace
}  // namespace stagefuzz::loop

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

#include <cmath>
#include <random>

#include "stagefuzz/error.h"
#include "stagefuzz/graph.h"

namespace stagefuzz::graph {
namespace {

TensorType F32(Shape s) { return {DType::kF32, std::move(s)}; }

// Brute-force NCHW convolution over an explicitly zero-padded copy of the
// input, written independently of the interpreter's index arithmetic.
std::vector<double> NaiveConv(const std::vector<double>& x, Shape xs,
                              const std::vector<double>& w, Shape ws, int sh,
                              int sw, int pt, int pl, int pb, int pr, Shape* out) {
  const int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const int O = ws[0], KH = ws[2], KW = ws[3];
  const int HP = H + pt + pb, WP = W + pl + pr;
  std::vector<double> padded(N * C * HP * WP, 0.0);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int ww = 0; ww < W; ++ww)
          padded[((n * C + c) * HP + h + pt) * WP + ww + pl] =
              x[((n * C + c) * H + h) * W + ww];
  int OH = 0;
  while (OH * sh + KH <= HP) ++OH;
  int OW = 0;
  while (OW * sw + KW <= WP) ++OW;
  *out = {N, O, OH, OW};
  std::vector<double> y(N * O * OH * OW, 0.0);
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int i = 0; i < OH; ++i)
        for (int j = 0; j < OW; ++j) {
          double acc = 0;
          for (int c = 0; c < C; ++c)
            for (int a = 0; a < KH; ++a)
              for (int b = 0; b < KW; ++b)
                acc += padded[((n * C + c) * HP + i * sh + a) * WP + j * sw + b] *
                       w[((o * C + c) * KH + a) * KW + b];
          y[((n * O + o) * OH + i) * OW + j] = acc;
        }
  return y;
}

TEST(InferShapeTest, MatMul) {
  auto t = InferShape(OpKind::kMatMul, {}, {F32({3, 4}), F32({4, 5})});
  EXPECT_EQ(t, F32({3, 5}));
}

TEST(InferShapeTest, Conv2DSamePadding) {
  Params p{{"stride", std::vector<int64_t>{1, 1}}, {"pad", std::vector<int64_t>{1, 1}}};
  auto t = InferShape(OpKind::kConv2D, p, {F32({1, 3, 8, 8}), F32({4, 3, 3, 3})});
  EXPECT_EQ(t, F32({1, 4, 8, 8}));
  // Cross-check the extent against the brute-force oracle.
  Shape oracle_shape;
  NaiveConv(std::vector<double>(192, 0.0), {1, 3, 8, 8}, std::vector<double>(108, 0.0),
            {4, 3, 3, 3}, 1, 1, 1, 1, 1, 1, &oracle_shape);
  EXPECT_EQ(t.shape, oracle_shape);
}

TEST(InferShapeTest, BroadcastSizeOne) {
  EXPECT_EQ(InferShape(OpKind::kAdd, {}, {F32({2, 3}), F32({1, 3})}), F32({2, 3}));
}

TEST(InferShapeTest, Errors) {
  EXPECT_THROW(InferShape(OpKind::kMatMul, {}, {F32({3, 4}), F32({5, 6})}), Error);
  try {
    InferShape(OpKind::kTranspose, {{"perm", std::vector<int64_t>{0, 0}}},
               {F32({2, 2})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidParam);
  }
  try {
    InferShape(OpKind::kAdd, {}, {F32({2, 3}), F32({4, 3})});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch);
  }
}

TEST(InferShapeTest, BroadcastIsCommutative) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    auto random_shape = [&] {
      Shape s(rng() % 4);
      for (auto& d : s) d = std::vector<int64_t>{1, 2, 3}[rng() % 3];
      return s;
    };
    const Shape a = random_shape();
    const Shape b = random_shape();
    for (OpKind k : {OpKind::kAdd, OpKind::kMul}) {
      std::optional<TensorType> ab, ba;
      try { ab = InferShape(k, {}, {F32(a), F32(b)}); } catch (const Error&) {}
      try { ba = InferShape(k, {}, {F32(b), F32(a)}); } catch (const Error&) {}
      EXPECT_EQ(ab, ba);
    }
  }
}

TEST(ValidateTest, WellFormedAdd) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3}));
  auto y = b.Input("y", F32({3}));
  b.Output(b.Op(OpKind::kAdd, {x, y}));
  EXPECT_TRUE(ValidateGraph(b.Build()).ok());
}

TEST(ValidateTest, DanglingInput) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3}));
  auto r = b.Op(OpKind::kRelu, {x});
  b.Output(r);
  Graph g = b.Build();
  g.nodes[r].inputs = {99};
  auto report = ValidateGraph(g);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::kDanglingInput);
  EXPECT_EQ(report.violations[0].node, 99);
}

TEST(ValidateTest, TwoNodeCycle) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3}));
  auto r1 = b.Op(OpKind::kRelu, {x});
  auto r2 = b.Op(OpKind::kNeg, {r1});
  b.Output(r2);
  Graph g = b.Build();
  g.nodes[r1].inputs = {r2};
  auto report = ValidateGraph(g);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].kind, ViolationKind::kCycleDetected);
}

TEST(ValidateTest, DeclaredTypeMustMatch) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3}));
  auto r = b.Op(OpKind::kRelu, {x});
  b.Output(r);
  Graph g = b.Build();
  g.nodes[r].out_type = F32({4});
  EXPECT_TRUE(ValidateGraph(g).Has(ViolationKind::kTypeMismatch));
}

TEST(InterpretTest, AddConstants) {
  GraphBuilder b;
  auto c1 = b.Constant(F32({}), {2.0});
  auto c2 = b.Constant(F32({}), {3.0});
  b.Output(b.Op(OpKind::kAdd, {c1, c2}));
  auto out = InterpretGraph(b.Build(), {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].data, std::vector<double>{5.0});
}

TEST(InterpretTest, Relu) {
  GraphBuilder b;
  auto c = b.Constant(F32({2}), {-1.0, 2.0});
  b.Output(b.Op(OpKind::kRelu, {c}));
  EXPECT_EQ(InterpretGraph(b.Build(), {})[0].data, (std::vector<double>{0.0, 2.0}));
}

TEST(InterpretTest, ConvAllOnes) {
  GraphBuilder b;
  auto x = b.Constant(F32({1, 1, 3, 3}), std::vector<double>(9, 1.0));
  auto w = b.Constant(F32({1, 1, 2, 2}), std::vector<double>(4, 1.0));
  b.Output(b.Op(OpKind::kConv2D, {x, w}, {{"stride", std::vector<int64_t>{1, 1}}}));
  auto out = InterpretGraph(b.Build(), {});
  EXPECT_EQ(out[0].type, F32({1, 1, 2, 2}));
  EXPECT_EQ(out[0].data, std::vector<double>(4, 4.0));
}

TEST(InterpretTest, ConvMatchesBruteForceOracle) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int c = 1 + rng() % 3, o = 1 + rng() % 3, h = 3 + rng() % 4, w = 3 + rng() % 4;
    const int k = 1 + rng() % 3, s = 1 + rng() % 2;
    const int pt = rng() % 2, pl = rng() % 2, pb = rng() % 3, pr = rng() % 2;
    TensorType xt = F32({1, c, h, w});
    TensorType wt = F32({o, c, k, k});
    auto xv = RandomTensor(xt, trial);
    auto wv = RandomTensor(wt, trial + 100);
    GraphBuilder b;
    auto xn = b.Input("x", xt);
    auto wn = b.Input("w", wt);
    b.Output(b.Op(OpKind::kConv2D, {xn, wn},
                  {{"stride", std::vector<int64_t>{s, s}},
                   {"pad", std::vector<int64_t>{pt, pl, pb, pr}}}));
    auto out = InterpretGraph(b.Build(), {{"x", xv}, {"w", wv}});
    Shape oracle_shape;
    auto expected = NaiveConv(xv.data, xt.shape, wv.data, wt.shape, s, s, pt, pl, pb,
                              pr, &oracle_shape);
    ASSERT_EQ(out[0].type.shape, oracle_shape);
    for (size_t i = 0; i < expected.size(); ++i)
      EXPECT_NEAR(out[0].data[i], expected[i], 1e-6);
  }
}

TEST(InterpretTest, IntegerSemantics) {
  GraphBuilder b;
  auto a = b.Constant({DType::kI8, {2}}, {100, -128});
  auto c = b.Constant({DType::kI8, {2}}, {100, 1});
  b.Output(b.Op(OpKind::kAdd, {a, c}));
  b.Output(b.Op(OpKind::kSub, {a, c}));
  auto out = InterpretGraph(b.Build(), {});
  EXPECT_EQ(out[0].data, (std::vector<double>{-56, -127}));
  EXPECT_EQ(out[1].data, (std::vector<double>{0, 127}));
}

TEST(InterpretTest, DivisionByZero) {
  GraphBuilder b;
  auto a = b.Constant({DType::kI32, {1}}, {4});
  auto z = b.Constant({DType::kI32, {1}}, {0});
  b.Output(b.Op(OpKind::kDiv, {a, z}));
  try {
    InterpretGraph(b.Build(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumericDomain);
  }
  GraphBuilder f;
  auto fa = f.Constant(F32({2}), {1, 0});
  auto fz = f.Constant(F32({2}), {0, 0});
  f.Output(f.Op(OpKind::kDiv, {fa, fz}));
  auto out = InterpretGraph(f.Build(), {});
  EXPECT_TRUE(std::isinf(out[0].data[0]));
  EXPECT_TRUE(std::isnan(out[0].data[1]));
}

TEST(InterpretTest, MissingInput) {
  GraphBuilder b;
  b.Output(b.Op(OpKind::kNeg, {b.Input("x", F32({2}))}));
  try {
    InterpretGraph(b.Build(), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingInput);
  }
}

TEST(InterpretTest, DataMovementOps) {
  GraphBuilder b;
  auto x = b.Constant(F32({2, 3}), {1, 2, 3, 4, 5, 6});
  b.Output(b.Op(OpKind::kTranspose, {x}, {{"perm", std::vector<int64_t>{1, 0}}}));
  b.Output(b.Op(OpKind::kConcat, {x, x}, {{"axis", int64_t{-1}}}));
  b.Output(b.Op(OpKind::kReduceSum, {x}, {{"axes", std::vector<int64_t>{0}}}));
  b.Output(b.Op(OpKind::kPad, {x}, {{"pads", std::vector<int64_t>{0, 1, 0, 0}}}));
  b.Output(b.Op(OpKind::kCast, {x}, {{"to", std::string("I8")}}));
  auto out = InterpretGraph(b.Build(), {});
  EXPECT_EQ(out[0].data, (std::vector<double>{1, 4, 2, 5, 3, 6}));
  EXPECT_EQ(out[1].type.shape, (Shape{2, 6}));
  EXPECT_EQ(out[1].data, (std::vector<double>{1, 2, 3, 1, 2, 3, 4, 5, 6, 4, 5, 6}));
  EXPECT_EQ(out[2].data, (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(out[3].data, (std::vector<double>{0, 1, 2, 3, 0, 4, 5, 6}));
  EXPECT_EQ(out[4].type.dtype, DType::kI8);
}

Graph SampleGraph() {
  GraphBuilder b("sample");
  auto x = b.Input("x", F32({2, 3}));
  auto c = b.Constant(F32({3}), {0.5, -1.25, 3.0});
  auto add = b.Op(OpKind::kAdd, {x, c});
  auto r = b.Op(OpKind::kRelu, {add});
  auto t = b.Op(OpKind::kTranspose, {r}, {{"perm", std::vector<int64_t>{1, 0}}});
  auto cast = b.Op(OpKind::kCast, {t}, {{"to", std::string("I32")}});
  b.Output(t);
  b.Output(cast);
  return b.Build();
}

TEST(TextTest, RoundTrip) {
  Graph g = SampleGraph();
  const std::string text = SerializeGraph(g);
  Graph parsed = ParseGraph(text);
  EXPECT_EQ(parsed, g);
  EXPECT_EQ(SerializeGraph(parsed), text);
}

TEST(TextTest, FusedGroupAndSpecialFloats) {
  GraphBuilder b;
  auto x = b.Input("x", F32({3}));
  auto c = b.Constant(F32({3}), {std::nan(""), -0.0, static_cast<double>(1.0f / 3.0f)});
  Graph g = b.Build();
  Node n;
  n.id = 2;
  n.kind = OpKind::kFusedGroup;
  n.inputs = {x, c};
  n.fused = {{OpKind::kAdd, {0, 1}}, {OpKind::kRelu, {-1}}};
  n.out_type = F32({3});
  g.nodes[2] = n;
  g.outputs = {2};
  ASSERT_TRUE(ValidateGraph(g).ok()) << ValidateGraph(g).ToString();
  Graph parsed = ParseGraph(SerializeGraph(g));
  EXPECT_EQ(SerializeGraph(parsed), SerializeGraph(g));
  EXPECT_EQ(parsed.nodes.at(2).fused, n.fused);
  EXPECT_TRUE(std::isnan(parsed.nodes.at(1).payload[0]));
  EXPECT_TRUE(std::signbit(parsed.nodes.at(1).payload[1]));
}

TEST(TextTest, Sidecars) {
  GraphBuilder b("big");
  std::vector<double> data(100);
  for (int i = 0; i < 100; ++i) data[i] = i * 0.25;
  b.Output(b.Constant(F32({10, 10}), data));
  Graph g = b.Build();
  Sidecars sidecars;
  const std::string text = SerializeGraph(g, &sidecars);
  ASSERT_EQ(sidecars.size(), 1u);
  EXPECT_NE(text.find("data=@big.n0.data"), std::string::npos);
  Graph parsed = ParseGraph(text, [&](const std::string& rel) { return sidecars.at(rel); });
  EXPECT_EQ(parsed, g);
}

TEST(TextTest, MissingOutputsIsParseError) {
  try {
    ParseGraph("graph g\nnode 0 Input inputs=[] params={name=x} type=F32[2]\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_GE(e.line(), 2);
  }
}

TEST(TextTest, ErrorCarriesColumn) {
  try {
    ParseGraph("node 0 Conv3D inputs=[] params={} type=F32[2]\noutputs=[0]\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1);
    EXPECT_EQ(e.column(), 8);
  }
}

}  // namespace
}  // namespace stagefuzz::graph

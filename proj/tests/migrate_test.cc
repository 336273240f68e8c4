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

#include <gtest/gtest.h>

#include <map>

#include <algorithm>
#include <set>

#include "stagefuzz/error.h"

namespace stagefuzz::migrate {
namespace {

std::string CorpusPath() { return std::string(STAGEFUZZ_DATA_DIR) + "/corpus/operators.jsonl"; }

const std::vector<OperatorInstanceRecord>& Corpus() {
  static const auto records = IngestCorpus(CorpusPath()).records;
  return records;
}

OperatorInstanceRecord Rec(const std::string& json) { return ParseRecord(json); }

TEST(Ingest, BundledCorpus) {
  const auto r = IngestCorpus(CorpusPath());
  EXPECT_GE(r.records.size(), 500u);
  EXPECT_EQ(r.skipped, 0);
  EXPECT_TRUE(r.problems.empty());
  std::set<OpKind> kinds;
  for (const auto& rec : r.records) kinds.insert(rec.kind);
  EXPECT_EQ(kinds.size(), 15u);
}

TEST(Ingest, UnknownKindIsSkipped) {
  const auto r = IngestText(
      R"({"kind":"ReLU","params":{},"inputs":[{"shape":[5],"dtype":"F32","src":{"random":1}}],"origin":"a"})"
      "\n"
      R"({"kind":"Conv3D","params":{},"inputs":[{"shape":[5],"dtype":"F32","src":{"random":1}}],"origin":"b"})"
      "\n");
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.skipped, 1);
  ASSERT_EQ(r.problems.size(), 1u);
  EXPECT_NE(r.problems[0].find("line 2"), std::string::npos);
  EXPECT_NE(r.problems[0].find("SchemaViolation"), std::string::npos);
}

TEST(Ingest, EmptyFileWarns) {
  const auto r = IngestText("");
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Ingest, MissingFileIsUnreadable) {
  try {
    IngestCorpus("/nonexistent/corpus.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCorpusUnreadable);
  }
}

TEST(Ingest, SchemaChecks) {
  const std::vector<std::string> bad = {
      "not json",
      R"({"kind":"ReLU","origin":"x"})",
      R"({"kind":"ReLU","params":{"axis":1},"inputs":[{"shape":[2],"dtype":"F32","src":{"random":1}}],"origin":"x"})",
      R"({"kind":"ReLU","inputs":[{"shape":[2],"dtype":"F64","src":{"random":1}}],"origin":"x"})",
      R"({"kind":"ReLU","inputs":[{"shape":[65],"dtype":"F32","src":{"random":1}}],"origin":"x"})",
      R"({"kind":"ReLU","inputs":[{"shape":[2],"dtype":"I8","src":{"data":[1,300]}}],"origin":"x"})",
      R"({"kind":"ReLU","inputs":[{"shape":[2],"dtype":"F32","src":{"data":[1]}}],"origin":"x"})",
      R"({"kind":"ReLU","inputs":[{"shape":[2],"dtype":"F32","src":{"random":1}}]})",
      R"({"kind":"Input","inputs":[],"origin":"x"})",
  };
  for (const auto& line : bad) {
    try {
      ParseRecord(line);
      ADD_FAILURE() << line;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kSchemaViolation) << line;
    }
  }
}

TEST(Ingest, JsonRoundTrip) {
  for (const auto& r : Corpus()) EXPECT_EQ(ParseRecord(RecordToJson(r)), r);
  const std::string line =
      R"({"kind":"Conv2D","params":{"pad":[1,1],"stride":[1,1]},"inputs":[{"shape":[1,3,8,8],"dtype":"F32","src":{"random":7}}],"origin":"t_conv_basic"})";
  EXPECT_EQ(RecordToJson(Rec(line)), line);
  // One input only: ingests, then fails the Conv2D shape rule.
  EXPECT_THROW(WrapInstance(Rec(line)), Error);
}

TEST(Wrap, ConvExample) {
  const auto r = Rec(
      R"({"kind":"Conv2D","params":{"stride":[1,1],"pad":[1,1]},"inputs":[)"
      R"({"shape":[1,3,8,8],"dtype":"F32","src":{"random":7}},)"
      R"({"shape":[4,3,3,3],"dtype":"F32","src":{"random":8}}],"origin":"t_conv"})");
  const Graph g = WrapInstance(r);
  EXPECT_EQ(g.nodes.size(), 3u);
  EXPECT_TRUE(graph::ValidateGraph(g).ok());
  // (H + 2*pad - K) / stride + 1
  const int64_t hw = (8 + 2 * 1 - 3) / 1 + 1;
  EXPECT_EQ(g.at(g.outputs[0]).out_type, (TensorType{DType::kF32, {1, 4, hw, hw}}));
  const auto out = graph::InterpretGraph(g, RecordBindings(r));
  EXPECT_EQ(out[0].data.size(), 4u * hw * hw);
}

TEST(Wrap, ReluIsTwoNodes) {
  const auto r = Rec(
      R"({"kind":"ReLU","inputs":[{"shape":[5],"dtype":"F32","src":{"random":3}}],"origin":"r"})");
  const Graph g = WrapInstance(r);
  EXPECT_EQ(g.nodes.size(), 2u);
  const auto out = graph::InterpretGraph(g, RecordBindings(r));
  const auto in = RandomTensor({DType::kF32, {5}}, 3);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(out[0].data[i], std::max(0.0, in.data[i]));
}

TEST(Wrap, InlineDataBecomesConstant) {
  const auto r = Rec(
      R"({"kind":"Add","inputs":[{"shape":[2],"dtype":"I32","src":{"data":[1,2]}},)"
      R"({"shape":[2],"dtype":"I32","src":{"random":4}}],"origin":"c"})");
  const Graph g = WrapInstance(r);
  EXPECT_EQ(g.at(0).kind, OpKind::kConstant);
  EXPECT_EQ(g.at(1).kind, OpKind::kInput);
  EXPECT_EQ(RecordBindings(r).size(), 1u);
}

TEST(Wrap, MatMulMismatchIsNegativeRecord) {
  const auto r = Rec(
      R"({"kind":"MatMul","inputs":[{"shape":[3,4],"dtype":"F32","src":{"random":1}},)"
      R"({"shape":[5,6],"dtype":"F32","src":{"random":2}}],"origin":"m"})");
  try {
    WrapInstance(r);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch);
  }
}

TEST(Ingest, BundledCorpusIsTheGeneratorOutput) {
  const auto generated = GenerateCorpus(2026, 600);
  ASSERT_EQ(Corpus().size(), generated.size());
  for (size_t i = 0; i < generated.size(); ++i)
    EXPECT_EQ(RecordToJson(Corpus()[i]), RecordToJson(generated[i])) << i;
}

TEST(Ingest, GeneratedCorpusIsSkewedTowardOrdinaryCalls) {
  // As many clusters as kinds hold most of the records; the rest spread thin.
  const auto records = GenerateCorpus(11, 1500);
  const auto clusters = ClusterInstances(records);
  std::vector<size_t> sizes;
  for (const auto& c : clusters) sizes.push_back(c.members.size());
  std::sort(sizes.rbegin(), sizes.rend());
  std::set<OpKind> kinds;
  for (const auto& r : records) kinds.insert(r.kind);
  size_t head = 0;
  for (size_t i = 0; i < kinds.size(); ++i) head += sizes[i];
  EXPECT_GT(head * 2, records.size());
  EXPECT_GT(clusters.size(), 4 * kinds.size());
}

TEST(Wrap, EveryCorpusRecordWrapsOrIsNegative) {
  int negatives = 0;
  for (const auto& r : Corpus()) {
    try {
      const Graph g = WrapInstance(r);
      EXPECT_TRUE(graph::ValidateGraph(g).ok()) << r.origin;
      EXPECT_EQ(graph::SerializeGraph(LoadRecord(r)), graph::SerializeGraph(g)) << r.origin;
      try {
        graph::InterpretGraph(g, RecordBindings(r));
      } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::kNumericDomain) << r.origin;
      }
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kShapeMismatch) << r.origin;
      ++negatives;
    }
  }
  EXPECT_GT(negatives, 0);
  EXPECT_LT(negatives, static_cast<int>(Corpus().size()) / 5);
}

// Loader defects: the frontend graph disagrees with the reference wrap.
std::vector<TensorValue> Eval(const Graph& g, const OperatorInstanceRecord& r) {
  return graph::InterpretGraph(g, RecordBindings(r));
}

TEST(Loader, L1DropsAsymmetricPad) {
  const auto r = Rec(
      R"({"kind":"Conv2D","params":{"pad":[0,1,2,0]},"inputs":[)"
      R"({"shape":[1,1,5,5],"dtype":"F32","src":{"random":1}},)"
      R"({"shape":[1,1,3,3],"dtype":"F32","src":{"random":2}}],"origin":"p"})");
  const auto want = Eval(WrapInstance(r), r);
  EXPECT_EQ(want[0].type.shape, (Shape{1, 1, 5, 4}));
  EXPECT_EQ(Eval(LoadRecord(r), r)[0].type, want[0].type);
  EXPECT_NE(Eval(LoadRecord(r, BugSet().With(BugId::kL1)), r)[0].type, want[0].type);
}

TEST(Loader, L2DropsCastOnI32) {
  const auto r = Rec(
      R"({"kind":"Cast","params":{"to":"F32"},"inputs":[)"
      R"({"shape":[3],"dtype":"I32","src":{"random":1}}],"origin":"c"})");
  const Graph buggy = LoadRecord(r, BugSet().With(BugId::kL2));
  EXPECT_EQ(buggy.at(buggy.outputs[0]).out_type.dtype, DType::kI32);
  const auto f32 = Rec(
      R"({"kind":"Cast","params":{"to":"I32"},"inputs":[)"
      R"({"shape":[3],"dtype":"F32","src":{"random":1}}],"origin":"c"})");
  EXPECT_EQ(graph::SerializeGraph(LoadRecord(f32, BugSet().With(BugId::kL2))),
            graph::SerializeGraph(WrapInstance(f32)));
}

TEST(Loader, L3ShiftsNegativeConcatAxis) {
  const auto r = Rec(
      R"({"kind":"Concat","params":{"axis":-1},"inputs":[)"
      R"({"shape":[2,2],"dtype":"F32","src":{"random":1}},)"
      R"({"shape":[2,2],"dtype":"F32","src":{"random":2}}],"origin":"c"})");
  const auto want = Eval(WrapInstance(r), r);
  EXPECT_EQ(want[0].type.shape, (Shape{2, 4}));
  EXPECT_EQ(Eval(LoadRecord(r, BugSet().With(BugId::kL3)), r)[0].type.shape, (Shape{4, 2}));
}

TEST(Loader, L4AcceptsDuplicatePermutation) {
  const auto r = Rec(
      R"({"kind":"Transpose","params":{"perm":[1,1]},"inputs":[)"
      R"({"shape":[2,3],"dtype":"F32","src":{"random":1}}],"origin":"t"})");
  EXPECT_THROW(WrapInstance(r), Error);
  EXPECT_THROW(LoadRecord(r), Error);
  const Graph g = LoadRecord(r, BugSet().With(BugId::kL4));
  EXPECT_FALSE(graph::ValidateGraph(g).ok());
}

// Independent FNV-1a (32-bit offset basis would differ; this is the 64-bit
// variant written out longhand).
int Bucket(const std::string& s) {
  unsigned long long h = 14695981039346656037ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return static_cast<int>(h % 16);
}

TEST(Features, IdenticalRecordsIdenticalVectors) {
  for (size_t i = 0; i < 50; ++i)
    EXPECT_EQ(FeatureVector(Corpus()[i]), FeatureVector(ParseRecord(RecordToJson(Corpus()[i]))));
}

TEST(Features, RankDifferenceOnlyInRankSlot) {
  const auto a = Rec(
      R"({"kind":"ReLU","inputs":[{"shape":[5],"dtype":"F32","src":{"random":3}}],"origin":"r"})");
  const auto b = Rec(
      R"({"kind":"ReLU","inputs":[{"shape":[5,2],"dtype":"F32","src":{"random":3}}],"origin":"r"})");
  const auto va = FeatureVector(a), vb = FeatureVector(b);
  ASSERT_EQ(va.size(), vb.size());
  std::vector<int> diff;
  for (size_t i = 0; i < va.size(); ++i)
    if (va[i] != vb[i]) diff.push_back(static_cast<int>(i));
  EXPECT_EQ(diff, (std::vector<int>{RankSlot(0)}));
  EXPECT_EQ(va[RankSlot(0)], 2);
  EXPECT_EQ(vb[RankSlot(0)], 3);
}

TEST(Features, ConvStrideBuckets) {
  auto conv = [](int s) {
    return Rec(R"({"kind":"Conv2D","params":{"stride":[)" + std::to_string(s) + "," +
               std::to_string(s) +
               R"(]},"inputs":[{"shape":[1,1,5,5],"dtype":"F32","src":{"random":1}},)"
               R"({"shape":[1,1,3,3],"dtype":"F32","src":{"random":2}}],"origin":"c"})");
  };
  const int b1 = Bucket("[1,1]"), b2 = Bucket("[2,2]");
  ASSERT_NE(b1, b2);
  const auto v1 = FeatureVector(conv(1)), v2 = FeatureVector(conv(2));
  EXPECT_EQ(v1[ParamSlot("stride", b1)], 1);
  EXPECT_EQ(v1[ParamSlot("stride", b2)], 0);
  EXPECT_EQ(v2[ParamSlot("stride", b2)], 1);
  for (int i = 0; i < FeatureSize(); ++i)
    if (i != ParamSlot("stride", b1) && i != ParamSlot("stride", b2)) {
      EXPECT_EQ(v1[i], v2[i]) << i;
    }
}

TEST(Cluster, IdenticalSignaturesShareCluster) {
  std::vector<OperatorInstanceRecord> recs;
  for (int s = 0; s < 3; ++s)
    recs.push_back(Rec(R"({"kind":"ReLU","inputs":[{"shape":[4],"dtype":"F32","src":{"random":)" +
                       std::to_string(s) + R"(}}],"origin":"r"})"));
  const auto c = ClusterInstances(recs);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].members, (std::vector<int>{0, 1, 2}));
  recs.push_back(Rec(
      R"({"kind":"Conv2D","inputs":[{"shape":[1,1,5,5],"dtype":"F32","src":{"random":1}},)"
      R"({"shape":[1,1,3,3],"dtype":"F32","src":{"random":2}}],"origin":"c"})"));
  EXPECT_GE(ClusterInstances(recs).size(), 2u);
}

void ExpectPartition(const std::vector<Cluster>& clusters, size_t n) {
  std::vector<int> all;
  for (const auto& c : clusters) {
    EXPECT_FALSE(c.members.empty());
    all.insert(all.end(), c.members.begin(), c.members.end());
  }
  std::sort(all.begin(), all.end());
  ASSERT_EQ(all.size(), n);
  for (size_t i = 0; i < n; ++i) EXPECT_EQ(all[i], static_cast<int>(i));
}

TEST(Cluster, CorpusPartitionIsStable) {
  const auto a = ClusterInstances(Corpus());
  const auto b = ClusterInstances(Corpus());
  ExpectPartition(a, Corpus().size());
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].members, b[i].members);
  EXPECT_GT(a.size(), 15u);
  EXPECT_LT(a.size(), Corpus().size());
}

TEST(Cluster, ThresholdMergesMonotonically) {
  size_t prev = ClusterInstances(Corpus()).size();
  for (double t : {0.005, 0.01, 0.02, 0.05}) {
    const auto c = ClusterInstances(Corpus(), t);
    ExpectPartition(c, Corpus().size());
    EXPECT_LE(c.size(), prev) << t;
    prev = c.size();
  }
  EXPECT_LT(prev, ClusterInstances(Corpus()).size());
}

TEST(Prioritize, RoundRobinLargestFirst) {
  const std::vector<Cluster> clusters = {{{1}, {3}}, {{0}, {0, 1, 2}}};
  const auto order = Prioritize(clusters, 5);
  ASSERT_EQ(order.size(), 4u);
  auto cluster_of = [](int r) { return r == 3 ? 'B' : 'A'; };
  std::string pattern;
  for (int r : order) pattern += cluster_of(r);
  EXPECT_EQ(pattern, "ABAA");
}

TEST(Prioritize, SingleClusterIsSeededPermutation) {
  const std::vector<Cluster> one = {{{0}, {0, 1, 2, 3, 4, 5, 6, 7}}};
  const auto a = Prioritize(one, 9), b = Prioritize(one, 9);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, one[0].members);
}

TEST(Prioritize, PrefixCoversDistinctSignatures) {
  const auto clusters = ClusterInstances(Corpus());
  const auto order = OrderRecords(Corpus(), Order::kDiversity, 42);
  auto sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (size_t i = 0; i < sorted.size(); ++i) ASSERT_EQ(sorted[i], static_cast<int>(i));
  const auto cov = SignatureCoverage(clusters, order);
  for (size_t k = 1; k <= clusters.size(); ++k) EXPECT_EQ(cov[k - 1], static_cast<int>(k));
}

TEST(Prioritize, BeatsRandomOrdersAtEveryPrefix) {
  const auto clusters = ClusterInstances(Corpus());
  const auto div = SignatureCoverage(clusters, OrderRecords(Corpus(), Order::kDiversity, 42));
  for (uint64_t s = 0; s < 20; ++s) {
    const auto rnd = SignatureCoverage(clusters, OrderRecords(Corpus(), Order::kRandom, s));
    for (size_t k = 0; k < div.size(); ++k) ASSERT_GE(div[k], rnd[k]) << "seed " << s;
  }
  const auto fifo = SignatureCoverage(clusters, OrderRecords(Corpus(), Order::kFifo, 0));
  for (size_t k = 0; k < div.size(); ++k) ASSERT_GE(div[k], fifo[k]);
}

TEST(Prioritize, Deterministic) {
  EXPECT_EQ(OrderRecords(Corpus(), Order::kDiversity, 7),
            OrderRecords(Corpus(), Order::kDiversity, 7));
  EXPECT_EQ(ParseOrder("fifo"), Order::kFifo);
  EXPECT_FALSE(ParseOrder("lifo"));
}

}  // namespace
}  // namespace stagefuzz::migrate

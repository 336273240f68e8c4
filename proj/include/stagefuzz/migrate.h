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

// Migration of operator instances: a JSONL corpus of single-operator
// records is wrapped into one-node models, clustered by semantic signature
// and ordered so that early tests cover many distinct signatures.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stagefuzz/bugs.h"
#include "stagefuzz/graph.h"

namespace stagefuzz::migrate {

using graph::Graph;
using graph::OpKind;
using graph::Params;

inline constexpr int64_t kMaxExtent = 64;
inline constexpr int64_t kMaxRecordElements = 4096;

struct InputSpec {
  TensorType type;
  // Exactly one data source: a seed for RandomTensor or inline elements.
  std::optional<uint64_t> random_seed;
  std::vector<double> inline_data;

  friend bool operator==(const InputSpec&, const InputSpec&) = default;
};

struct OperatorInstanceRecord {
  OpKind kind = OpKind::kRelu;
  Params params;
  std::vector<InputSpec> inputs;
  std::string origin;

  friend bool operator==(const OperatorInstanceRecord&,
                         const OperatorInstanceRecord&) = default;
};

// One JSON object per record. Parsing throws Error(kSchemaViolation).
OperatorInstanceRecord ParseRecord(const std::string& json_line);
std::string RecordToJson(const OperatorInstanceRecord& r);

struct IngestResult {
  std::vector<OperatorInstanceRecord> records;
  int skipped = 0;
  std::vector<std::string> problems;  // "line N: ..."
  std::vector<std::string> warnings;
};

// Throws Error(kCorpusUnreadable) when the file cannot be opened.
IngestResult IngestCorpus(const std::string& path);
IngestResult IngestText(const std::string& text);

// Input k becomes Input "in<k>" (random source) or a Constant (inline
// data); the operator node is the sole output. Throws Error(kShapeMismatch)
// or Error(kInvalidParam) for records that violate the kind's shape rule.
Graph WrapInstance(const OperatorInstanceRecord& r);

// Data for every Input of WrapInstance(r).
graph::Bindings RecordBindings(const OperatorInstanceRecord& r);

// The model frontend: turns a record into a graph the way a framework
// importer would. Identical to WrapInstance unless loader bugs are enabled.
Graph LoadRecord(const OperatorInstanceRecord& r, const BugSet& bugs = {});

// Synthesized corpus stratified over kinds and parameters, including
// shape-invalid negative records.
std::vector<OperatorInstanceRecord> GenerateCorpus(uint64_t seed, int count);

// --- feature vectors and clustering ---------------------------------------

inline constexpr int kParamBuckets = 16;
inline constexpr int kInputSlots = 4;

using FeatureVec = std::vector<int>;

// Parameter names with a bucket block in the vector, in slot order.
const std::vector<std::string>& FeatureParamNames();
// FNV-1a of the parameter's canonical text, modulo kParamBuckets.
int ParamBucket(const graph::ParamValue& value);

// [kind one-hot | per-param bucket one-hot | input ranks (rank+1, 0 when
// absent) | input dtype tags (code+1)].
FeatureVec FeatureVector(const OperatorInstanceRecord& r);

// Slot layout.
int KindSlot(OpKind kind);
int ParamSlot(const std::string& name, int bucket);
int RankSlot(int input);
int DTypeSlot(int input);
int FeatureSize();

struct Cluster {
  FeatureVec signature;
  std::vector<int> members;  // record indices, ascending
};

// Exact bucketing on (kind, param buckets, sorted input ranks); a positive
// threshold additionally merges clusters whose signatures are within that
// normalized Hamming distance (single linkage). Cluster order follows the
// first member.
std::vector<Cluster> ClusterInstances(const std::vector<OperatorInstanceRecord>& records,
                                      double distance_threshold = 0.0);

FeatureVec ClusterSignature(const OperatorInstanceRecord& r);
double HammingDistance(const FeatureVec& a, const FeatureVec& b);

enum class Order { kDiversity, kRandom, kFifo };
std::optional<Order> ParseOrder(const std::string& name);

// Round-robin over clusters (largest first, ties by first member), members
// shuffled per cluster with `seed`.
std::vector<int> Prioritize(const std::vector<Cluster>& clusters, uint64_t seed);

std::vector<int> OrderRecords(const std::vector<OperatorInstanceRecord>& records,
                              Order order, uint64_t seed);

// Number of distinct cluster signatures among the first k entries, for
// k = 1..order.size().
std::vector<int> SignatureCoverage(const std::vector<Cluster>& clusters,
                                   const std::vector<int>& order);

}  // namespace stagefuzz::migrate

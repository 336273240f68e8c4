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

// Loop-IR seed generation from a cross-checked constraint catalog, mutation
// rules read from pass documentation, and semantics-preserving mutations
// aimed at the low-level passes.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "stagefuzz/ll_passes.h"
#include "stagefuzz/loop_ir.h"

namespace stagefuzz::harmony {

using loop::AnnKind;
using loop::Annotation;
using loop::LoopProgram;
using loop::Stmt;

// --- provider --------------------------------------------------------------

// External suggestion service. One JSON object per line in each direction:
// {"op":"seed"|"rules","template":..,"constraints":..,"seed":N} answered by
// {"text":..}. Calls are serialized; failures return nullopt and describe
// the incident.
class Provider {
 public:
  virtual ~Provider() = default;
  std::optional<std::string> Request(const std::string& op, const std::string& subject,
                                     const std::string& constraints, uint64_t seed,
                                     std::string* incident);

 protected:
  // Sends one request line, returns one response line.
  virtual std::optional<std::string> Exchange(const std::string& line,
                                              std::string* incident) = 0;

 private:
  std::mutex mu_;
};

inline constexpr std::chrono::milliseconds kProviderTimeout{10000};

// "http://host:port/path" selects the HTTP transport; anything else is a
// shell command whose stdin/stdout carry the protocol.
std::unique_ptr<Provider> MakeProvider(const std::string& spec,
                                       std::chrono::milliseconds timeout = kProviderTimeout);

// --- catalog ---------------------------------------------------------------

enum class Template { kElementwise, kReduction, kMatmul, kConv, kStencil };
const std::vector<Template>& AllTemplates();
std::string_view TemplateName(Template t);
std::optional<Template> ParseTemplate(std::string_view name);

enum class Source { kBuiltin, kDocs, kProvider };
std::string_view SourceName(Source s);

std::string_view AnnKindName(AnnKind k);  // "parallel", "vectorize", ...
std::optional<AnnKind> ParseAnnKind(std::string_view name);

struct CatalogEntry {
  Template tmpl = Template::kElementwise;
  int64_t min_extent = 1;
  int64_t max_extent = 1;
  std::set<DType> dtypes;
  std::set<int> lanes;  // legal Vectorize widths
  // annotations[d]: kinds that may attach to a loop at nesting depth d.
  // Deeper loops use the last row.
  std::vector<std::set<AnnKind>> annotations;
  std::set<Source> sources;
  bool verified = false;  // agreed by at least two sources
  bool disputed = false;  // some source contradicts the builtin facts
  std::vector<std::string> conflicts;

  bool Allows(int depth, AnnKind kind) const;
};

struct Catalog {
  std::map<Template, CatalogEntry> entries;
  std::vector<std::string> problems;  // DocParseError messages, "file: ..."

  // Non-disputed entry or nullptr.
  const CatalogEntry* Usable(Template t) const;
  int VerifiedCount() const;
};

Catalog BuiltinCatalog();

// Merges docs front matter (<docs_dir>/operators/*.md) and, when given, a
// provider cache (JSON array of entries) into the builtin catalog.
Catalog LoadCatalog(const std::string& docs_dir, const std::string& provider_cache = "");

// Partial facts from one source; absent fields are not compared.
struct CatalogFacts {
  Template tmpl = Template::kElementwise;
  std::optional<std::pair<int64_t, int64_t>> extent;
  std::optional<std::set<DType>> dtypes;
  std::optional<std::set<int>> lanes;
  std::optional<std::vector<std::set<AnnKind>>> annotations;
};
void MergeFacts(Catalog& catalog, const CatalogFacts& facts, Source source);

// --- seeds -----------------------------------------------------------------

struct Seed {
  LoopProgram program;
  std::optional<Template> tmpl;  // absent for hand-written seeds
  std::string origin;            // "builtin:<template>", "provider:..", "file:.."
};

struct SeedReport {
  std::vector<std::string> incidents;  // provider fallbacks
};

// Annotation-free program drawn from the entry's legal ranges. With a
// provider, its response is used when it parses, validates and respects
// the entry; otherwise the builtin generator runs.
Seed GenerateSeed(const Catalog& catalog, Template t, uint64_t seed,
                  Provider* provider = nullptr, SeedReport* report = nullptr);

// `per_template` generated seeds per usable template plus every *.lir file
// in `seed_dir` with annotations stripped, deduplicated by canonical hash.
std::vector<Seed> BuildSeedPool(const Catalog& catalog, int per_template, uint64_t seed,
                                const std::string& seed_dir = "",
                                Provider* provider = nullptr, SeedReport* report = nullptr);

// Hash of the program text with the name blanked.
uint64_t ProgramHash(const LoopProgram& p);

// --- rules -----------------------------------------------------------------

struct Predicate {
  enum Kind {
    kInnermost,
    kOutermost,
    kSerial,
    kConstantBounds,
    kNoDependence,
    kDependence,
    kTripMod,     // trip % k == 0
    kTripNotMod,  // trip % k != 0
    kTripGreater,
    kTripAtLeast,
    kF32AddStore,  // a direct F32 store of add(x, y) with no mul operand
    kCacheCandidate,
  };
  Kind kind = kInnermost;
  int64_t k = 0;
  std::string text;

  friend bool operator==(const Predicate& a, const Predicate& b) {
    return a.kind == b.kind && a.k == b.k;
  }
};
Predicate ParsePredicate(const std::string& text);  // Error(kDocParseError)

struct Action {
  enum Kind { kAttach, kSplitSwap, kExposeFma, kCachePipeline };
  Kind kind = kAttach;
  Annotation ann;  // kAttach
  int factor = 0;  // split factor / pipeline depth
  std::string text;
};
Action ParseAction(const std::string& text);  // Error(kDocParseError)

struct MutationRule {
  std::string id;
  ll::LLPassId target = ll::LLPassId::kUnrollExpand;
  std::string trigger;  // prose from the doc
  std::vector<Predicate> guard;
  Action action;
  std::string example;
  std::string provenance;  // "<file>#<section>" or "provider"
};

struct RuleReport {
  std::vector<MutationRule> rules;
  std::vector<std::string> problems;  // DocParseError, "file: ..."
  std::vector<std::string> rejected;   // RuleRejected, with provenance
  std::vector<std::string> incidents;  // provider unavailable or malformed
};

// Parses one doc: YAML front matter with `pass`, `section` and `triggers`,
// each trigger carrying id, trigger, precondition, action and example.
std::vector<MutationRule> ParseRuleDoc(const std::string& text, const std::string& file);

// Rules from every <docs_dir>/llpasses/*.md. A provider may propose more
// rules per doc (same YAML trigger list); they are kept only if they apply
// to one of `probe_seeds` and survive the 3-input probe.
RuleReport ExtractRules(const std::string& docs_dir, Provider* provider = nullptr,
                        const std::vector<Seed>& probe_seeds = {});

// --- mutation --------------------------------------------------------------

inline constexpr int kProbeInputs = 3;

// Loops where the guard holds and the action can apply, as statement paths.
std::vector<loop::StmtPath> MatchSites(const LoopProgram& p, const MutationRule& rule,
                                       const CatalogEntry* policy = nullptr);

struct MutationResult {
  LoopProgram program;
  loop::StmtPath site;
};

// Applies the rule at a random matching site, validates the result and
// probes it against `p` on kProbeInputs random inputs at level 0.
// Throws Error(kMutationInapplicable) when no site matches and
// Error(kRuleRejected) when the probe disagrees.
MutationResult Mutate(const LoopProgram& p, const MutationRule& rule, std::mt19937_64& rng,
                      const CatalogEntry* policy = nullptr);

// Level-0 agreement on kProbeInputs bindings drawn from `seed`.
bool ProbeEquivalent(const LoopProgram& a, const LoopProgram& b, uint64_t seed);

// --- stream ----------------------------------------------------------------

inline constexpr int kMaxStack = 3;

// Test i is a pure function of (seed, i): a pool seed with 1..kMaxStack
// stacked mutations, or the bare seed when rules are disabled.
class MutationStream {
 public:
  MutationStream(std::vector<Seed> pool, std::vector<MutationRule> rules, Catalog catalog,
                 uint64_t seed, bool use_rules = true);

  struct Test {
    LoopProgram program;
    int seed_index = 0;
    std::vector<std::string> applied;  // rule ids
    std::string lineage;
  };
  Test Get(int64_t index) const;

  const std::vector<Seed>& pool() const { return pool_; }

 private:
  std::vector<Seed> pool_;
  std::vector<MutationRule> rules_;
  Catalog catalog_;
  uint64_t seed_;
  bool use_rules_;
};

}  // namespace stagefuzz::harmony

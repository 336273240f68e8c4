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

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "stagefuzz/error.h"
#include "stagefuzz/harmony.h"
#include "stagefuzz/hash.h"
#include "stagefuzz/hl_passes.h"
#include "stagefuzz/ll_passes.h"
#include "stagefuzz/synth.h"

namespace stagefuzz::oracle {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view VerdictName(VerdictTag tag) {
  switch (tag) {
    case VerdictTag::kPass: return "Pass";
    case VerdictTag::kCrash: return "Crash";
    case VerdictTag::kMismatch: return "Mismatch";
    case VerdictTag::kInvalidRejection: return "InvalidRejection";
    case VerdictTag::kMissedRejection: return "MissedRejection";
  }
  return "?";
}

std::optional<VerdictTag> ParseVerdict(std::string_view name) {
  for (VerdictTag t : {VerdictTag::kPass, VerdictTag::kCrash, VerdictTag::kMismatch,
                       VerdictTag::kInvalidRejection, VerdictTag::kMissedRejection})
    if (VerdictName(t) == name) return t;
  return std::nullopt;
}

std::string_view StageKey(Stage stage) {
  switch (stage) {
    case Stage::kLoader: return "loader";
    case Stage::kHighLevel: return "hlopt";
    case Stage::kLowLevel: return "llopt";
  }
  return "?";
}

std::optional<Stage> ParseStageKey(std::string_view name) {
  for (Stage s : {Stage::kLoader, Stage::kHighLevel, Stage::kLowLevel})
    if (StageKey(s) == name) return s;
  return std::nullopt;
}

std::string DefaultDataDir() { return STAGEFUZZ_DATA_DIR; }

// --- verdicts --------------------------------------------------------------

namespace {

struct Difference {
  int output = -1;
  Divergence divergence;
  std::string message;
};

std::string Fixed(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::optional<Difference> Compare(const std::vector<TensorValue>& want,
                                  const std::vector<TensorValue>& got, Tolerance tol) {
  if (want.size() != got.size())
    return Difference{-1, {}, "output count " + std::to_string(got.size()) + " instead of " +
                                  std::to_string(want.size())};
  for (size_t k = 0; k < want.size(); ++k) {
    const Divergence d = CompareTensors(want[k], got[k], tol);
    if (d.equal) continue;
    const std::string at = " at output " + std::to_string(k);
    std::string msg;
    if (d.dtype_mismatch) {
      msg = "dtype mismatch" + at;
    } else if (d.shape_mismatch) {
      msg = "shape mismatch" + at;
    } else {
      msg = "value mismatch" + at + " (max abs " + Fixed(d.max_abs) + ", max rel " +
            Fixed(d.max_rel) + ", first index " + std::to_string(d.first_index) + ")";
    }
    return Difference{static_cast<int>(k), d, msg};
  }
  return std::nullopt;
}

Verdict Mismatch(const Difference& d, std::string context) {
  Verdict v;
  v.tag = VerdictTag::kMismatch;
  v.message = d.message;
  v.output = d.output;
  v.divergence = d.divergence;
  v.context = std::move(context);
  return v;
}

Verdict Crash(std::string message, std::string context) {
  Verdict v;
  v.tag = VerdictTag::kCrash;
  v.message = std::move(message);
  v.context = std::move(context);
  return v;
}

std::string Runtime(const Error& e) { return "runtime:" + std::string(ErrorKindName(e.kind())); }

// Pass name leading a pass-internal error message.
template <typename Parse>
std::string PassPrefix(const std::string& detail, Parse parse) {
  size_t end = 0;
  while (end < detail.size() && std::isalnum(static_cast<unsigned char>(detail[end]))) ++end;
  const std::string head = detail.substr(0, end);
  return parse(head) ? head : "unknown";
}

std::vector<TensorValue> RunLowered(const graph::Graph& g, const loop::LoopBindings& inputs) {
  const loop::LoopProgram p = loop::LowerGraph(g);
  return loop::OrderedOutputs(p, loop::InterpretLoop(p, inputs));
}

Verdict LoaderTest(const migrate::OperatorInstanceRecord& r, const BugSet& bugs) {
  const std::string kind(graph::OpKindName(r.kind));
  std::optional<graph::Graph> ref;
  try {
    ref = migrate::WrapInstance(r);
  } catch (const Error&) {
  }
  std::optional<graph::Graph> loaded;
  std::string rejection;
  try {
    loaded = migrate::LoadRecord(r, bugs);
  } catch (const Error& e) {
    rejection = e.what();
  }
  if (!ref) {
    if (!loaded) return {};
    Verdict v;
    v.tag = VerdictTag::kMissedRejection;
    v.message = "shape-invalid record accepted";
    v.context = kind;
    return v;
  }
  if (!loaded) {
    Verdict v;
    v.tag = VerdictTag::kInvalidRejection;
    v.message = "valid record rejected: " + rejection;
    v.context = kind;
    return v;
  }

  const auto inputs = migrate::RecordBindings(r);
  std::vector<TensorValue> want;
  try {
    want = graph::InterpretGraph(*ref, inputs);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNumericDomain) {
      Verdict v;
      v.skipped = true;
      return v;
    }
    return Crash(std::string("reference: ") + e.what(), kind);
  }
  const auto report = graph::ValidateGraph(*loaded);
  if (!report.ok()) return Crash("loader produced an invalid graph", kind);
  std::vector<TensorValue> got;
  try {
    got = RunLowered(*loaded, inputs);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kLoweringUnsupported) return Crash(e.what(), "Lowering");
    return Crash(Runtime(e), kind);
  }
  if (auto d = Compare(want, got, kDefaultTolerance)) return Mismatch(*d, kind);
  return {};
}

// First pipeline step whose graph throws or disagrees with `want`.
void LocalizeHl(const graph::Graph& g, const graph::Bindings& inputs,
                const std::vector<TensorValue>& want, const BugSet& bugs, Verdict& v) {
  const auto run = hl::RunPipeline(2, g, bugs, /*record_steps=*/true);
  std::string last_rule;
  for (const auto& step : run.steps) {
    for (const auto& t : step.traces)
      if (t.fired) last_rule = t.rule_id;
    bool diverges = false;
    try {
      diverges = Compare(want, graph::InterpretGraph(step.after, inputs), kDefaultTolerance)
                     .has_value();
    } catch (const Error&) {
      diverges = true;
    }
    if (diverges) {
      v.context = std::string(hl::PassName(step.pass));
      v.last_rule = last_rule;
      return;
    }
  }
  v.context = "unknown";
}

Verdict HlTest(const graph::Graph& g, uint64_t data_seed, const BugSet& bugs) {
  const auto inputs = graph::RandomBindings(g, data_seed);
  std::vector<TensorValue> want;
  try {
    want = graph::InterpretGraph(g, inputs);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNumericDomain) {
      Verdict v;
      v.skipped = true;
      return v;
    }
    return Crash(std::string("reference: ") + e.what(), "reference");
  }
  hl::PipelineResult run;
  try {
    run = hl::RunPipeline(2, g, bugs);
  } catch (const Error& e) {
    return Crash(e.detail(), PassPrefix(e.detail(), hl::ParsePassId));
  }
  std::set<std::string> fired;
  for (const auto& t : run.traces)
    if (t.fired) fired.insert(t.rule_id);

  Verdict v;
  try {
    if (auto d = Compare(want, graph::InterpretGraph(run.graph, inputs), kDefaultTolerance))
      v = Mismatch(*d, "");
  } catch (const Error& e) {
    v = Crash(Runtime(e), "");
  }
  if (v.tag != VerdictTag::kPass) LocalizeHl(g, inputs, want, bugs, v);
  v.fired = std::move(fired);
  return v;
}

std::map<std::string, TensorValue> RunTarget(const loop::LoopProgram& p,
                                             const loop::LoopBindings& inputs, bool lockstep) {
  loop::InterpOptions o;
  o.lockstep_vectorize = lockstep;
  return loop::InterpretLoop(p, inputs, o);
}

std::optional<Difference> CompareLoop(const loop::LoopProgram& p,
                                      const std::map<std::string, TensorValue>& want,
                                      const std::map<std::string, TensorValue>& got,
                                      Tolerance tol) {
  return Compare(loop::OrderedOutputs(p, want), loop::OrderedOutputs(p, got), tol);
}

void LocalizeLl(const loop::LoopProgram& p, const loop::LoopBindings& inputs,
                const std::map<std::string, TensorValue>& want, const BugSet& bugs, Verdict& v) {
  const auto run = ll::RunLLPipeline(2, p, bugs, /*record_steps=*/true);
  // Vector loops only run in lock step once VectorizeLegalize has vetted them.
  bool legalized = false;
  std::string last_rule;
  for (const auto& step : run.steps) {
    legalized |= step.pass == ll::LLPassId::kVectorizeLegalize;
    for (const auto& t : step.traces)
      if (t.fired) last_rule = t.rule_id;
    bool diverges = false;
    try {
      diverges = CompareLoop(p, want, RunTarget(step.after, inputs, legalized),
                             ll::ToleranceFor(step.after))
                     .has_value();
    } catch (const Error&) {
      diverges = true;
    }
    if (diverges) {
      v.context = std::string(ll::LLPassName(step.pass));
      v.last_rule = last_rule;
      return;
    }
  }
  v.context = "unknown";
}

Verdict LlTest(const loop::LoopProgram& p, uint64_t data_seed, const BugSet& bugs) {
  const auto inputs = loop::RandomLoopBindings(p, data_seed);
  std::map<std::string, TensorValue> want;
  try {
    want = loop::InterpretLoop(loop::StripAnnotations(p), inputs);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNumericDomain) {
      Verdict v;
      v.skipped = true;
      return v;
    }
    return Crash(std::string("reference: ") + e.what(), "reference");
  }
  ll::LLPipelineResult run;
  try {
    run = ll::RunLLPipeline(2, p, bugs);
  } catch (const Error& e) {
    return Crash(e.detail(), PassPrefix(e.detail(), ll::ParseLLPassId));
  }
  std::set<std::string> fired;
  for (const auto& t : run.traces)
    if (t.fired) fired.insert(t.rule_id);

  Verdict v;
  try {
    if (auto d = CompareLoop(p, want, RunTarget(run.program, inputs, true),
                             ll::ToleranceFor(run.program)))
      v = Mismatch(*d, "");
  } catch (const Error& e) {
    v = Crash(Runtime(e), "");
  }
  if (v.tag != VerdictTag::kPass) LocalizeLl(p, inputs, want, bugs, v);
  v.fired = std::move(fired);
  return v;
}

}  // namespace

Verdict DiffTest(const TestCase& tc, const BugSet& bugs) {
  try {
    switch (tc.stage) {
      case Stage::kLoader:
        return LoaderTest(std::get<migrate::OperatorInstanceRecord>(tc.payload), bugs);
      case Stage::kHighLevel:
        return HlTest(std::get<graph::Graph>(tc.payload), tc.data_seed, bugs);
      case Stage::kLowLevel:
        return LlTest(std::get<loop::LoopProgram>(tc.payload), tc.data_seed, bugs);
    }
  } catch (const std::bad_variant_access&) {
    return Crash("payload does not match stage", "framework");
  } catch (const std::exception& e) {
    return Crash(std::string("unexpected: ") + e.what(), "framework");
  }
  return {};
}

std::string NormalizeMessage(const std::string& message) {
  // Numbers (integers, decimals, exponents, inf/nan) carry no identity.
  static const std::regex kNumber(
      R"(([-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?)|\b-?(inf|nan)\b)");
  const std::string stripped = std::regex_replace(message, kNumber, "");
  std::string out;
  int depth = 0;
  for (char c : stripped) {
    if (c == '[') {
      if (depth++ == 0) out += "[]";
      continue;
    }
    if (c == ']') {
      depth = std::max(0, depth - 1);
      continue;
    }
    if (depth > 0) continue;
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!out.empty() && out.back() != ' ') out += ' ';
      continue;
    }
    out += c;
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string DedupKey(const Verdict& v, Stage stage) {
  return std::string(StageKey(stage)) + "|" + v.context + "|" +
         std::string(VerdictName(v.tag)) + "|" + NormalizeMessage(v.message);
}

// --- test files ------------------------------------------------------------

std::string PayloadExtension(Stage stage) {
  switch (stage) {
    case Stage::kLoader: return ".rec";
    case Stage::kHighLevel: return ".graph";
    case Stage::kLowLevel: return ".lir";
  }
  return "";
}

std::string SerializePayload(const Payload& payload) {
  if (const auto* g = std::get_if<graph::Graph>(&payload)) return graph::SerializeGraph(*g);
  if (const auto* p = std::get_if<loop::LoopProgram>(&payload)) return loop::SerializeLoop(*p);
  return migrate::RecordToJson(std::get<migrate::OperatorInstanceRecord>(payload)) + "\n";
}

std::string WriteTestFile(const TestCase& tc, const std::map<std::string, std::string>& header) {
  std::map<std::string, std::string> h = header;
  h["stage"] = std::string(StageKey(tc.stage));
  h["data-seed"] = std::to_string(tc.data_seed);
  h["test-id"] = std::to_string(tc.id);
  if (!tc.lineage.empty()) h["lineage"] = tc.lineage;
  std::string out;
  for (const auto& [k, v] : h) out += "# " + k + ": " + v + "\n";
  return out + SerializePayload(tc.payload);
}

TestFile ReadTestFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kTestLoadError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  TestFile f;
  std::istringstream lines(text);
  std::string line, body;
  while (std::getline(lines, line)) {
    if (line.rfind("# ", 0) == 0) {
      const size_t colon = line.find(": ");
      if (colon != std::string::npos) f.header[line.substr(2, colon - 2)] = line.substr(colon + 2);
      continue;
    }
    body += line + "\n";
  }
  const std::string ext = fs::path(path).extension().string();
  try {
    if (ext == ".graph") {
      f.test.stage = Stage::kHighLevel;
      f.test.payload = graph::ParseGraph(text);
    } else if (ext == ".lir") {
      f.test.stage = Stage::kLowLevel;
      f.test.payload = loop::ParseLoop(text);
    } else if (ext == ".rec") {
      f.test.stage = Stage::kLoader;
      std::istringstream rec(body);
      std::string first;
      while (std::getline(rec, first) && first.find_first_not_of(" \t\r") == std::string::npos) {
      }
      f.test.payload = migrate::ParseRecord(first);
    } else {
      throw Error(ErrorKind::kTestLoadError, "unknown test file type " + ext);
    }
    if (auto it = f.header.find("data-seed"); it != f.header.end())
      f.test.data_seed = std::stoull(it->second);
    if (auto it = f.header.find("test-id"); it != f.header.end())
      f.test.id = std::stoll(it->second);
    if (auto it = f.header.find("lineage"); it != f.header.end()) f.test.lineage = it->second;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kTestLoadError) throw;
    throw Error(ErrorKind::kTestLoadError, path + ": " + e.what());
  } catch (const std::logic_error& e) {
    throw Error(ErrorKind::kTestLoadError, path + ": bad header value");
  }
  return f;
}

std::vector<RegressionCase> LoadRegressions(const std::string& dir) {
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file()) files.push_back(entry.path());
  if (ec) throw Error(ErrorKind::kTestLoadError, "cannot list " + dir);
  std::sort(files.begin(), files.end());
  std::vector<RegressionCase> out;
  for (const auto& path : files) {
    const std::string ext = path.extension().string();
    if (ext != ".graph" && ext != ".lir" && ext != ".rec") continue;
    TestFile f = ReadTestFile(path.string());
    auto it = f.header.find("bug");
    if (it == f.header.end()) continue;
    const BugSet named = BugSet::Parse(it->second);
    const auto enabled = named.Enabled();
    if (enabled.size() != 1)
      throw Error(ErrorKind::kTestLoadError, path.string() + ": header must name one bug");
    out.push_back({enabled[0], path.filename().string(), std::move(f.test)});
  }
  return out;
}

std::vector<RegressionResult> RunRegressions(const std::string& dir) {
  std::vector<RegressionResult> out;
  for (auto& c : LoadRegressions(dir)) {
    RegressionResult r{c, DiffTest(c.test), DiffTest(c.test, BugSet().With(c.bug))};
    out.push_back(std::move(r));
  }
  return out;
}

// --- campaigns -------------------------------------------------------------

struct TestSource::Impl {
  CampaignConfig config;
  std::vector<Stage> stages;
  std::vector<migrate::OperatorInstanceRecord> records;
  std::vector<int> order;
  std::unique_ptr<synth::SynthesisStream> synth;
  std::unique_ptr<harmony::MutationStream> mutate;
  std::vector<std::string> incidents;
};

namespace {

std::string Require(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec))
    throw Error(ErrorKind::kConfigError, "missing data: " + path.string());
  return path.string();
}

}  // namespace

TestSource::TestSource(const CampaignConfig& config) : impl_(std::make_unique<Impl>()) {
  Impl& m = *impl_;
  m.config = config;
  if (config.stage == "all") {
    m.stages = {Stage::kLoader, Stage::kHighLevel, Stage::kLowLevel};
  } else if (auto s = ParseStageKey(config.stage)) {
    m.stages = {*s};
  } else {
    throw Error(ErrorKind::kConfigError, "unknown stage '" + config.stage + "'");
  }
  const fs::path data = config.data_dir.empty() ? DefaultDataDir() : config.data_dir;
  const uint64_t seed = config.seed;
  auto uses = [&](Stage s) { return std::count(m.stages.begin(), m.stages.end(), s) > 0; };

  if (uses(Stage::kLoader)) {
    try {
      const fs::path corpus =
          config.corpus.empty() ? data / "corpus" / "operators.jsonl" : fs::path(config.corpus);
      auto ingest = migrate::IngestCorpus(Require(corpus));
      m.records = std::move(ingest.records);
      for (const auto& p : ingest.problems) m.incidents.push_back("corpus: " + p);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kConfigError) throw;
      throw Error(ErrorKind::kConfigError, e.what());
    }
    if (m.records.empty()) throw Error(ErrorKind::kConfigError, "corpus has no records");
    m.order = migrate::OrderRecords(m.records, config.order, seed);
  }
  if (uses(Stage::kHighLevel)) {
    std::vector<synth::Pattern> patterns;
    if (config.guided) patterns = synth::LoadLibrary(Require(data / "patterns.plib"));
    m.synth = std::make_unique<synth::SynthesisStream>(std::move(patterns), seed, config.guided);
  }
  if (uses(Stage::kLowLevel)) {
    const std::string docs = Require(data / "docs");
    std::unique_ptr<harmony::Provider> provider;
    if (!config.provider.empty()) provider = harmony::MakeProvider(config.provider);
    harmony::Catalog catalog = harmony::LoadCatalog(docs);
    for (const auto& p : catalog.problems) m.incidents.push_back("catalog: " + p);
    harmony::SeedReport seeds;
    auto pool = harmony::BuildSeedPool(catalog, 8, seed, Require(data / "seeds"), provider.get(),
                                       &seeds);
    for (const auto& p : seeds.incidents) m.incidents.push_back("provider: " + p);
    std::vector<harmony::MutationRule> rules;
    if (config.guided) {
      auto report = harmony::ExtractRules(docs, provider.get(), pool);
      for (const auto& p : report.problems) m.incidents.push_back("rules: " + p);
      for (const auto& p : report.rejected) m.incidents.push_back("rules: " + p);
      for (const auto& p : report.incidents) m.incidents.push_back("provider: " + p);
      rules = std::move(report.rules);
    }
    m.mutate = std::make_unique<harmony::MutationStream>(std::move(pool), std::move(rules),
                                                         std::move(catalog), seed, config.guided);
  }
}

TestSource::~TestSource() = default;

const std::vector<std::string>& TestSource::incidents() const { return impl_->incidents; }

TestCase TestSource::Get(int64_t index) {
  Impl& m = *impl_;
  const auto n = static_cast<int64_t>(m.stages.size());
  const int64_t k = index / n;
  TestCase tc;
  tc.id = index;
  tc.stage = m.stages[static_cast<size_t>(index % n)];
  tc.data_seed = Mix(m.config.seed ^ Mix(static_cast<uint64_t>(index)));
  switch (tc.stage) {
    case Stage::kLoader: {
      const int r = m.order[static_cast<size_t>(k % static_cast<int64_t>(m.order.size()))];
      tc.payload = m.records[static_cast<size_t>(r)];
      tc.lineage = "corpus:" + std::to_string(r) + ":" + m.records[static_cast<size_t>(r)].origin;
      break;
    }
    case Stage::kHighLevel: {
      auto t = m.synth->Get(k);
      tc.payload = std::move(t.graph);
      tc.lineage = std::move(t.lineage);
      break;
    }
    case Stage::kLowLevel: {
      auto t = m.mutate->Get(k);
      tc.payload = std::move(t.program);
      tc.lineage = std::move(t.lineage);
      break;
    }
  }
  return tc;
}

int64_t CampaignReport::NonPass() const {
  int64_t n = 0;
  for (const auto& [tag, count] : verdicts)
    if (tag != VerdictTag::kPass) n += count;
  return n;
}

namespace {

json VerdictCounts(const std::map<VerdictTag, int64_t>& counts) {
  json j = json::object();
  for (VerdictTag t : {VerdictTag::kPass, VerdictTag::kCrash, VerdictTag::kMismatch,
                       VerdictTag::kInvalidRejection, VerdictTag::kMissedRejection}) {
    auto it = counts.find(t);
    j[std::string(VerdictName(t))] = it == counts.end() ? 0 : it->second;
  }
  return j;
}

json HashedBody(const CampaignReport& r) {
  json j;
  const CampaignConfig& c = r.config;
  json bugs = json::array();
  for (BugId b : c.bugs.Enabled()) bugs.push_back(std::string(BugName(b)));
  const char* order = c.order == migrate::Order::kDiversity ? "diversity"
                      : c.order == migrate::Order::kRandom  ? "random"
                                                            : "fifo";
  j["config"] = {{"stage", c.stage}, {"budget", c.budget},  {"seed", c.seed},
                 {"bugs", bugs},     {"order", order},      {"guided", c.guided},
                 {"provider", c.provider}, {"corpus", c.corpus}};
  j["tests_run"] = r.tests_run;
  j["skipped"] = r.skipped;
  j["verdicts"] = VerdictCounts(r.verdicts);
  j["stages"] = json::object();
  for (const auto& [stage, counts] : r.per_stage)
    j["stages"][std::string(StageKey(stage))] = VerdictCounts(counts);
  j["coverage"] = {{"hl_rules", r.hl_rules},
                   {"ll_rules", r.ll_rules},
                   {"hl_rule_count", r.hl_rules.size()},
                   {"ll_rule_count", r.ll_rules.size()}};
  j["failures"] = json::array();
  for (const auto& f : r.failures) {
    j["failures"].push_back({{"signature", f.signature},
                             {"stage", std::string(StageKey(f.stage))},
                             {"context", f.context},
                             {"verdict", std::string(VerdictName(f.tag))},
                             {"message", f.message},
                             {"first_hit", f.first_hit},
                             {"count", f.count},
                             {"bugs", f.bugs},
                             {"artifact", f.artifact}});
  }
  j["incidents"] = r.incidents;
  return j;
}

}  // namespace

std::string CampaignReport::ToJson() const {
  json j = HashedBody(*this);
  j["config"]["jobs"] = config.jobs;
  j["wall_time_s"] = wall_seconds;
  j["hash"] = hash;
  return j.dump(2) + "\n";
}

CampaignReport RunCampaign(const CampaignConfig& config) {
  if (config.budget < 0) throw Error(ErrorKind::kConfigError, "negative budget");
  if (config.jobs < 1 || config.jobs > 256)
    throw Error(ErrorKind::kConfigError, "jobs must be in [1, 256]");
  const auto start = std::chrono::steady_clock::now();
  TestSource source(config);

  const auto budget = static_cast<size_t>(config.budget);
  std::vector<Verdict> verdicts(budget);
  std::vector<Stage> stages(budget);
  std::atomic<int64_t> next{0};
  auto work = [&] {
    for (int64_t i; (i = next++) < config.budget;) {
      const auto at = static_cast<size_t>(i);
      try {
        const TestCase tc = source.Get(i);
        stages[at] = tc.stage;
        verdicts[at] = DiffTest(tc, config.bugs);
      } catch (const std::exception& e) {
        verdicts[at] = Crash(std::string("generator: ") + e.what(), "framework");
      }
    }
  };
  std::vector<std::thread> workers;
  for (int j = 1; j < config.jobs; ++j) workers.emplace_back(work);
  work();
  for (auto& w : workers) w.join();

  CampaignReport report;
  report.config = config;
  report.tests_run = config.budget;
  report.incidents = source.incidents();
  std::map<std::string, size_t> by_signature;
  for (size_t i = 0; i < budget; ++i) {
    const Verdict& v = verdicts[i];
    ++report.verdicts[v.tag];
    ++report.per_stage[stages[i]][v.tag];
    report.skipped += v.skipped;
    auto& cover = stages[i] == Stage::kLowLevel ? report.ll_rules : report.hl_rules;
    if (stages[i] != Stage::kLoader) cover.insert(v.fired.begin(), v.fired.end());
    if (v.tag == VerdictTag::kPass) continue;
    const std::string key = DedupKey(v, stages[i]);
    auto [it, fresh] = by_signature.emplace(key, report.failures.size());
    if (fresh) {
      FailureRecord f;
      f.signature = key;
      f.stage = stages[i];
      f.context = v.context;
      f.tag = v.tag;
      f.message = v.message;
      f.first_hit = static_cast<int64_t>(i);
      report.failures.push_back(std::move(f));
    }
    ++report.failures[it->second].count;
  }

  const bool write = !config.out_dir.empty();
  if (write) fs::create_directories(fs::path(config.out_dir) / "artifacts");
  for (auto& f : report.failures) {
    const TestCase tc = source.Get(f.first_hit);
    const auto enabled = config.bugs.Enabled();
    // Bugs reproducing the signature alone; failing that, bugs that fail the
    // test alone (the signature then comes from an interaction).
    std::vector<std::string> exact, failing;
    for (BugId b : enabled) {
      const Verdict alone = DiffTest(tc, BugSet().With(b));
      if (alone.tag == VerdictTag::kPass) continue;
      failing.push_back(std::string(BugName(b)));
      if (DedupKey(alone, f.stage) == f.signature) exact.push_back(failing.back());
    }
    f.bugs = exact.empty() ? failing : exact;
    f.artifact = "artifacts/" + std::to_string(f.first_hit) + "-" +
                 std::string(StageKey(f.stage)) + PayloadExtension(f.stage);
    if (write) {
      std::ofstream out(fs::path(config.out_dir) / f.artifact);
      out << WriteTestFile(tc, {{"bugs", config.bugs.ToString()},
                                {"verdict", std::string(VerdictName(f.tag))},
                                {"signature", f.signature}});
    }
  }

  report.hash = HexDigest(Fnv1a(HashedBody(report).dump()));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (write) std::ofstream(fs::path(config.out_dir) / "report.json") << report.ToJson();
  return report;
}

}  // namespace stagefuzz::oracle

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

#include "stagefuzz/synth.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stagefuzz/error.h"
#include "stagefuzz/graph_gen.h"
#include "stagefuzz/hash.h"
#include "text_util.h"

namespace stagefuzz::synth {

using graph::Node;
using graph::OpKind;

namespace {

bool NodeLocal(PassId pass) {
  return pass == PassId::kConstFold || pass == PassId::kAlgebraicSimplify;
}

void ReplaceUses(Graph& g, NodeId from, NodeId to) {
  for (auto& [id, node] : g.nodes)
    for (NodeId& in : node.inputs)
      if (in == from) in = to;
  for (NodeId& out : g.outputs)
    if (out == from) out = to;
}

std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

template <typename T>
const T& PickFrom(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

bool Coin(std::mt19937_64& rng, double p = 0.5) {
  return std::uniform_real_distribution<double>(0, 1)(rng) < p;
}

std::set<NodeId> Descendants(const Graph& g, NodeId root) {
  std::map<NodeId, std::vector<NodeId>> users;
  for (const auto& [id, n] : g.nodes)
    for (NodeId in : n.inputs) users[in].push_back(id);
  std::set<NodeId> seen{root};
  std::vector<NodeId> work{root};
  while (!work.empty()) {
    const NodeId id = work.back();
    work.pop_back();
    for (NodeId u : users[id])
      if (seen.insert(u).second) work.push_back(u);
  }
  return seen;
}

// The single adapter turning `from` into `to`, if one exists.
std::optional<Node> Adapter(const TensorType& from, const TensorType& to) {
  Node a;
  if (from.shape == to.shape && from.dtype != to.dtype) {
    a.kind = OpKind::kCast;
    a.params["to"] = std::string(DTypeName(to.dtype));
  } else if (from.dtype == to.dtype && from.shape != to.shape &&
             from.NumElements() == to.NumElements()) {
    a.kind = OpKind::kReshape;
    a.params["shape"] = to.shape;
  } else {
    return std::nullopt;
  }
  a.out_type = to;
  return a;
}

// Rewires slot placeholder `slot` to come from `src`, through an adapter
// when the types differ.
void Bind(Graph& g, NodeId slot, NodeId src) {
  const TensorType want = g.at(slot).out_type;
  NodeId from = src;
  if (g.at(src).out_type != want) {
    Node a = *Adapter(g.at(src).out_type, want);
    a.id = g.NextId();
    a.inputs = {src};
    from = a.id;
    g.nodes[a.id] = std::move(a);
  }
  ReplaceUses(g, slot, from);
  g.nodes.erase(slot);
}

bool Usable(const Node& n) { return IsNumeric(n.out_type.dtype); }

}  // namespace

// ------------------------------------------------------------------ patterns

std::string Pattern::Canonical() const {
  std::string text = "pattern " + std::string(hl::PassName(pass)) + " " + rule_id + "\n";
  text += graph::SerializeGraph(body);
  if (text.back() != '\n') text += '\n';
  return text + "end\n";
}

uint64_t Pattern::Hash() const { return Fnv1a(Canonical()); }

Pattern DerivePattern(const Graph& g, const hl::RewriteTrace& trace) {
  std::set<NodeId> keep;
  for (NodeId id : trace.matched_nodes)
    if (g.nodes.count(id)) keep.insert(id);
  if (NodeLocal(trace.pass)) {
    const std::set<NodeId> matched = keep;
    for (NodeId id : matched)
      for (NodeId in : g.at(id).inputs) keep.insert(in);
  }
  std::set<NodeId> body;
  for (NodeId id : keep)
    if (g.at(id).kind != OpKind::kInput) body.insert(id);
  if (body.empty())
    throw Error(ErrorKind::kDegeneratePattern,
                trace.rule_id + ": no operator nodes after derivation");

  auto order = graph::TopologicalOrder(g);
  if (!order) throw Error(ErrorKind::kDegeneratePattern, "graph is not a DAG");
  std::vector<NodeId> members;
  for (NodeId id : *order)
    if (body.count(id)) members.push_back(id);

  // Slots in order of first use.
  std::vector<NodeId> slot_src;
  std::map<NodeId, NodeId> remap;
  for (NodeId id : members)
    for (NodeId in : g.at(id).inputs)
      if (!body.count(in) && !remap.count(in)) {
        remap[in] = static_cast<NodeId>(slot_src.size());
        slot_src.push_back(in);
      }

  Pattern p;
  p.pass = trace.pass;
  p.rule_id = trace.rule_id;
  p.body.name = "pattern";
  for (size_t k = 0; k < slot_src.size(); ++k) {
    Node s;
    s.id = static_cast<NodeId>(k);
    s.kind = OpKind::kInput;
    s.params["name"] = "slot" + std::to_string(k);
    s.out_type = g.at(slot_src[k]).out_type;
    p.frontier.push_back(s.out_type);
    p.body.nodes[s.id] = std::move(s);
  }
  for (NodeId id : members) {
    Node n = g.at(id);
    n.id = static_cast<NodeId>(p.body.nodes.size());
    for (NodeId& in : n.inputs) in = remap.at(in);
    remap[id] = n.id;
    p.body.nodes[n.id] = std::move(n);
  }
  if (!p.dead()) {
    std::set<NodeId> used;
    for (NodeId id : members)
      for (NodeId in : g.at(id).inputs) used.insert(in);
    for (NodeId id : members)
      if (!used.count(id)) p.body.outputs.push_back(remap.at(id));
  }
  return p;
}

Graph WrapPattern(const Pattern& p) {
  Graph g = p.body;
  if (p.dead() || g.outputs.empty()) {
    Node anchor;
    anchor.id = g.NextId();
    anchor.kind = OpKind::kInput;
    anchor.params["name"] = std::string("anchor");
    anchor.out_type = {DType::kF32, {1}};
    g.nodes[anchor.id] = anchor;
    g.outputs.push_back(anchor.id);
  }
  return g;
}

bool CheckFidelity(const Pattern& p) {
  try {
    const Graph g = WrapPattern(p);
    if (!graph::ValidateGraph(g).ok()) return false;
    const auto r = hl::RunPass(p.pass, g);
    return std::any_of(r.traces.begin(), r.traces.end(), [&](const hl::RewriteTrace& t) {
      return t.fired && t.rule_id == p.rule_id;
    });
  } catch (const Error&) {
    return false;
  }
}

// ---------------------------------------------------------------- pass tests

PassTest LoadPassTest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kTestLoadError, "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  PassTest t;
  t.file = std::filesystem::path(path).filename().string();
  bool have_pass = false;
  for (const std::string& raw : text::SplitLines(text)) {
    const std::string line = Trim(raw);
    auto header = [&](const std::string& key) -> std::optional<std::string> {
      if (line.rfind(key, 0) != 0) return std::nullopt;
      return Trim(line.substr(key.size()));
    };
    if (auto v = header("#expect-pass:")) {
      std::istringstream fields(*v);
      std::string pass, rule;
      fields >> pass >> rule;
      auto id = hl::ParsePassId(pass);
      if (!id) throw Error(ErrorKind::kTestLoadError, t.file + ": unknown pass '" + pass + "'");
      t.pass = *id;
      if (!rule.empty()) t.rule_id = rule;
      have_pass = true;
    } else if (auto r = header("#expect-rule:")) {
      t.rule_id = *r;
    }
  }
  if (!have_pass || t.rule_id.empty())
    throw Error(ErrorKind::kTestLoadError, t.file + ": missing #expect-pass header");
  const auto& known = hl::KnownRuleIds(t.pass);
  if (std::find(known.begin(), known.end(), t.rule_id) == known.end())
    throw Error(ErrorKind::kTestLoadError,
                t.file + ": rule '" + t.rule_id + "' does not belong to " +
                    std::string(hl::PassName(t.pass)));
  try {
    t.graph = graph::ParseGraph(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::kTestLoadError, t.file + ": " + e.what());
  }
  const auto report = graph::ValidateGraph(t.graph);
  if (!report.ok())
    throw Error(ErrorKind::kTestLoadError, t.file + ": " + report.ToString());
  return t;
}

CaptureReport CapturePatterns(const std::string& dir) {
  namespace fs = std::filesystem;
  CaptureReport report;
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ".graph")
      files.push_back(entry.path());
  if (ec) throw Error(ErrorKind::kTestLoadError, "cannot list " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::set<uint64_t> seen;
  for (const auto& file : files) {
    PassTest test;
    try {
      test = LoadPassTest(file.string());
    } catch (const Error& e) {
      report.load_errors.push_back(file.filename().string() + ": " + e.detail());
      continue;
    }
    ++report.tests_run;
    hl::PipelineResult run;
    try {
      run = hl::RunPipeline(2, test.graph, {}, true);
    } catch (const Error& e) {
      report.load_errors.push_back(test.file + ": " + e.what());
      continue;
    }
    const bool expected = std::any_of(
        run.traces.begin(), run.traces.end(), [&](const hl::RewriteTrace& t) {
          return t.fired && t.pass == test.pass && t.rule_id == test.rule_id;
        });
    if (!expected) report.stale_tests.push_back(test.file);

    const Graph* before = &test.graph;
    for (const auto& step : run.steps) {
      for (const auto& trace : step.traces) {
        if (!trace.fired) continue;
        Pattern p;
        try {
          p = DerivePattern(*before, trace);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kDegeneratePattern) throw;
          ++report.degenerate;
          continue;
        }
        p.source = test.file;
        if (!CheckFidelity(p)) {
          ++report.infidel;
        } else if (!seen.insert(p.Hash()).second) {
          ++report.duplicates;
        } else {
          report.patterns.push_back(std::move(p));
        }
      }
      before = &step.after;
    }
  }
  return report;
}

std::string SerializeLibrary(const std::vector<Pattern>& patterns) {
  std::string out;
  for (const auto& p : patterns) {
    if (!p.source.empty()) out += "# source: " + p.source + "\n";
    out += p.Canonical();
  }
  return out;
}

std::vector<Pattern> ParseLibrary(const std::string& text) {
  std::vector<Pattern> out;
  std::string source;
  std::optional<Pattern> current;
  std::string body;
  int line_no = 0;
  for (const std::string& raw : text::SplitLines(text)) {
    ++line_no;
    const std::string line = Trim(raw);
    if (!current) {
      if (line.empty()) continue;
      if (line.rfind("# source:", 0) == 0) {
        source = Trim(line.substr(9));
        continue;
      }
      if (line[0] == '#') continue;
      std::istringstream fields(line);
      std::string kw, pass, rule;
      fields >> kw >> pass >> rule;
      auto id = hl::ParsePassId(pass);
      if (kw != "pattern" || !id || rule.empty())
        throw Error(ErrorKind::kTestLoadError,
                    "pattern library line " + std::to_string(line_no) + ": expected header");
      current = Pattern{};
      current->pass = *id;
      current->rule_id = rule;
      current->source = source;
      body.clear();
      source.clear();
      continue;
    }
    if (line == "end") {
      try {
        current->body = graph::ParseGraph(body);
      } catch (const Error& e) {
        throw Error(ErrorKind::kTestLoadError, "pattern library line " +
                                                   std::to_string(line_no) + ": " + e.what());
      }
      for (const auto& [id, n] : current->body.nodes) {
        const auto name = n.params.find("name");
        if (n.kind == OpKind::kInput && name != n.params.end() &&
            std::get<std::string>(name->second).rfind("slot", 0) == 0)
          current->frontier.push_back(n.out_type);
      }
      out.push_back(std::move(*current));
      current.reset();
      continue;
    }
    body += raw + "\n";
  }
  if (current) throw Error(ErrorKind::kTestLoadError, "pattern library: missing 'end'");
  return out;
}

std::vector<Pattern> LoadLibrary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kTestLoadError, "cannot open pattern library " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseLibrary(buf.str());
}

// ----------------------------------------------------------------- synthesis

Graph FixDangling(Graph g, const std::vector<NodeId>& slots, std::mt19937_64& rng,
                  const std::set<NodeId>& exclude, FixReport* report) {
  const std::set<NodeId> pending(slots.begin(), slots.end());
  // Anything downstream of a slot would close a cycle.
  std::set<NodeId> blocked = exclude;
  for (NodeId slot : slots) {
    const auto below = Descendants(g, slot);
    blocked.insert(below.begin(), below.end());
  }
  std::set<std::string> names;
  for (const auto& [id, n] : g.nodes)
    if (n.kind == OpKind::kInput) names.insert(std::get<std::string>(n.params.at("name")));
  int fresh = 0;
  for (NodeId slot : slots) {
    const TensorType want = g.at(slot).out_type;
    std::vector<NodeId> exact, adaptable;
    for (const auto& [id, n] : g.nodes) {
      if (blocked.count(id) || pending.count(id) || !Usable(n)) continue;
      if (n.out_type == want)
        exact.push_back(id);
      else if (Adapter(n.out_type, want))
        adaptable.push_back(id);
    }
    FixStrategy used;
    if (!exact.empty()) {
      Bind(g, slot, PickFrom(exact, rng));
      used = FixStrategy::kReuse;
    } else if (!adaptable.empty()) {
      Bind(g, slot, PickFrom(adaptable, rng));
      used = FixStrategy::kAdapter;
    } else if (Coin(rng)) {
      std::string name;
      do name = "syn" + std::to_string(fresh++);
      while (names.count(name));
      names.insert(name);
      g.nodes.at(slot).params["name"] = name;
      used = FixStrategy::kFreshInput;
    } else {
      Node& n = g.nodes.at(slot);
      n.kind = OpKind::kConstant;
      n.params.clear();
      n.payload = gen::RandomPayload(want, rng, /*nonzero=*/true);
      used = FixStrategy::kFreshConstant;
    }
    if (report != nullptr) report->strategies.push_back(used);
  }
  return g;
}

SynthesisResult Synthesize(const Pattern& pattern, const Graph& seed, std::mt19937_64& rng) {
  std::vector<NodeId> seed_nodes;
  std::vector<NodeId> seed_ops;
  for (const auto& [id, n] : seed.nodes) {
    if (!Usable(n)) continue;
    seed_nodes.push_back(id);
    if (!n.inputs.empty()) seed_ops.push_back(id);
  }
  if (seed_nodes.empty()) throw Error(ErrorKind::kSynthesisFailed, "seed has no usable nodes");

  for (int attempt = 1; attempt <= kSynthesisAttempts; ++attempt) {
    SynthesisResult result;
    result.attempts = attempt;
    Graph g = seed;
    const NodeId base = g.NextId();
    std::map<NodeId, NodeId> remap;
    std::vector<NodeId> slots;
    for (const auto& [id, n] : pattern.body.nodes) remap[id] = base + static_cast<NodeId>(remap.size());
    for (const auto& [id, n] : pattern.body.nodes) {
      Node copy = n;
      copy.id = remap.at(id);
      for (NodeId& in : copy.inputs) in = remap.at(in);
      const bool slot = n.kind == OpKind::kInput;
      if (slot) {
        copy.params["name"] = "__slot" + std::to_string(slots.size());
        slots.push_back(copy.id);
      } else {
        result.pattern_nodes.insert(copy.id);
      }
      g.nodes[copy.id] = std::move(copy);
    }
    std::vector<NodeId> sinks;
    for (NodeId out : pattern.body.outputs) sinks.push_back(remap.at(out));

    std::set<NodeId> exclude = result.pattern_nodes;
    const bool feed_consumer = !sinks.empty() && !seed_ops.empty() && Coin(rng);
    if (!feed_consumer) {
      // The anchor's value feeds one frontier slot, directly or through an
      // adapter. With no compatible anchor the pattern stands beside the
      // seed and fix_dangling creates its inputs.
      std::vector<std::pair<NodeId, size_t>> fits;
      for (NodeId anchor : seed_nodes)
        for (size_t k = 0; k < slots.size(); ++k) {
          const TensorType& have = g.at(anchor).out_type;
          const TensorType& want = g.at(slots[k]).out_type;
          if (have == want || Adapter(have, want)) fits.emplace_back(anchor, k);
        }
      if (fits.empty()) {
        result.point = {PickFrom(seed_nodes, rng), SpliceMode::kFeedIntoPattern};
      } else {
        const auto [anchor, k] = PickFrom(fits, rng);
        result.point = {anchor, SpliceMode::kFeedIntoPattern};
        Bind(g, slots[k], anchor);
        slots.erase(slots.begin() + static_cast<long>(k));
      }
      if (!pattern.dead())
        for (NodeId s : sinks) g.outputs.push_back(s);
    } else {
      // A pattern sink replaces one same-typed input edge of the anchor.
      struct Edge {
        NodeId anchor;
        size_t index;
        NodeId sink;
      };
      std::vector<Edge> edges;
      for (NodeId op : seed_ops) {
        const Node& a = g.at(op);
        for (size_t e = 0; e < a.inputs.size(); ++e)
          for (NodeId s : sinks)
            if (g.at(a.inputs[e]).out_type == g.at(s).out_type) edges.push_back({op, e, s});
      }
      if (edges.empty()) continue;
      const auto [anchor, e, sink] = PickFrom(edges, rng);
      result.point = {anchor, SpliceMode::kPatternFeedsConsumer};
      g.nodes.at(anchor).inputs[e] = sink;
      for (NodeId s : sinks)
        if (s != sink) g.outputs.push_back(s);
      const auto below = Descendants(seed, anchor);
      exclude.insert(below.begin(), below.end());
    }
    g = FixDangling(std::move(g), slots, rng, exclude, &result.fixes);
    if (!graph::ValidateGraph(g).ok()) continue;
    result.graph = std::move(g);
    return result;
  }
  throw Error(ErrorKind::kSynthesisFailed,
              "no legal splice for " + pattern.rule_id + " after " +
                  std::to_string(kSynthesisAttempts) + " attempts");
}

Graph SeedGraph(uint64_t seed) {
  gen::GraphGenOptions options;
  options.rewrite_hints = false;
  return gen::RandomGraph(seed, options);
}

// -------------------------------------------------------------------- stream

namespace {

constexpr int kRecycleWindow = 16;
constexpr size_t kRecycleMaxNodes = 48;

}  // namespace

SynthesisStream::SynthesisStream(std::vector<Pattern> patterns, uint64_t seed,
                                 bool use_patterns)
    : patterns_(std::move(patterns)), seed_(seed), use_patterns_(use_patterns) {}

SynthesisStream::Test SynthesisStream::Get(int64_t index) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(index);
    if (it != cache_.end()) return it->second;
  }
  Test t = Build(index);
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(index, std::move(t)).first->second;
}

SynthesisStream::Test SynthesisStream::Build(int64_t index) {
  std::mt19937_64 rng(Mix(seed_ ^ Mix(static_cast<uint64_t>(index))));
  const uint64_t seed_id = rng();
  if (!use_patterns_ || patterns_.empty())
    return {SeedGraph(seed_id), "seed:" + HexDigest(seed_id)};

  Test host{SeedGraph(seed_id), "seed:" + HexDigest(seed_id)};
  if (index > 0 && Coin(rng, 0.25)) {
    const int64_t window = std::min<int64_t>(index, kRecycleWindow);
    const int64_t j = index - 1 - std::uniform_int_distribution<int64_t>(0, window - 1)(rng);
    Test prior = Get(j);
    if (prior.graph.nodes.size() <= kRecycleMaxNodes)
      host = {std::move(prior.graph), "test:" + std::to_string(j)};
  }
  for (int tries = 0; tries < 4; ++tries) {
    const Pattern& p = PickFrom(patterns_, rng);
    try {
      SynthesisResult r = Synthesize(p, host.graph, rng);
      r.graph.name = "syn";
      return {std::move(r.graph), "pattern:" + HexDigest(p.Hash()) + "@" + host.lineage};
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kSynthesisFailed) throw;
    }
  }
  return host;
}

}  // namespace stagefuzz::synth

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

// Command-line driver. Exit codes: 0 ran clean, 1 failures found, 2 bad
// configuration or input.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "stagefuzz/error.h"
#include "stagefuzz/migrate.h"
#include "stagefuzz/oracle.h"

namespace {

using namespace stagefuzz;
using oracle::CampaignConfig;
using oracle::CampaignReport;
using oracle::VerdictTag;

constexpr int kClean = 0;
constexpr int kFailures = 1;
constexpr int kConfig = 2;

struct CommonFlags {
  int64_t budget = 300;
  uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::optional<std::string> bugs;
  std::string order = "diversity";
  std::string data;
  bool json = false;
};

void AddCommon(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--budget", f.budget, "Number of tests")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Campaign seed")->capture_default_str();
  cmd->add_option("--jobs", f.jobs, "Worker threads")->capture_default_str();
  cmd->add_option("--out", f.out, "Directory for report.json and artifacts/");
  cmd->add_option("--bugs", f.bugs,
                  "Seeded bugs to enable, e.g. L1,H2 or all (default: $STAGEFUZZ_BUGS)");
  cmd->add_option("--order", f.order, "Loader record order: diversity, random or fifo")
      ->capture_default_str();
  cmd->add_option("--data", f.data, "Data directory (default: bundled)");
  cmd->add_flag("--json", f.json, "Print the full report as JSON");
}

BugSet Bugs(const std::optional<std::string>& flag) {
  return flag ? BugSet::Parse(*flag) : BugSet::FromEnvironment();
}

CampaignConfig MakeConfig(const CommonFlags& f, const std::string& stage) {
  CampaignConfig c;
  c.stage = stage;
  c.budget = f.budget;
  c.seed = f.seed;
  c.jobs = f.jobs;
  c.out_dir = f.out;
  c.bugs = Bugs(f.bugs);
  c.data_dir = f.data;
  const auto order = migrate::ParseOrder(f.order);
  if (!order) throw Error(ErrorKind::kConfigError, "unknown order '" + f.order + "'");
  c.order = *order;
  return c;
}

void PrintSummary(const CampaignReport& r) {
  std::printf("stage %s  budget %lld  seed %llu  bugs %s\n", r.config.stage.c_str(),
              static_cast<long long>(r.config.budget),
              static_cast<unsigned long long>(r.config.seed),
              r.config.bugs.Empty() ? "none" : r.config.bugs.ToString().c_str());
  std::printf("tests %lld  non-pass %lld  skipped %lld\n", static_cast<long long>(r.tests_run),
              static_cast<long long>(r.NonPass()), static_cast<long long>(r.skipped));
  for (const auto& [tag, n] : r.verdicts)
    std::printf("  %-17s %lld\n", std::string(oracle::VerdictName(tag)).c_str(),
                static_cast<long long>(n));
  std::printf("coverage: %zu hl rules, %zu ll rules\n", r.hl_rules.size(), r.ll_rules.size());
  if (!r.failures.empty()) std::printf("signatures (%zu):\n", r.failures.size());
  for (const auto& f : r.failures) {
    std::string bugs;
    for (const auto& b : f.bugs) bugs += (bugs.empty() ? "" : ",") + b;
    std::printf("  #%-6lld x%-5lld %s  [%s]\n", static_cast<long long>(f.first_hit),
                static_cast<long long>(f.count), f.signature.c_str(),
                bugs.empty() ? "-" : bugs.c_str());
  }
  for (const auto& i : r.incidents) std::printf("incident: %s\n", i.c_str());
  std::printf("hash %s  wall %.2fs\n", r.hash.c_str(), r.wall_seconds);
}

int Campaign(const CommonFlags& f, CampaignConfig c) {
  const CampaignReport r = oracle::RunCampaign(c);
  if (f.json) {
    std::cout << r.ToJson();
  } else {
    PrintSummary(r);
  }
  return r.NonPass() > 0 ? kFailures : kClean;
}

int Report(const std::string& path) {
  std::filesystem::path p = path;
  if (std::filesystem::is_directory(p)) p /= "report.json";
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::kConfigError, "cannot read " + p.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfigError, p.string() + ": " + e.what());
  }
  const auto& c = j.at("config");
  std::printf("stage %s  budget %lld  seed %llu  jobs %d\n",
              c.at("stage").get<std::string>().c_str(), c.at("budget").get<long long>(),
              c.at("seed").get<unsigned long long>(), c.value("jobs", 1));
  std::printf("tests %lld  skipped %lld  wall %.2fs\n", j.at("tests_run").get<long long>(),
              j.at("skipped").get<long long>(), j.value("wall_time_s", 0.0));
  long long non_pass = 0;
  for (const auto& [name, n] : j.at("verdicts").items()) {
    std::printf("  %-17s %lld\n", name.c_str(), n.get<long long>());
    if (name != "Pass") non_pass += n.get<long long>();
  }
  std::printf("coverage: %lld hl rules, %lld ll rules\n",
              j.at("coverage").at("hl_rule_count").get<long long>(),
              j.at("coverage").at("ll_rule_count").get<long long>());
  for (const auto& f : j.at("failures"))
    std::printf("  #%-6lld x%-5lld %s  -> %s\n", f.at("first_hit").get<long long>(),
                f.at("count").get<long long>(), f.at("signature").get<std::string>().c_str(),
                f.at("artifact").get<std::string>().c_str());
  std::printf("hash %s\n", j.at("hash").get<std::string>().c_str());
  return non_pass > 0 ? kFailures : kClean;
}

int Selftest(const std::string& data) {
  const std::string dir = (data.empty() ? oracle::DefaultDataDir() : data) + "/regressions";
  int failed = 0;
  for (const auto& r : oracle::RunRegressions(dir)) {
    std::printf("%-4s %-36s off=%-16s on=%-16s %s\n", std::string(BugName(r.test.bug)).c_str(),
                r.test.file.c_str(), std::string(oracle::VerdictName(r.off.tag)).c_str(),
                std::string(oracle::VerdictName(r.on.tag)).c_str(),
                r.flips() ? "ok" : "FAIL");
    failed += !r.flips();
  }
  return failed ? kFailures : kClean;
}

int Replay(const std::string& file, const std::optional<std::string>& bug_flag) {
  const oracle::TestFile f = oracle::ReadTestFile(file);
  BugSet bugs;
  if (bug_flag) {
    bugs = BugSet::Parse(*bug_flag);
  } else if (auto it = f.header.find("bugs"); it != f.header.end()) {
    bugs = BugSet::Parse(it->second);
  } else if (auto it2 = f.header.find("bug"); it2 != f.header.end()) {
    bugs = BugSet::Parse(it2->second);
  } else {
    bugs = BugSet::FromEnvironment();
  }
  const oracle::Verdict v = oracle::DiffTest(f.test, bugs);
  std::printf("%s  bugs %s\n", std::string(oracle::VerdictName(v.tag)).c_str(),
              bugs.Empty() ? "none" : bugs.ToString().c_str());
  if (v.tag != VerdictTag::kPass) {
    std::printf("signature %s\n", oracle::DedupKey(v, f.test.stage).c_str());
    std::printf("message   %s\n", v.message.c_str());
    if (!v.last_rule.empty()) std::printf("last rule %s\n", v.last_rule.c_str());
  }
  if (auto it = f.header.find("verdict");
      it != f.header.end() && it->second != oracle::VerdictName(v.tag))
    std::printf("note: artifact recorded %s\n", it->second.c_str());
  return v.tag == VerdictTag::kPass ? kClean : kFailures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stagefuzz: staged fuzzing of a reference tensor compiler"};
  app.require_subcommand(1);

  CommonFlags migrate_f, synth_f, mutate_f, fuzz_f;
  std::string corpus;
  auto* migrate = app.add_subcommand("migrate", "Loader tests from the operator corpus");
  AddCommon(migrate, migrate_f);
  migrate->add_option("--corpus", corpus, "JSONL operator records (default: bundled corpus)");

  bool no_patterns = false;
  auto* synthesize = app.add_subcommand("synthesize", "Graph tests built from optimization patterns");
  AddCommon(synthesize, synth_f);
  synthesize->add_flag("--no-patterns", no_patterns, "Random graphs only (baseline)");

  bool no_rules = false;
  std::string provider;
  auto* mutate = app.add_subcommand("mutate", "Loop tests mutated by documentation rules");
  AddCommon(mutate, mutate_f);
  mutate->add_flag("--no-rules", no_rules, "Unmutated seeds only (baseline)");
  mutate->add_option("--provider", provider, "Seed/rule provider: shell command or http URL");

  std::string stage = "all";
  std::string fuzz_provider;
  auto* fuzz = app.add_subcommand("fuzz", "Combined campaign");
  AddCommon(fuzz, fuzz_f);
  fuzz->add_option("--stage", stage, "loader, hlopt, llopt or all")->capture_default_str();
  fuzz->add_option("--provider", fuzz_provider, "Seed/rule provider for llopt tests");

  int corpus_count = 600;
  uint64_t corpus_seed = 2026;
  auto* gen_corpus = app.add_subcommand("corpus", "Write a synthesized operator corpus to stdout");
  gen_corpus->add_option("--count", corpus_count, "Records")->capture_default_str();
  gen_corpus->add_option("--seed", corpus_seed, "Generator seed")->capture_default_str();

  std::string report_path;
  auto* report = app.add_subcommand("report", "Summarize a saved report");
  report->add_option("path", report_path, "report.json or its directory")->required();

  std::string selftest_data;
  auto* selftest = app.add_subcommand("selftest", "Run the seeded-bug regression suite");
  selftest->add_option("--data", selftest_data, "Data directory (default: bundled)");

  std::string replay_file;
  std::optional<std::string> replay_bugs;
  auto* replay = app.add_subcommand("replay", "Re-run one saved test file");
  replay->add_option("file", replay_file, "Artifact or regression file")->required();
  replay->add_option("--bugs", replay_bugs, "Override the bugs recorded in the file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kClean : kConfig;
  }

  try {
    if (*migrate) {
      CampaignConfig c = MakeConfig(migrate_f, "loader");
      c.corpus = corpus;
      return Campaign(migrate_f, c);
    }
    if (*synthesize) {
      CampaignConfig c = MakeConfig(synth_f, "hlopt");
      c.guided = !no_patterns;
      return Campaign(synth_f, c);
    }
    if (*mutate) {
      CampaignConfig c = MakeConfig(mutate_f, "llopt");
      c.guided = !no_rules;
      c.provider = provider;
      return Campaign(mutate_f, c);
    }
    if (*fuzz) {
      CampaignConfig c = MakeConfig(fuzz_f, stage);
      c.provider = fuzz_provider;
      return Campaign(fuzz_f, c);
    }
    if (*gen_corpus) {
      if (corpus_count < 0) throw Error(ErrorKind::kConfigError, "negative count");
      for (const auto& r : migrate::GenerateCorpus(corpus_seed, corpus_count))
        std::cout << migrate::RecordToJson(r) << "\n";
      return kClean;
    }
    if (*report) return Report(report_path);
    if (*selftest) return Selftest(selftest_data);
    if (*replay) return Replay(replay_file, replay_bugs);
  } catch (const Error& e) {
    std::fprintf(stderr, "stagefuzz: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "stagefuzz: %s\n", e.what());
    return kConfig;
  }
  return kConfig;
}

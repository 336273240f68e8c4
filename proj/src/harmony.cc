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

#include "stagefuzz/harmony.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <filesystem>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <regex>
#include <sstream>

#include "stagefuzz/error.h"
#include "stagefuzz/hash.h"

namespace stagefuzz::harmony {

namespace fs = std::filesystem;
using json = nlohmann::json;
using loop::Affine;
using loop::Buffer;
using loop::Expr;
using loop::ExprKind;
using loop::StmtKind;
using loop::StmtPath;
using scalar::BinaryOp;

namespace {

template <typename T>
const T& PickFrom(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<size_t>(0, v.size() - 1)(rng)];
}

int64_t Uniform(int64_t lo, int64_t hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
}

std::string ReadText(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kDocParseError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<fs::path> FilesWithExtension(const std::string& dir, const std::string& ext) {
  std::vector<fs::path> files;
  std::error_code ec;
  if (dir.empty() || !fs::is_directory(dir, ec)) return files;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file() && entry.path().extension() == ext) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  return files;
}

std::string Upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

// Text between a leading "---" line and the next "---" line.
std::string FrontMatter(const std::string& text) {
  std::istringstream in(text);
  std::string line, yaml;
  if (!std::getline(in, line) || line != "---")
    throw Error(ErrorKind::kDocParseError, "missing front matter");
  while (std::getline(in, line)) {
    if (line == "---") return yaml;
    yaml += line + "\n";
  }
  throw Error(ErrorKind::kDocParseError, "unterminated front matter");
}

YAML::Node LoadYaml(const std::string& text) {
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::kDocParseError, std::string("yaml: ") + e.what());
  }
}

template <typename T>
T Scalar(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(ErrorKind::kDocParseError, "bad value for " + what);
  }
}

YAML::Node Sequence(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence()) throw Error(ErrorKind::kDocParseError, what + " must be a list");
  return node;
}

}  // namespace

// --- names -----------------------------------------------------------------

const std::vector<Template>& AllTemplates() {
  static const std::vector<Template> all = {Template::kElementwise, Template::kReduction,
                                            Template::kMatmul, Template::kConv,
                                            Template::kStencil};
  return all;
}

std::string_view TemplateName(Template t) {
  switch (t) {
    case Template::kElementwise: return "elementwise";
    case Template::kReduction: return "reduction";
    case Template::kMatmul: return "matmul";
    case Template::kConv: return "conv";
    case Template::kStencil: return "stencil";
  }
  return "?";
}

std::optional<Template> ParseTemplate(std::string_view name) {
  for (Template t : AllTemplates())
    if (TemplateName(t) == name) return t;
  return std::nullopt;
}

std::string_view SourceName(Source s) {
  switch (s) {
    case Source::kBuiltin: return "builtin";
    case Source::kDocs: return "docs";
    case Source::kProvider: return "provider";
  }
  return "?";
}

std::string_view AnnKindName(AnnKind k) {
  switch (k) {
    case AnnKind::kSerial: return "serial";
    case AnnKind::kParallel: return "parallel";
    case AnnKind::kVectorize: return "vectorize";
    case AnnKind::kUnroll: return "unroll";
    case AnnKind::kPipelined: return "pipelined";
  }
  return "?";
}

std::optional<AnnKind> ParseAnnKind(std::string_view name) {
  for (AnnKind k : {AnnKind::kSerial, AnnKind::kParallel, AnnKind::kVectorize, AnnKind::kUnroll,
                    AnnKind::kPipelined})
    if (AnnKindName(k) == name) return k;
  return std::nullopt;
}

// --- provider --------------------------------------------------------------

std::optional<std::string> Provider::Request(const std::string& op, const std::string& subject,
                                             const std::string& constraints, uint64_t seed,
                                             std::string* incident) {
  json c = json::parse(constraints, nullptr, /*allow_exceptions=*/false);
  if (c.is_discarded()) c = constraints;
  const json req = {{"op", op}, {"template", subject}, {"constraints", c}, {"seed", seed}};
  std::string scratch;
  if (!incident) incident = &scratch;

  std::optional<std::string> line;
  {
    std::lock_guard<std::mutex> lock(mu_);
    line = Exchange(req.dump(), incident);
  }
  if (!line) return std::nullopt;
  const json resp = json::parse(*line, nullptr, false);
  if (resp.is_discarded()) {
    *incident = "malformed provider response";
    return std::nullopt;
  }
  if (!resp.is_object() || !resp.contains("text") || !resp["text"].is_string()) {
    *incident = "provider response has no text field";
    return std::nullopt;
  }
  return resp["text"].get<std::string>();
}

namespace {

// One long-lived `sh -c <command>` child. A timeout or broken stream kills
// it; the next request starts a new one.
class ProcessProvider : public Provider {
 public:
  ProcessProvider(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}
  ~ProcessProvider() override { Stop(); }

 protected:
  std::optional<std::string> Exchange(const std::string& line, std::string* incident) override {
    if (pid_ < 0 && !Start(incident)) return std::nullopt;
    const std::string out = line + "\n";
    for (size_t done = 0; done < out.size();) {
      const ssize_t n = write(in_fd_, out.data() + done, out.size() - done);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return Fail("provider stdin closed", incident);
      done += static_cast<size_t>(n);
    }
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
      const size_t nl = pending_.find('\n');
      if (nl != std::string::npos) {
        std::string resp = pending_.substr(0, nl);
        pending_.erase(0, nl + 1);
        return resp;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                            deadline - std::chrono::steady_clock::now())
                            .count();
      if (left <= 0)
        return Fail("provider timed out after " + std::to_string(timeout_.count()) + " ms",
                    incident);
      pollfd pfd{out_fd_, POLLIN, 0};
      const int r = poll(&pfd, 1, static_cast<int>(left));
      if (r < 0 && errno == EINTR) continue;
      if (r < 0) return Fail("provider poll failed", incident);
      if (r == 0) continue;
      char buf[4096];
      const ssize_t n = read(out_fd_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return Fail("provider closed its output", incident);
      pending_.append(buf, static_cast<size_t>(n));
    }
  }

 private:
  bool Start(std::string* incident) {
    // A dead child must not take the campaign down through SIGPIPE.
    signal(SIGPIPE, SIG_IGN);
    int in[2], out[2];
    if (pipe2(in, O_CLOEXEC) != 0) {
      *incident = "provider pipe failed";
      return false;
    }
    if (pipe2(out, O_CLOEXEC) != 0) {
      close(in[0]);
      close(in[1]);
      *incident = "provider pipe failed";
      return false;
    }
    const pid_t pid = fork();
    if (pid < 0) {
      for (int fd : {in[0], in[1], out[0], out[1]}) close(fd);
      *incident = "provider fork failed";
      return false;
    }
    if (pid == 0) {
      dup2(in[0], STDIN_FILENO);
      dup2(out[1], STDOUT_FILENO);
      execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in[0]);
    close(out[1]);
    pid_ = pid;
    in_fd_ = in[1];
    out_fd_ = out[0];
    pending_.clear();
    return true;
  }

  void Stop() {
    if (pid_ < 0) return;
    close(in_fd_);
    close(out_fd_);
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
    pid_ = in_fd_ = out_fd_ = -1;
  }

  std::optional<std::string> Fail(const std::string& why, std::string* incident) {
    *incident = why;
    Stop();
    return std::nullopt;
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int in_fd_ = -1, out_fd_ = -1;
  std::string pending_;
};

class HttpProvider : public Provider {
 public:
  HttpProvider(std::string host, int port, std::string path, std::chrono::milliseconds timeout)
      : client_(host, port), path_(std::move(path)) {
    const auto sec = timeout.count() / 1000, usec = (timeout.count() % 1000) * 1000;
    client_.set_connection_timeout(sec, usec);
    client_.set_read_timeout(sec, usec);
    client_.set_write_timeout(sec, usec);
  }

 protected:
  std::optional<std::string> Exchange(const std::string& line, std::string* incident) override {
    auto res = client_.Post(path_, line + "\n", "application/json");
    if (!res) {
      *incident = "provider http error: " + httplib::to_string(res.error());
      return std::nullopt;
    }
    if (res->status != 200) {
      *incident = "provider http status " + std::to_string(res->status);
      return std::nullopt;
    }
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return body;
  }

 private:
  httplib::Client client_;
  std::string path_;
};

}  // namespace

std::unique_ptr<Provider> MakeProvider(const std::string& spec,
                                       std::chrono::milliseconds timeout) {
  static const std::regex url(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (std::regex_match(spec, m, url)) {
    const int port = m[2].matched ? std::stoi(m[2].str()) : 80;
    const std::string path = m[3].matched ? m[3].str() : "/";
    return std::make_unique<HttpProvider>(m[1].str(), port, path, timeout);
  }
  if (spec.empty()) throw Error(ErrorKind::kConfigError, "empty provider command");
  return std::make_unique<ProcessProvider>(spec, timeout);
}

// --- catalog ---------------------------------------------------------------

bool CatalogEntry::Allows(int depth, AnnKind kind) const {
  if (kind == AnnKind::kSerial || annotations.empty()) return true;
  const size_t row = std::min<size_t>(static_cast<size_t>(depth), annotations.size() - 1);
  return annotations[row].count(kind) > 0;
}

const CatalogEntry* Catalog::Usable(Template t) const {
  auto it = entries.find(t);
  if (it == entries.end() || it->second.disputed) return nullptr;
  return &it->second;
}

int Catalog::VerifiedCount() const {
  int n = 0;
  for (const auto& [t, e] : entries) n += e.verified;
  return n;
}

Catalog BuiltinCatalog() {
  constexpr AnnKind P = AnnKind::kParallel, V = AnnKind::kVectorize, U = AnnKind::kUnroll,
                    L = AnnKind::kPipelined;
  auto entry = [](Template t, int64_t lo, int64_t hi, std::set<DType> dtypes,
                  std::set<int> lanes, std::vector<std::set<AnnKind>> anns) {
    CatalogEntry e;
    e.tmpl = t;
    e.min_extent = lo;
    e.max_extent = hi;
    e.dtypes = std::move(dtypes);
    e.lanes = std::move(lanes);
    e.annotations = std::move(anns);
    e.sources = {Source::kBuiltin};
    return e;
  };
  Catalog c;
  c.entries[Template::kElementwise] =
      entry(Template::kElementwise, 4, 64, {DType::kF32, DType::kI32, DType::kI8}, {4, 8},
            {{P, V, U, L}});
  c.entries[Template::kReduction] = entry(Template::kReduction, 2, 24, {DType::kF32, DType::kI32},
                                          {4, 8}, {{P, U, L}, {V, U, L}});
  c.entries[Template::kMatmul] = entry(Template::kMatmul, 2, 16, {DType::kF32, DType::kI32},
                                       {4, 8}, {{P}, {P, V, U, L}, {V, U, L}});
  c.entries[Template::kConv] =
      entry(Template::kConv, 2, 12, {DType::kF32}, {4}, {{P}, {P, U, L}, {U, L}, {V, U, L}});
  c.entries[Template::kStencil] =
      entry(Template::kStencil, 4, 48, {DType::kF32}, {4, 8}, {{P, V, U, L}});
  return c;
}

namespace {

template <typename Set>
std::string SetText(const Set& s, const std::function<std::string(typename Set::value_type)>& f) {
  std::string out = "[";
  for (const auto& v : s) out += (out.size() > 1 ? ", " : "") + f(v);
  return out + "]";
}

std::string DTypesText(const std::set<DType>& s) {
  return SetText<std::set<DType>>(s, [](DType d) { return std::string(DTypeName(d)); });
}

std::string LanesText(const std::set<int>& s) {
  return SetText<std::set<int>>(s, [](int v) { return std::to_string(v); });
}

std::string AnnotationsText(const std::vector<std::set<AnnKind>>& rows) {
  std::string out = "[";
  for (const auto& row : rows) {
    out += (out.size() > 1 ? ", " : "") +
           SetText<std::set<AnnKind>>(row, [](AnnKind k) { return std::string(AnnKindName(k)); });
  }
  return out + "]";
}

CatalogFacts FactsFromNode(const YAML::Node& n) {
  if (!n.IsMap()) throw Error(ErrorKind::kDocParseError, "entry must be a mapping");
  if (!n["template"]) throw Error(ErrorKind::kDocParseError, "missing template");
  CatalogFacts f;
  const std::string name = Scalar<std::string>(n["template"], "template");
  const auto t = ParseTemplate(name);
  if (!t) throw Error(ErrorKind::kDocParseError, "unknown template " + name);
  f.tmpl = *t;
  if (n["extent"]) {
    const auto seq = Sequence(n["extent"], "extent");
    if (seq.size() != 2) throw Error(ErrorKind::kDocParseError, "extent needs [min, max]");
    const auto lo = Scalar<int64_t>(seq[0], "extent"), hi = Scalar<int64_t>(seq[1], "extent");
    if (lo < 1 || hi < lo) throw Error(ErrorKind::kDocParseError, "empty extent range");
    f.extent = std::make_pair(lo, hi);
  }
  if (n["dtypes"]) {
    f.dtypes.emplace();
    for (const auto& d : Sequence(n["dtypes"], "dtypes")) {
      const std::string s = Scalar<std::string>(d, "dtypes");
      const auto dt = ParseDType(Upper(s));
      if (!dt || !IsNumeric(*dt)) throw Error(ErrorKind::kDocParseError, "unknown dtype " + s);
      f.dtypes->insert(*dt);
    }
  }
  if (n["lanes"]) {
    f.lanes.emplace();
    for (const auto& l : Sequence(n["lanes"], "lanes")) {
      const int v = Scalar<int>(l, "lanes");
      if (v < 2) throw Error(ErrorKind::kDocParseError, "lane width below 2");
      f.lanes->insert(v);
    }
  }
  if (n["annotations"]) {
    f.annotations.emplace();
    for (const auto& row : Sequence(n["annotations"], "annotations")) {
      std::set<AnnKind> kinds;
      for (const auto& k : Sequence(row, "annotation row")) {
        const std::string s = Scalar<std::string>(k, "annotations");
        const auto kind = ParseAnnKind(s);
        if (!kind) throw Error(ErrorKind::kDocParseError, "unknown annotation " + s);
        kinds.insert(*kind);
      }
      f.annotations->push_back(std::move(kinds));
    }
  }
  return f;
}

}  // namespace

void MergeFacts(Catalog& catalog, const CatalogFacts& facts, Source source) {
  CatalogEntry& e = catalog.entries.at(facts.tmpl);
  const std::string src(SourceName(source));
  auto conflict = [&](const std::string& field, const std::string& theirs,
                      const std::string& ours) {
    e.disputed = true;
    e.conflicts.push_back(field + ": " + src + " " + theirs + " vs " + ours);
  };
  if (facts.extent && (facts.extent->first != e.min_extent || facts.extent->second != e.max_extent))
    conflict("extent",
             "[" + std::to_string(facts.extent->first) + ", " +
                 std::to_string(facts.extent->second) + "]",
             "[" + std::to_string(e.min_extent) + ", " + std::to_string(e.max_extent) + "]");
  if (facts.dtypes && *facts.dtypes != e.dtypes)
    conflict("dtypes", DTypesText(*facts.dtypes), DTypesText(e.dtypes));
  if (facts.lanes && *facts.lanes != e.lanes)
    conflict("lanes", LanesText(*facts.lanes), LanesText(e.lanes));
  if (facts.annotations && *facts.annotations != e.annotations)
    conflict("annotations", AnnotationsText(*facts.annotations), AnnotationsText(e.annotations));
  e.sources.insert(source);
  e.verified = e.sources.size() >= 2 && !e.disputed;
}

Catalog LoadCatalog(const std::string& docs_dir, const std::string& provider_cache) {
  Catalog catalog = BuiltinCatalog();
  for (const auto& path : FilesWithExtension((fs::path(docs_dir) / "operators").string(), ".md")) {
    try {
      MergeFacts(catalog, FactsFromNode(LoadYaml(FrontMatter(ReadText(path.string())))),
                 Source::kDocs);
    } catch (const Error& e) {
      catalog.problems.push_back(path.filename().string() + ": " + e.what());
    }
  }
  if (!provider_cache.empty()) {
    try {
      const YAML::Node root = LoadYaml(ReadText(provider_cache));
      for (const auto& n : Sequence(root, "provider cache")) {
        try {
          MergeFacts(catalog, FactsFromNode(n), Source::kProvider);
        } catch (const Error& e) {
          catalog.problems.push_back(provider_cache + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      catalog.problems.push_back(provider_cache + ": " + e.what());
    }
  }
  return catalog;
}

// --- seeds -----------------------------------------------------------------

uint64_t ProgramHash(const LoopProgram& p) {
  LoopProgram copy = p;
  copy.name = "p";
  return Fnv1a(loop::SerializeLoop(copy));
}

namespace {

Expr Ld(const std::string& buf, DType dt, Affine idx) { return Expr::Load(buf, dt, std::move(idx)); }
Expr Bin(BinaryOp op, DType dt, Expr a, Expr b) {
  return Expr::Binary(op, dt, std::move(a), std::move(b));
}
Affine V(const std::string& v, int64_t c = 1) { return Affine::Var(v, c); }
Affine K(int64_t c) { return Affine::Const(c); }

Stmt Loop(const std::string& v, int64_t n, std::vector<Stmt> body) {
  return Stmt::For(v, K(0), K(n), std::move(body));
}

DType PickDType(const CatalogEntry& e, std::set<DType> supported, std::mt19937_64& rng) {
  std::vector<DType> ok;
  for (DType d : e.dtypes)
    if (supported.count(d)) ok.push_back(d);
  if (ok.empty()) ok.push_back(*supported.begin());
  return PickFrom(ok, rng);
}

LoopProgram Elementwise(const CatalogEntry& e, std::mt19937_64& rng) {
  const int64_t n = Uniform(e.min_extent, e.max_extent, rng);
  const DType dt = PickDType(e, {DType::kF32, DType::kI32, DType::kI8}, rng);
  LoopProgram p;
  p.name = "elementwise";
  p.inputs = {{"x", dt, {n}}, {"y", dt, {n}}};
  p.outputs = {{"out0", dt, {n}}};
  const Expr x = Ld("x", dt, V("i")), y = Ld("y", dt, V("i"));
  Expr value;
  switch (Uniform(0, 5, rng)) {
    case 0: value = Bin(BinaryOp::kAdd, dt, x, y); break;
    case 1: value = Bin(BinaryOp::kMul, dt, x, y); break;
    case 2: value = Bin(BinaryOp::kAdd, dt, Bin(BinaryOp::kMul, dt, x, y), x); break;
    case 3: value = Bin(BinaryOp::kMul, dt, x, Bin(BinaryOp::kAdd, dt, y, x)); break;
    case 4: value = Bin(BinaryOp::kSub, dt, x, Bin(BinaryOp::kMul, dt, y, Expr::Constant(dt, 2)));
      break;
    default: value = Expr::Unary(scalar::UnaryOp::kRelu, dt, Bin(BinaryOp::kAdd, dt, x, y));
  }
  p.body = Stmt::Seq({Loop("i", n, {Stmt::Store("out0", V("i"), std::move(value))})});
  return p;
}

LoopProgram Reduction(const CatalogEntry& e, std::mt19937_64& rng) {
  const int64_t rows = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t cols = Uniform(e.min_extent, e.max_extent, rng);
  const DType dt = PickDType(e, {DType::kF32, DType::kI32}, rng);
  LoopProgram p;
  p.name = "reduction";
  p.inputs = {{"x", dt, {rows, cols}}};
  p.outputs = {{"out0", dt, {rows}}};
  Expr term = Ld("x", dt, V("r", cols) + V("c"));
  if (Uniform(0, 1, rng)) term = Bin(BinaryOp::kMul, dt, term, Expr::Constant(dt, 2));
  p.body = Stmt::Seq({Loop(
      "r", rows,
      {Stmt::Store("out0", V("r"), Expr::Constant(dt, 0)),
       Loop("c", cols,
            {Stmt::Store("out0", V("r"),
                         Bin(BinaryOp::kAdd, dt, Ld("out0", dt, V("r")), std::move(term)))})})});
  return p;
}

LoopProgram Matmul(const CatalogEntry& e, std::mt19937_64& rng) {
  const int64_t m = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t n = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t k = Uniform(e.min_extent, e.max_extent, rng);
  const DType dt = PickDType(e, {DType::kF32, DType::kI32}, rng);
  LoopProgram p;
  p.name = "matmul";
  p.inputs = {{"a", dt, {m, k}}, {"b", dt, {k, n}}};
  p.outputs = {{"out0", dt, {m, n}}};
  const Affine o = V("i", n) + V("j");
  const Expr prod = Bin(BinaryOp::kMul, dt, Ld("a", dt, V("i", k) + V("k")),
                        Ld("b", dt, V("k", n) + V("j")));
  p.body = Stmt::Seq({Loop(
      "i", m,
      {Loop("j", n,
            {Stmt::Store("out0", o, Expr::Constant(dt, 0)),
             Loop("k", k,
                  {Stmt::Store("out0", o, Bin(BinaryOp::kAdd, dt, Ld("out0", dt, o), prod))})})})});
  return p;
}

// 1-D valid convolution over channels: out[o, l] = sum_c,k x[c, l+k] w[o, c, k].
LoopProgram Conv(const CatalogEntry& e, std::mt19937_64& rng) {
  const int64_t c = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t len = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t oc = Uniform(e.min_extent, e.max_extent, rng);
  const int64_t kw = Uniform(e.min_extent, std::min<int64_t>(e.max_extent, 5), rng);
  const DType dt = PickDType(e, {DType::kF32}, rng);
  const int64_t width = len + kw - 1;
  LoopProgram p;
  p.name = "conv";
  p.inputs = {{"x", dt, {c, width}}, {"w", dt, {oc, c, kw}}};
  p.outputs = {{"out0", dt, {oc, len}}};
  const Affine o = V("o", len) + V("l");
  const Expr prod = Bin(BinaryOp::kMul, dt, Ld("x", dt, V("c", width) + V("l") + V("k")),
                        Ld("w", dt, V("o", c * kw) + V("c", kw) + V("k")));
  p.body = Stmt::Seq({Loop(
      "o", oc,
      {Loop("l", len,
            {Stmt::Store("out0", o, Expr::Constant(dt, 0)),
             Loop("c", c,
                  {Loop("k", kw, {Stmt::Store("out0", o,
                                              Bin(BinaryOp::kAdd, dt, Ld("out0", dt, o),
                                                  prod))})})})})});
  return p;
}

LoopProgram Stencil(const CatalogEntry& e, std::mt19937_64& rng) {
  const int64_t n = Uniform(e.min_extent, e.max_extent, rng);
  const DType dt = PickDType(e, {DType::kF32}, rng);
  LoopProgram p;
  p.name = "stencil";
  p.inputs = {{"x", dt, {n + 2}}};
  p.outputs = {{"out0", dt, {n}}};
  Expr sum = Bin(BinaryOp::kAdd, dt,
                 Bin(BinaryOp::kAdd, dt, Ld("x", dt, V("i")), Ld("x", dt, V("i") + 1)),
                 Ld("x", dt, V("i") + 2));
  p.body = Stmt::Seq({Loop(
      "i", n,
      {Stmt::Store("out0", V("i"),
                   Bin(BinaryOp::kMul, dt, std::move(sum), Expr::Constant(dt, 0.25)))})});
  return p;
}

LoopProgram BuiltinSeed(const CatalogEntry& e, std::mt19937_64& rng) {
  switch (e.tmpl) {
    case Template::kElementwise: return Elementwise(e, rng);
    case Template::kReduction: return Reduction(e, rng);
    case Template::kMatmul: return Matmul(e, rng);
    case Template::kConv: return Conv(e, rng);
    case Template::kStencil: return Stencil(e, rng);
  }
  return Elementwise(e, rng);
}

// Empty when `p` stays inside the entry's ranges.
std::string EntryViolation(const LoopProgram& p, const CatalogEntry& e) {
  for (const auto* bufs : {&p.inputs, &p.outputs})
    for (const auto& b : *bufs)
      if (!e.dtypes.count(b.dtype)) return "dtype " + std::string(DTypeName(b.dtype));
  std::string why;
  loop::VisitStmts(p.body, [&](const Stmt& s, const StmtPath&) {
    if (s.kind != StmtKind::kFor || !why.empty()) return;
    const auto trip = s.ConstantTrip();
    if (!trip) {
      why = "loop " + s.var + " has symbolic bounds";
    } else if (*trip < e.min_extent || *trip > e.max_extent) {
      why = "loop " + s.var + " trip " + std::to_string(*trip) + " out of range";
    }
  });
  return why;
}

std::string ConstraintSummary(const CatalogEntry& e) {
  json j;
  j["extent"] = {e.min_extent, e.max_extent};
  j["dtypes"] = json::array();
  for (DType d : e.dtypes) j["dtypes"].push_back(std::string(DTypeName(d)));
  j["lanes"] = json(std::vector<int>(e.lanes.begin(), e.lanes.end()));
  j["annotations"] = json::array();
  for (const auto& row : e.annotations) {
    json r = json::array();
    for (AnnKind k : row) r.push_back(std::string(AnnKindName(k)));
    j["annotations"].push_back(r);
  }
  return j.dump();
}

}  // namespace

Seed GenerateSeed(const Catalog& catalog, Template t, uint64_t seed, Provider* provider,
                  SeedReport* report) {
  const CatalogEntry* e = catalog.Usable(t);
  if (!e)
    throw Error(ErrorKind::kConfigError,
                "template " + std::string(TemplateName(t)) + " is disputed or missing");
  if (provider) {
    std::string incident;
    if (auto text = provider->Request("seed", std::string(TemplateName(t)),
                                      ConstraintSummary(*e), seed, &incident)) {
      try {
        LoopProgram p = loop::StripAnnotations(loop::ParseLoop(*text));
        const auto problems = loop::ValidateProgram(p);
        if (!problems.empty()) throw Error(ErrorKind::kInvalidParam, problems.front());
        const std::string why = EntryViolation(p, *e);
        if (!why.empty()) throw Error(ErrorKind::kInvalidParam, why);
        return {std::move(p), t, "provider:" + std::string(TemplateName(t))};
      } catch (const Error& err) {
        incident = std::string("provider seed rejected: ") + err.what();
      }
    }
    if (report)
      report->incidents.push_back(std::string(TemplateName(t)) + " seed " +
                                  std::to_string(seed) + ": " + incident + "; builtin fallback");
  }
  std::mt19937_64 rng(Mix(seed ^ (static_cast<uint64_t>(t) << 56)));
  return {BuiltinSeed(*e, rng), t, "builtin:" + std::string(TemplateName(t))};
}

std::vector<Seed> BuildSeedPool(const Catalog& catalog, int per_template, uint64_t seed,
                                const std::string& seed_dir, Provider* provider,
                                SeedReport* report) {
  std::vector<Seed> pool;
  std::set<uint64_t> seen;
  auto add = [&](Seed s) {
    if (seen.insert(ProgramHash(s.program)).second) pool.push_back(std::move(s));
  };
  for (Template t : AllTemplates()) {
    if (!catalog.Usable(t)) continue;
    for (int k = 0; k < per_template; ++k)
      add(GenerateSeed(catalog, t, Mix(seed + static_cast<uint64_t>(k)), provider, report));
  }
  for (const auto& path : FilesWithExtension(seed_dir, ".lir")) {
    LoopProgram p = loop::StripAnnotations(loop::LoadLoopFile(path.string()));
    add({std::move(p), std::nullopt, "file:" + path.filename().string()});
  }
  return pool;
}

// --- rules -----------------------------------------------------------------

Predicate ParsePredicate(const std::string& text) {
  static const std::map<std::string, Predicate::Kind> plain = {
      {"innermost", Predicate::kInnermost},
      {"outermost", Predicate::kOutermost},
      {"serial", Predicate::kSerial},
      {"constant_bounds", Predicate::kConstantBounds},
      {"no_dependence", Predicate::kNoDependence},
      {"dependence", Predicate::kDependence},
      {"f32_add_store", Predicate::kF32AddStore},
      {"cache_candidate", Predicate::kCacheCandidate},
  };
  static const std::regex mod(R"(^trip\s*%\s*(\d+)\s*(==|=|!=)\s*0$)");
  static const std::regex cmp(R"(^trip\s*(>=|>)\s*(\d+)$)");
  Predicate p;
  p.text = text;
  std::smatch m;
  if (auto it = plain.find(text); it != plain.end()) {
    p.kind = it->second;
  } else if (std::regex_match(text, m, mod)) {
    p.k = std::stoll(m[1].str());
    if (p.k <= 0) throw Error(ErrorKind::kDocParseError, "bad modulus in " + text);
    p.kind = m[2].str() == "!=" ? Predicate::kTripNotMod : Predicate::kTripMod;
  } else if (std::regex_match(text, m, cmp)) {
    p.k = std::stoll(m[2].str());
    p.kind = m[1].str() == ">" ? Predicate::kTripGreater : Predicate::kTripAtLeast;
  } else {
    throw Error(ErrorKind::kDocParseError, "unknown precondition '" + text + "'");
  }
  return p;
}

Action ParseAction(const std::string& text) {
  static const std::regex attach(R"(^attach\s+(\w+)(?:\((\d+)\))?$)");
  static const std::regex call(R"(^(split_swap|cache_pipeline)\((\d+)\)$)");
  Action a;
  a.text = text;
  std::smatch m;
  if (std::regex_match(text, m, attach)) {
    const auto kind = ParseAnnKind(m[1].str());
    if (!kind || *kind == AnnKind::kSerial)
      throw Error(ErrorKind::kDocParseError, "cannot attach '" + m[1].str() + "'");
    a.kind = Action::kAttach;
    a.ann = {*kind, m[2].matched ? std::stoi(m[2].str()) : 0};
    if (!a.ann.Valid()) throw Error(ErrorKind::kDocParseError, "invalid annotation in " + text);
  } else if (std::regex_match(text, m, call)) {
    a.kind = m[1].str() == "split_swap" ? Action::kSplitSwap : Action::kCachePipeline;
    a.factor = std::stoi(m[2].str());
    if (a.factor < 2) throw Error(ErrorKind::kDocParseError, "factor below 2 in " + text);
  } else if (text == "expose_fma") {
    a.kind = Action::kExposeFma;
  } else {
    throw Error(ErrorKind::kDocParseError, "unknown action '" + text + "'");
  }
  return a;
}

std::vector<MutationRule> ParseRuleDoc(const std::string& text, const std::string& file) {
  const YAML::Node doc = LoadYaml(FrontMatter(text));
  if (!doc.IsMap() || !doc["pass"]) throw Error(ErrorKind::kDocParseError, "missing pass");
  const std::string pass_name = Scalar<std::string>(doc["pass"], "pass");
  const auto pass = ll::ParseLLPassId(pass_name);
  if (!pass) throw Error(ErrorKind::kDocParseError, "unknown pass " + pass_name);
  const std::string section =
      doc["section"] ? Scalar<std::string>(doc["section"], "section") : pass_name;
  if (!doc["triggers"]) throw Error(ErrorKind::kDocParseError, "missing triggers");

  std::vector<MutationRule> rules;
  for (const auto& t : Sequence(doc["triggers"], "triggers")) {
    if (!t.IsMap()) throw Error(ErrorKind::kDocParseError, "trigger must be a mapping");
    const std::string id = t["id"] ? Scalar<std::string>(t["id"], "id") : "";
    if (id.empty()) throw Error(ErrorKind::kDocParseError, "trigger without id");
    for (const char* field : {"trigger", "precondition", "action", "example"})
      if (!t[field])
        throw Error(ErrorKind::kDocParseError, "trigger " + id + ": missing " + field);
    MutationRule r;
    r.id = id;
    r.target = *pass;
    r.trigger = Scalar<std::string>(t["trigger"], "trigger");
    for (const auto& pre : Sequence(t["precondition"], "precondition"))
      r.guard.push_back(ParsePredicate(Scalar<std::string>(pre, "precondition")));
    r.action = ParseAction(Scalar<std::string>(t["action"], "action"));
    r.example = Scalar<std::string>(t["example"], "example");
    r.provenance = file + "#" + section;
    rules.push_back(std::move(r));
  }
  return rules;
}

// --- mutation --------------------------------------------------------------

namespace {

bool ContainsLoop(const std::vector<Stmt>& body) {
  for (const auto& s : body)
    if (s.kind == StmtKind::kFor || ContainsLoop(s.body)) return true;
  return false;
}

bool IsF32(const Expr& e, BinaryOp op) {
  return e.kind == ExprKind::kBinary && e.bop == op && e.dtype == DType::kF32;
}

// Index of the first direct child store of `loop` whose value is a plain
// F32 add, or -1.
int F32AddStore(const Stmt& loop) {
  for (size_t i = 0; i < loop.body.size(); ++i) {
    const Stmt& s = loop.body[i];
    if (s.kind != StmtKind::kStore || !IsF32(s.value, BinaryOp::kAdd)) continue;
    if (IsF32(s.value.args[0], BinaryOp::kMul) || IsF32(s.value.args[1], BinaryOp::kMul)) continue;
    return static_cast<int>(i);
  }
  return -1;
}

void CollectWrites(const Stmt& s, std::set<std::string>& out) {
  if (s.kind == StmtKind::kStore) out.insert(s.buffer);
  for (const auto& c : s.body) CollectWrites(c, out);
}

const Expr* FirstLoadNotIn(const Expr& e, const std::set<std::string>& written) {
  if (e.kind == ExprKind::kLoad && !written.count(e.buffer)) return &e;
  for (const auto& a : e.args)
    if (const Expr* hit = FirstLoadNotIn(a, written)) return hit;
  return nullptr;
}

// A load in a direct child store of an innermost loop whose buffer the body
// never writes. Loads under an If are not hoisted: they may be guarded.
const Expr* CacheLoad(const Stmt& loop) {
  if (ContainsLoop(loop.body)) return nullptr;
  std::set<std::string> written;
  for (const auto& c : loop.body) {
    if (c.kind == StmtKind::kAlloc) return nullptr;
    CollectWrites(c, written);
  }
  for (const auto& c : loop.body) {
    if (c.kind != StmtKind::kStore) continue;
    if (const Expr* hit = FirstLoadNotIn(c.value, written)) return hit;
  }
  return nullptr;
}

struct Site {
  StmtPath path;
  int depth = 0;
};

bool Holds(const Predicate& pr, const Stmt& loop, int depth) {
  const auto trip = loop.ConstantTrip();
  switch (pr.kind) {
    case Predicate::kInnermost: return !ContainsLoop(loop.body);
    case Predicate::kOutermost: return depth == 0;
    case Predicate::kSerial: return loop.ann.kind == AnnKind::kSerial;
    case Predicate::kConstantBounds: return loop.lo.IsConstant() && loop.hi.IsConstant();
    case Predicate::kNoDependence: return !ll::HasLoopCarriedDependence(loop);
    case Predicate::kDependence: return ll::HasLoopCarriedDependence(loop);
    case Predicate::kTripMod: return trip && *trip % pr.k == 0;
    case Predicate::kTripNotMod: return trip && *trip % pr.k != 0;
    case Predicate::kTripGreater: return trip && *trip > pr.k;
    case Predicate::kTripAtLeast: return trip && *trip >= pr.k;
    case Predicate::kF32AddStore: return F32AddStore(loop) >= 0;
    case Predicate::kCacheCandidate: return CacheLoad(loop) != nullptr;
  }
  return false;
}

// Whether the action itself can apply, independent of the guard.
bool Applicable(const Action& a, const Stmt& loop, int depth, const CatalogEntry* policy) {
  const auto trip = loop.ConstantTrip();
  switch (a.kind) {
    case Action::kAttach:
      if (loop.ann.kind != AnnKind::kSerial) return false;
      if (policy && !policy->Allows(depth, a.ann.kind)) return false;
      if (policy && a.ann.kind == AnnKind::kVectorize && !policy->lanes.empty() &&
          !policy->lanes.count(a.ann.param))
        return false;
      return true;
    case Action::kSplitSwap:
      return loop.ann.kind == AnnKind::kSerial && loop.lo.IsConstant() && trip &&
             *trip % a.factor == 0 && *trip / a.factor >= 2;
    case Action::kExposeFma: return F32AddStore(loop) >= 0;
    case Action::kCachePipeline:
      if (loop.ann.kind != AnnKind::kSerial || !trip || *trip < a.factor) return false;
      if (policy && !policy->Allows(depth, AnnKind::kPipelined)) return false;
      return CacheLoad(loop) != nullptr;
  }
  return false;
}

void WalkLoops(const Stmt& s, StmtPath& path, int depth,
               const std::function<void(const Stmt&, const StmtPath&, int)>& fn) {
  for (size_t i = 0; i < s.body.size(); ++i) {
    path.push_back(static_cast<int>(i));
    const Stmt& c = s.body[i];
    if (c.kind == StmtKind::kFor) fn(c, path, depth);
    WalkLoops(c, path, depth + (c.kind == StmtKind::kFor), fn);
    path.pop_back();
  }
}

std::vector<Site> Sites(const LoopProgram& p, const MutationRule& rule,
                        const CatalogEntry* policy) {
  std::vector<Site> sites;
  StmtPath path;
  WalkLoops(p.body, path, 0, [&](const Stmt& loop, const StmtPath& at, int depth) {
    for (const auto& pr : rule.guard)
      if (!Holds(pr, loop, depth)) return;
    if (Applicable(rule.action, loop, depth, policy)) sites.push_back({at, depth});
  });
  return sites;
}

void SubstExpr(Expr& e, const std::string& var, const Affine& with) {
  if (e.kind == ExprKind::kLoad) e.index = e.index.Substitute(var, with);
  for (auto& a : e.args) SubstExpr(a, var, with);
}

void SubstStmt(Stmt& s, const std::string& var, const Affine& with) {
  s.lo = s.lo.Substitute(var, with);
  s.hi = s.hi.Substitute(var, with);
  s.index = s.index.Substitute(var, with);
  for (auto& c : s.conds) c = c.Substitute(var, with);
  SubstExpr(s.value, var, with);
  for (auto& c : s.body) SubstStmt(c, var, with);
}

void ReplaceLoads(Expr& e, const Expr& target, const Expr& with) {
  if (e == target) {
    e = with;
    return;
  }
  for (auto& a : e.args) ReplaceLoads(a, target, with);
}

void ReplaceLoads(Stmt& s, const Expr& target, const Expr& with) {
  ReplaceLoads(s.value, target, with);
  for (auto& c : s.body) ReplaceLoads(c, target, with);
}

std::set<std::string> UsedNames(const LoopProgram& p) {
  std::set<std::string> names;
  for (const auto* bufs : {&p.inputs, &p.outputs})
    for (const auto& b : *bufs) names.insert(b.name);
  for (const auto& c : p.constants) names.insert(c.buffer.name);
  loop::VisitStmts(p.body, [&](const Stmt& s, const StmtPath&) {
    if (s.kind == StmtKind::kFor) names.insert(s.var);
    if (s.kind == StmtKind::kAlloc) names.insert(s.alloc.name);
  });
  return names;
}

std::string Fresh(std::set<std::string>& used, const std::string& base) {
  std::string name = base;
  for (int k = 0; used.count(name); ++k) name = base + std::to_string(k);
  used.insert(name);
  return name;
}

LoopProgram ApplyAt(const LoopProgram& p, const Action& action, const StmtPath& path) {
  LoopProgram out = p;
  std::set<std::string> used = UsedNames(p);
  Stmt& loop = *loop::Resolve(out.body, path);
  switch (action.kind) {
    case Action::kAttach: loop.ann = action.ann; break;
    case Action::kSplitSwap: {
      // for v: B(v)  =>  for vi in 0..f: for vo in 0..trip/f: B(lo + f*vo + vi)
      const int64_t f = action.factor, trip = *loop.ConstantTrip(), lo = loop.lo.constant;
      const std::string vi = Fresh(used, loop.var + "_i"), vo = Fresh(used, loop.var + "_o");
      std::vector<Stmt> body = std::move(loop.body);
      for (auto& s : body) SubstStmt(s, loop.var, Affine::Var(vo, f) + Affine::Var(vi) + lo);
      loop = Stmt::For(vi, K(0), K(f), {Stmt::For(vo, K(0), K(trip / f), std::move(body))});
      break;
    }
    case Action::kExposeFma: {
      Expr& add = loop.body[static_cast<size_t>(F32AddStore(loop))].value;
      add.args[0] = Bin(BinaryOp::kMul, DType::kF32, add.args[0],
                        Expr::Constant(DType::kF32, 1.0));
      break;
    }
    case Action::kCachePipeline: {
      const Expr target = *CacheLoad(loop);
      const std::string stage = Fresh(used, "stg");
      const Expr staged = Expr::Load(stage, target.dtype, K(0));
      for (auto& s : loop.body) ReplaceLoads(s, target, staged);
      std::vector<Stmt> body = {Stmt::Alloc({stage, target.dtype, {1}}, loop::Scope::kCache),
                                Stmt::Store(stage, K(0), target)};
      for (auto& s : loop.body) body.push_back(std::move(s));
      loop.body = std::move(body);
      loop.ann = Annotation::Pipelined(action.factor);
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<StmtPath> MatchSites(const LoopProgram& p, const MutationRule& rule,
                                 const CatalogEntry* policy) {
  std::vector<StmtPath> out;
  for (auto& s : Sites(p, rule, policy)) out.push_back(std::move(s.path));
  return out;
}

bool ProbeEquivalent(const LoopProgram& a, const LoopProgram& b, uint64_t seed) {
  const LoopProgram ra = loop::StripAnnotations(a), rb = loop::StripAnnotations(b);
  for (int k = 0; k < kProbeInputs; ++k) {
    const auto inputs = loop::RandomLoopBindings(ra, Mix(seed + static_cast<uint64_t>(k)));
    std::optional<ErrorKind> fa, fb;
    std::map<std::string, TensorValue> va, vb;
    try {
      va = loop::InterpretLoop(ra, inputs);
    } catch (const Error& e) {
      fa = e.kind();
    }
    try {
      vb = loop::InterpretLoop(rb, inputs);
    } catch (const Error& e) {
      fb = e.kind();
    }
    if (fa || fb) {
      if (fa != fb) return false;
      continue;
    }
    if (va.size() != vb.size()) return false;
    for (const auto& [name, value] : va) {
      auto it = vb.find(name);
      if (it == vb.end() || !CompareTensors(value, it->second, kDefaultTolerance).equal)
        return false;
    }
  }
  return true;
}

MutationResult Mutate(const LoopProgram& p, const MutationRule& rule, std::mt19937_64& rng,
                      const CatalogEntry* policy) {
  const auto sites = Sites(p, rule, policy);
  if (sites.empty())
    throw Error(ErrorKind::kMutationInapplicable, rule.id + " matches no loop of " + p.name);
  const StmtPath site = PickFrom(sites, rng).path;
  LoopProgram out = ApplyAt(p, rule.action, site);
  const uint64_t probe = rng();
  const auto problems = loop::ValidateProgram(out);
  if (!problems.empty())
    throw Error(ErrorKind::kRuleRejected,
                rule.id + " (" + rule.provenance + ") produced an invalid program: " +
                    problems.front());
  if (!ProbeEquivalent(p, out, probe))
    throw Error(ErrorKind::kRuleRejected, rule.id + " (" + rule.provenance +
                                              ") changed results at " + loop::PathToString(site));
  return {std::move(out), site};
}

RuleReport ExtractRules(const std::string& docs_dir, Provider* provider,
                        const std::vector<Seed>& probe_seeds) {
  RuleReport report;
  std::set<std::string> ids;
  for (const auto& path : FilesWithExtension((fs::path(docs_dir) / "llpasses").string(), ".md")) {
    const std::string file = "llpasses/" + path.filename().string();
    std::string text;
    try {
      text = ReadText(path.string());
      for (auto& r : ParseRuleDoc(text, file)) {
        if (!ids.insert(r.id).second)
          throw Error(ErrorKind::kDocParseError, "duplicate rule id " + r.id);
        report.rules.push_back(std::move(r));
      }
    } catch (const Error& e) {
      report.problems.push_back(file + ": " + e.what());
      continue;
    }
    if (!provider) continue;

    std::string incident;
    const auto reply = provider->Request("rules", path.stem().string(), text, 0, &incident);
    if (!reply) {
      report.incidents.push_back(file + ": " + incident);
      continue;
    }
    std::vector<MutationRule> proposed;
    try {
      proposed = ParseRuleDoc(*reply, "provider:" + file);
    } catch (const Error& e) {
      report.rejected.push_back("provider:" + file + ": " + e.what());
      continue;
    }
    for (auto& r : proposed) {
      std::string why;
      if (ids.count(r.id)) why = "duplicate rule id";
      bool applied = false;
      for (size_t s = 0; s < probe_seeds.size() && why.empty(); ++s) {
        const LoopProgram& seed = probe_seeds[s].program;
        for (const auto& site : Sites(seed, r, nullptr)) {
          const LoopProgram out = ApplyAt(seed, r.action, site.path);
          applied = true;
          if (!loop::ValidateProgram(out).empty() || !ProbeEquivalent(seed, out, Mix(s))) {
            why = "probe failed on " + seed.name + " at " + loop::PathToString(site.path);
            break;
          }
        }
      }
      if (why.empty() && !applied) why = "applies to no sample seed";
      if (!why.empty()) {
        report.rejected.push_back(
            Error(ErrorKind::kRuleRejected, r.id + " (" + r.provenance + "): " + why).what());
        continue;
      }
      ids.insert(r.id);
      report.rules.push_back(std::move(r));
    }
  }
  return report;
}

// --- stream ----------------------------------------------------------------

MutationStream::MutationStream(std::vector<Seed> pool, std::vector<MutationRule> rules,
                               Catalog catalog, uint64_t seed, bool use_rules)
    : pool_(std::move(pool)),
      rules_(std::move(rules)),
      catalog_(std::move(catalog)),
      seed_(seed),
      use_rules_(use_rules) {
  if (pool_.empty()) throw Error(ErrorKind::kConfigError, "empty seed pool");
}

MutationStream::Test MutationStream::Get(int64_t index) const {
  std::mt19937_64 rng(Mix(seed_ ^ Mix(static_cast<uint64_t>(index) + 0x5eed)));
  Test t;
  t.seed_index = static_cast<int>(Uniform(0, static_cast<int64_t>(pool_.size()) - 1, rng));
  const Seed& seed = pool_[static_cast<size_t>(t.seed_index)];
  t.program = seed.program;
  t.lineage = seed.origin;
  if (!use_rules_ || rules_.empty()) return t;

  const CatalogEntry* policy = seed.tmpl ? catalog_.Usable(*seed.tmpl) : nullptr;
  const int64_t depth = Uniform(1, kMaxStack, rng);
  for (int64_t d = 0; d < depth; ++d) {
    std::vector<size_t> order(rules_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t i : order) {
      try {
        t.program = Mutate(t.program, rules_[i], rng, policy).program;
        t.applied.push_back(rules_[i].id);
        t.lineage += "+" + rules_[i].id;
        break;
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kMutationInapplicable && e.kind() != ErrorKind::kRuleRejected)
          throw;
      }
    }
  }
  return t;
}

}  // namespace stagefuzz::harmony

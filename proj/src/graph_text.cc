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

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stagefuzz/error.h"
#include "stagefuzz/graph.h"
#include "text_util.h"

namespace stagefuzz::graph {

namespace {

constexpr size_t kInlineLimit = 64;

std::string FormatPayload(const std::vector<double>& data, DType dtype) {
  std::string out;
  for (size_t i = 0; i < data.size(); ++i) {
    if (i) out += ',';
    out += text::FormatNumber(data[i], dtype);
  }
  return out;
}

}  // namespace

std::string SerializeGraph(const Graph& g, Sidecars* sidecars) {
  std::ostringstream os;
  os << "graph " << g.name << "\n";
  for (const auto& [id, node] : g.nodes) {
    os << "node " << id << ' ' << OpKindName(node.kind) << " inputs=[";
    for (size_t i = 0; i < node.inputs.size(); ++i) {
      if (i) os << ',';
      os << node.inputs[i];
    }
    os << "] params={";
    bool first = true;
    for (const auto& [k, v] : node.params) {
      if (!first) os << ',';
      first = false;
      os << k << '=' << ParamToString(v);
    }
    if (node.kind == OpKind::kFusedGroup) {
      if (!first) os << ',';
      os << "body=" << EncodeFusedBody(node.fused);
    }
    os << "} type=" << node.out_type.ToString();
    if (node.kind == OpKind::kConstant) {
      if (sidecars != nullptr && node.payload.size() > kInlineLimit) {
        const std::string rel = g.name + ".n" + std::to_string(id) + ".data";
        std::string body;
        for (double v : node.payload) {
          body += text::FormatNumber(v, node.out_type.dtype);
          body += '\n';
        }
        (*sidecars)[rel] = std::move(body);
        os << " data=@" << rel;
      } else {
        os << " data=[" << FormatPayload(node.payload, node.out_type.dtype) << ']';
      }
    }
    os << "\n";
  }
  os << "outputs=[";
  for (size_t i = 0; i < g.outputs.size(); ++i) {
    if (i) os << ',';
    os << g.outputs[i];
  }
  os << "]\n";
  return os.str();
}

namespace {

ParamValue ParseParamValue(text::Cursor& c) {
  if (c.Peek() == '[') {
    std::vector<int64_t> list;
    c.Expect('[');
    if (!c.TryConsume(']')) {
      do {
        list.push_back(c.Integer());
      } while (c.TryConsume(','));
      c.Expect(']');
    }
    return list;
  }
  if (c.Peek() == '-' || std::isdigit(static_cast<unsigned char>(c.Peek())))
    return c.Integer();
  return c.Word("|:.-");
}

TensorType ParseTensorType(text::Cursor& c) {
  const int col = c.column();
  std::string dt = c.Word();
  auto dtype = ParseDType(dt);
  if (!dtype) c.Fail("unknown dtype '" + dt + "'", col);
  TensorType t{*dtype, {}};
  c.Expect('[');
  if (!c.TryConsume(']')) {
    do {
      t.shape.push_back(c.Integer());
    } while (c.TryConsume(','));
    c.Expect(']');
  }
  return t;
}

std::vector<double> ParseNumberList(text::Cursor& c) {
  std::vector<double> values;
  c.Expect('[');
  if (!c.TryConsume(']')) {
    do {
      values.push_back(c.Number());
    } while (c.TryConsume(','));
    c.Expect(']');
  }
  return values;
}

}  // namespace

Graph ParseGraph(std::string_view src, const SidecarResolver& resolver) {
  Graph g;
  g.name = "g";
  bool saw_outputs = false;
  int line_no = 0;
  for (const std::string& raw : text::SplitLines(src)) {
    ++line_no;
    text::Cursor c(raw, line_no);
    c.SkipSpace();
    if (c.AtEnd() || c.Peek() == '#') continue;
    if (saw_outputs) c.Fail("content after outputs line");
    const int col = c.column();
    const std::string head = c.Word("=");
    if (head == "graph") {
      g.name = c.Word("._-");
      c.ExpectEnd();
    } else if (head == "outputs=") {
      c.Expect('[');
      if (!c.TryConsume(']')) {
        do {
          g.outputs.push_back(c.Integer());
        } while (c.TryConsume(','));
        c.Expect(']');
      }
      c.ExpectEnd();
      saw_outputs = true;
    } else if (head == "node") {
      Node n;
      n.id = c.Integer();
      c.SkipSpace();
      const int kind_col = c.column();
      const std::string kind_name = c.Word();
      auto kind = ParseOpKind(kind_name);
      if (!kind) c.Fail("unknown operator kind '" + kind_name + "'", kind_col);
      n.kind = *kind;
      c.Keyword("inputs=");
      c.Expect('[');
      if (!c.TryConsume(']')) {
        do {
          n.inputs.push_back(c.Integer());
        } while (c.TryConsume(','));
        c.Expect(']');
      }
      c.Keyword("params=");
      c.Expect('{');
      if (!c.TryConsume('}')) {
        do {
          const std::string key = c.Word();
          c.Expect('=');
          n.params[key] = ParseParamValue(c);
        } while (c.TryConsume(','));
        c.Expect('}');
      }
      c.Keyword("type=");
      n.out_type = ParseTensorType(c);
      if (n.kind == OpKind::kFusedGroup) {
        auto it = n.params.find("body");
        if (it == n.params.end() || !std::holds_alternative<std::string>(it->second))
          c.Fail("FusedGroup without body", kind_col);
        try {
          n.fused = DecodeFusedBody(std::get<std::string>(it->second));
        } catch (const Error& e) {
          c.Fail(e.detail(), kind_col);
        }
        n.params.erase(it);
      }
      if (n.kind == OpKind::kConstant) {
        c.Keyword("data=");
        if (c.TryConsume('@')) {
          const std::string rel = c.Word("./_-");
          if (!resolver) c.Fail("sidecar reference without a resolver");
          std::istringstream is(resolver(rel));
          std::string tok;
          while (is >> tok) n.payload.push_back(text::ParseNumberToken(tok));
        } else {
          n.payload = ParseNumberList(c);
        }
      }
      c.ExpectEnd();
      if (g.nodes.count(n.id)) c.Fail("duplicate node id " + std::to_string(n.id));
      g.nodes[n.id] = std::move(n);
    } else {
      c.Fail("expected 'graph', 'node' or 'outputs='", col);
    }
  }
  if (!saw_outputs) throw ParseError(line_no + 1, 1, "missing outputs list");
  return g;
}

Graph LoadGraphFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kTestLoadError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return ParseGraph(buf.str(), [dir](const std::string& rel) {
    std::ifstream f(dir / rel);
    if (!f) throw Error(ErrorKind::kTestLoadError, "missing sidecar " + rel);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  });
}

}  // namespace stagefuzz::graph

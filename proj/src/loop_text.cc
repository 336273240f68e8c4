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

// Loop-IR text form:
//
//   program matmul
//   input a: F32[4,4]
//   output out0: F32[4,4]
//   const c1: F32[2] = [1,2]
//   intrinsics: fma
//   body:
//     alloc global t2: F32[4,4]
//     for i0 in 0 .. 4 @parallel:
//       t2[4*i0] = add.f32(load a[i0], const.f32(1))
//     if i0 - 1 >= 0, 3 - i0 >= 0:
//       ...

#include <cctype>
#include <fstream>
#include <sstream>

#include "stagefuzz/error.h"
#include "stagefuzz/loop_ir.h"
#include "text_util.h"

namespace stagefuzz::loop {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string TypeText(const Buffer& b) { return b.type().ToString(); }

void PrintStmt(const Stmt& s, int depth, std::ostringstream& os);

void PrintBlock(const std::vector<Stmt>& body, int depth, std::ostringstream& os) {
  for (const auto& s : body) PrintStmt(s, depth, os);
}

void PrintStmt(const Stmt& s, int depth, std::ostringstream& os) {
  const std::string pad(2 * depth, ' ');
  switch (s.kind) {
    case StmtKind::kFor:
      os << pad << "for " << s.var << " in " << s.lo.ToString() << " .. " << s.hi.ToString();
      if (s.ann.kind != AnnKind::kSerial) os << ' ' << s.ann.Suffix();
      os << ":\n";
      PrintBlock(s.body, depth + 1, os);
      break;
    case StmtKind::kStore:
      os << pad << s.buffer << '[' << s.index.ToString() << "] = " << ExprToString(s.value)
         << '\n';
      break;
    case StmtKind::kAlloc:
      os << pad << "alloc " << ScopeName(s.scope) << ' ' << s.alloc.name << ": "
         << TypeText(s.alloc) << '\n';
      break;
    case StmtKind::kSeq:
      os << pad << "seq:\n";
      PrintBlock(s.body, depth + 1, os);
      break;
    case StmtKind::kIf:
      os << pad << "if ";
      for (size_t i = 0; i < s.conds.size(); ++i) {
        if (i) os << ", ";
        os << s.conds[i].ToString() << " >= 0";
      }
      os << ":\n";
      PrintBlock(s.body, depth + 1, os);
      break;
  }
}

// ------------------------------------------------------------------ Parser

struct Line {
  int indent;
  int line_no;
  std::string text;
};

class Parser {
 public:
  explicit Parser(std::string_view src) {
    int no = 0;
    for (const std::string& raw : text::SplitLines(src)) {
      ++no;
      size_t i = 0;
      while (i < raw.size() && raw[i] == ' ') ++i;
      if (i < raw.size() && raw[i] == '\t')
        throw ParseError(no, static_cast<int>(i) + 1, "tabs are not allowed for indentation");
      if (i == raw.size() || raw[i] == '#') continue;
      lines_.push_back({static_cast<int>(i), no, raw});
    }
  }

  LoopProgram Run() {
    LoopProgram p;
    bool saw_program = false, saw_body = false;
    while (pos_ < lines_.size() && !saw_body) {
      const Line& l = lines_[pos_++];
      text::Cursor c(l.text, l.line_no);
      c.SkipSpace();
      if (l.indent != 0) c.Fail("unexpected indentation in header");
      const int col = c.column();
      const std::string head = c.Word();
      if (head == "program") {
        p.name = c.Word("._-");
        saw_program = true;
      } else if (head == "input" || head == "output") {
        Buffer b = ParseDecl(c);
        (head == "input" ? p.inputs : p.outputs).push_back(std::move(b));
      } else if (head == "const") {
        ConstBuffer cb{ParseDecl(c), {}};
        c.Expect('=');
        c.Expect('[');
        if (!c.TryConsume(']')) {
          do {
            cb.data.push_back(c.Number());
          } while (c.TryConsume(','));
          c.Expect(']');
        }
        p.constants.push_back(std::move(cb));
      } else if (head == "intrinsics") {
        c.Expect(':');
        c.SkipSpace();
        while (!c.AtEnd()) {
          p.intrinsics_used.insert(c.Word("."));
          if (!c.TryConsume(',')) break;
        }
      } else if (head == "body") {
        c.Expect(':');
        saw_body = true;
      } else {
        c.Fail("unknown header '" + head + "'", col);
      }
      c.ExpectEnd();
    }
    if (!saw_program) throw ParseError(1, 1, "missing 'program' line");
    if (!saw_body) throw ParseError(LastLine() + 1, 1, "missing 'body:' section");
    if (pos_ < lines_.size()) {
      const int indent = lines_[pos_].indent;
      if (indent == 0) Fail(lines_[pos_], "body statements must be indented");
      p.body.body = Block(indent);
    }
    if (pos_ < lines_.size()) Fail(lines_[pos_], "unexpected dedent");
    return p;
  }

 private:
  int LastLine() const { return lines_.empty() ? 0 : lines_.back().line_no; }

  [[noreturn]] static void Fail(const Line& l, const std::string& msg) {
    throw ParseError(l.line_no, l.indent + 1, msg);
  }

  static Buffer ParseDecl(text::Cursor& c) {
    Buffer b;
    b.name = c.Word();
    c.Expect(':');
    c.SkipSpace();
    const int col = c.column();
    const std::string dt = c.Word();
    auto dtype = ParseDType(dt);
    if (!dtype) c.Fail("unknown dtype '" + dt + "'", col);
    b.dtype = *dtype;
    c.Expect('[');
    if (!c.TryConsume(']')) {
      do {
        b.extents.push_back(c.Integer());
      } while (c.TryConsume(','));
      c.Expect(']');
    }
    return b;
  }

  std::vector<Stmt> Block(int indent) {
    std::vector<Stmt> out;
    while (pos_ < lines_.size() && lines_[pos_].indent == indent) out.push_back(Statement());
    if (pos_ < lines_.size() && lines_[pos_].indent > indent)
      Fail(lines_[pos_], "unexpected indentation");
    return out;
  }

  std::vector<Stmt> Children(int parent_indent) {
    if (pos_ < lines_.size() && lines_[pos_].indent > parent_indent)
      return Block(lines_[pos_].indent);
    return {};
  }

  Stmt Statement() {
    const Line& l = lines_[pos_++];
    text::Cursor c(l.text, l.line_no);
    c.SkipSpace();
    if (c.TryKeyword("for ")) {
      const std::string var = c.Word();
      c.Keyword("in");
      Affine lo = ParseAffine(c);
      c.Keyword("..");
      Affine hi = ParseAffine(c);
      Annotation ann;
      if (c.TryConsume('@')) ann = ParseAnnotation(c);
      c.Expect(':');
      c.ExpectEnd();
      return Stmt::For(var, lo, hi, Children(l.indent), ann);
    }
    if (c.TryKeyword("if ")) {
      std::vector<Affine> conds;
      do {
        conds.push_back(ParseAffine(c));
        c.Keyword(">=");
        if (c.Integer() != 0) c.Fail("conditions compare against 0");
      } while (c.TryConsume(','));
      c.Expect(':');
      c.ExpectEnd();
      return Stmt::If(std::move(conds), Children(l.indent));
    }
    if (c.TryKeyword("seq")) {
      c.Expect(':');
      c.ExpectEnd();
      return Stmt::Seq(Children(l.indent));
    }
    if (c.TryKeyword("alloc ")) {
      const int col = c.column();
      const std::string scope = c.Word();
      Scope sc;
      if (scope == "global") {
        sc = Scope::kGlobal;
      } else if (scope == "local") {
        sc = Scope::kLocal;
      } else if (scope == "cache") {
        sc = Scope::kCache;
      } else {
        c.Fail("unknown scope '" + scope + "'", col);
      }
      Buffer b = ParseDecl(c);
      c.ExpectEnd();
      return Stmt::Alloc(std::move(b), sc);
    }
    const std::string buf = c.Word();
    c.Expect('[');
    Affine idx = ParseAffine(c);
    c.Expect(']');
    c.Expect('=');
    Expr value = ParseExpr(c);
    c.ExpectEnd();
    return Stmt::Store(buf, std::move(idx), std::move(value));
  }

  static Annotation ParseAnnotation(text::Cursor& c) {
    const int col = c.column();
    const std::string name = c.Word();
    Annotation a;
    if (name == "parallel") return Annotation::Parallel();
    if (name == "serial") return a;
    if (name == "vectorize") {
      a.kind = AnnKind::kVectorize;
    } else if (name == "unroll") {
      a.kind = AnnKind::kUnroll;
    } else if (name == "pipelined") {
      a.kind = AnnKind::kPipelined;
    } else {
      c.Fail("unknown annotation '@" + name + "'", col - 1);
    }
    c.Expect('(');
    a.param = static_cast<int>(c.Integer());
    c.Expect(')');
    if (!a.Valid()) c.Fail("annotation parameter out of range", col - 1);
    return a;
  }

  static bool StartsTerm(char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
  }

  static Affine ParseTerm(text::Cursor& c) {
    c.SkipSpace();
    if (std::isdigit(static_cast<unsigned char>(c.Peek()))) {
      const int64_t k = c.Integer();
      if (c.TryConsume('*')) return Affine::Var(c.Word(), k);
      return Affine::Const(k);
    }
    return Affine::Var(c.Word());
  }

  static Affine ParseAffine(text::Cursor& c) {
    c.SkipSpace();
    Affine a;
    int64_t sign = 1;
    if (c.Peek() == '-') {
      c.Expect('-');
      sign = -1;
    }
    c.SkipSpace();
    if (!StartsTerm(c.Peek())) c.Fail("expected affine term");
    a = ParseTerm(c) * sign;
    while (true) {
      c.SkipSpace();
      const char ch = c.Peek();
      if (ch != '+' && ch != '-') break;
      c.Expect(ch);
      a = a + ParseTerm(c) * (ch == '-' ? -1 : 1);
    }
    return a;
  }

  static DType Suffix(text::Cursor& c) {
    c.Expect('.');
    const int col = c.column();
    const std::string dt = c.Word();
    std::string upper;
    for (char ch : dt) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    auto d = ParseDType(upper);
    if (!d) c.Fail("unknown dtype '" + dt + "'", col);
    return *d;
  }

  static Expr ParseExpr(text::Cursor& c) {
    c.SkipSpace();
    const int col = c.column();
    const std::string op = c.Word();
    if (op == "load") {
      const std::string buf = c.Word();
      c.Expect('[');
      Affine idx = ParseAffine(c);
      c.Expect(']');
      // The dtype is filled in from the declaration after parsing.
      return Expr::Load(buf, DType::kF32, std::move(idx));
    }
    if (op == "const") {
      const DType dt = Suffix(c);
      c.Expect('(');
      const double v = c.Number();
      c.Expect(')');
      return Expr::Constant(dt, v);
    }
    if (op == "cast") {
      const DType from = Suffix(c);
      const DType to = Suffix(c);
      c.Expect('(');
      Expr a = ParseExpr(c);
      c.Expect(')');
      return Expr::Cast(from, to, std::move(a));
    }
    const DType dt = Suffix(c);
    std::vector<Expr> args;
    c.Expect('(');
    do {
      args.push_back(ParseExpr(c));
    } while (c.TryConsume(','));
    c.Expect(')');
    auto need = [&](size_t n) {
      if (args.size() != n)
        c.Fail("'" + op + "' expects " + std::to_string(n) + " operands", col);
    };
    static const std::pair<const char*, scalar::BinaryOp> kBinary[] = {
        {"add", scalar::BinaryOp::kAdd},
        {"sub", scalar::BinaryOp::kSub},
        {"mul", scalar::BinaryOp::kMul},
        {"div", scalar::BinaryOp::kDiv}};
    for (const auto& [name, b] : kBinary)
      if (op == name) {
        need(2);
        return Expr::Binary(b, dt, std::move(args[0]), std::move(args[1]));
      }
    static const std::pair<const char*, scalar::UnaryOp> kUnary[] = {
        {"neg", scalar::UnaryOp::kNeg},
        {"relu", scalar::UnaryOp::kRelu},
        {"sigmoid", scalar::UnaryOp::kSigmoid}};
    for (const auto& [name, u] : kUnary)
      if (op == name) {
        need(1);
        return Expr::Unary(u, dt, std::move(args[0]));
      }
    if (op == "fma") {
      need(3);
      return Expr::Fma(dt, std::move(args[0]), std::move(args[1]), std::move(args[2]));
    }
    c.Fail("unknown operation '" + op + "'", col);
  }

  std::vector<Line> lines_;
  size_t pos_ = 0;
};

// Load dtypes come from buffer declarations.
void ResolveLoadTypes(Expr& e, const std::map<std::string, DType>& types) {
  if (e.kind == ExprKind::kLoad) {
    auto it = types.find(e.buffer);
    if (it != types.end()) e.dtype = it->second;
  }
  for (auto& a : e.args) ResolveLoadTypes(a, types);
}

void ResolveStmt(Stmt& s, std::map<std::string, DType>& types) {
  if (s.kind == StmtKind::kAlloc) types[s.alloc.name] = s.alloc.dtype;
  if (s.kind == StmtKind::kStore) ResolveLoadTypes(s.value, types);
  for (auto& c : s.body) ResolveStmt(c, types);
}

}  // namespace

std::string ExprToString(const Expr& e) {
  switch (e.kind) {
    case ExprKind::kConst:
      return "const." + Lower(DTypeName(e.dtype)) + "(" + text::FormatNumber(e.value, e.dtype) +
             ")";
    case ExprKind::kLoad:
      return "load " + e.buffer + "[" + e.index.ToString() + "]";
    default:
      break;
  }
  std::string head;
  switch (e.kind) {
    case ExprKind::kBinary: head = Lower(scalar::BinaryOpName(e.bop)); break;
    case ExprKind::kUnary: head = Lower(scalar::UnaryOpName(e.uop)); break;
    case ExprKind::kCast: head = "cast." + Lower(DTypeName(e.from)); break;
    case ExprKind::kFma: head = "fma"; break;
    default: break;
  }
  std::string out = head + "." + Lower(DTypeName(e.dtype)) + "(";
  for (size_t i = 0; i < e.args.size(); ++i) {
    if (i) out += ", ";
    out += ExprToString(e.args[i]);
  }
  return out + ")";
}

std::string SerializeLoop(const LoopProgram& p) {
  std::ostringstream os;
  os << "program " << p.name << '\n';
  for (const auto& b : p.inputs) os << "input " << b.name << ": " << TypeText(b) << '\n';
  for (const auto& b : p.outputs) os << "output " << b.name << ": " << TypeText(b) << '\n';
  for (const auto& c : p.constants) {
    os << "const " << c.buffer.name << ": " << TypeText(c.buffer) << " = [";
    for (size_t i = 0; i < c.data.size(); ++i) {
      if (i) os << ',';
      os << text::FormatNumber(c.data[i], c.buffer.dtype);
    }
    os << "]\n";
  }
  if (!p.intrinsics_used.empty()) {
    os << "intrinsics: ";
    bool first = true;
    for (const auto& s : p.intrinsics_used) {
      if (!first) os << ", ";
      first = false;
      os << s;
    }
    os << '\n';
  }
  os << "body:\n";
  PrintBlock(p.body.body, 1, os);
  return os.str();
}

LoopProgram ParseLoop(std::string_view src) {
  LoopProgram p = Parser(src).Run();
  std::map<std::string, DType> types;
  for (const auto& b : p.inputs) types[b.name] = b.dtype;
  for (const auto& b : p.outputs) types[b.name] = b.dtype;
  for (const auto& c : p.constants) types[c.buffer.name] = c.buffer.dtype;
  ResolveStmt(p.body, types);
  return p;
}

LoopProgram LoadLoopFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kTestLoadError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseLoop(buf.str());
}

}  // namespace stagefuzz::loop

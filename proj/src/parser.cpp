#include <cctype>
#include <charconv>
#include <limits>
#include <set>
#include <unordered_set>

#include "ray/syntax.hpp"

namespace ray {
namespace {

enum class Tok { Ident, Int, Sym, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  SourcePos pos;
};

const std::unordered_set<std::string> kKeywords = {
    "class", "var",   "def",   "let",   "in",   "if",    "else", "while",
    "new",   "rasync", "await", "yield", "null", "true", "false"};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.pos = {line, col};
    if (ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && ident_char(src[j])) ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      t.kind = Tok::Int;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '=' && i + 1 < src.size() && src[i + 1] == '=') {
      t.kind = Tok::Sym;
      t.text = "==";
      advance(2);
    } else if (std::string_view("{}()[]:;,=<+-!.").find(c) != std::string_view::npos) {
      t.kind = Tok::Sym;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw Error(ErrorKind::SyntaxError,
                  std::string("unexpected character '") + c + "'", {line, col});
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::End;
  end.pos = {line, col};
  out.push_back(end);
  return out;
}

class Parser {
 public:
  Parser(std::string_view src, const ParseOptions& opts)
      : toks_(lex(src)), opts_(opts) {}

  Program program() {
    Program p;
    std::set<std::string> class_names;
    while (is_word("class")) {
      ClassDecl cd = class_decl();
      if (!class_names.insert(cd.name).second) {
        throw Error(ErrorKind::DuplicateName, "duplicate class '" + cd.name + "'",
                    cd.pos);
      }
      p.classes.push_back(std::move(cd));
    }
    p.main = seq();
    expect_end();
    return p;
  }

  ExprPtr lone_expr() {
    ExprPtr e = seq();
    expect_end();
    return e;
  }

  Type lone_type() {
    Type t = type();
    expect_end();
    return t;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    return toks_[std::min(pos_ + k, toks_.size() - 1)];
  }
  Token take() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  bool is_sym(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Sym && peek(k).text == s;
  }
  bool is_word(std::string_view s, std::size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == s;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const Token& t = peek();
    std::string near = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw Error(ErrorKind::SyntaxError, msg + " near " + near, t.pos);
  }

  void expect_sym(std::string_view s) {
    if (!is_sym(s)) fail("expected '" + std::string(s) + "'");
    take();
  }
  void expect_word(std::string_view s) {
    if (!is_word(s)) fail("expected '" + std::string(s) + "'");
    take();
  }
  void expect_end() {
    if (peek().kind != Tok::End) fail("unexpected trailing input");
  }

  std::string ident() {
    if (peek().kind != Tok::Ident || kKeywords.count(peek().text)) {
      fail("expected identifier");
    }
    return take().text;
  }

  std::string binder() {
    const SourcePos pos = peek().pos;
    std::string name = ident();
    if (name == "this") {
      throw Error(ErrorKind::SyntaxError, "'this' cannot be rebound", pos);
    }
    return name;
  }

  void reject_operator(const std::string& op) const {
    if (opts_.strict_syntax) {
      fail("operator '" + op + "' is not available with strict syntax");
    }
  }

  ClassDecl class_decl() {
    ClassDecl cd;
    cd.pos = peek().pos;
    expect_word("class");
    cd.name = ident();
    expect_sym("{");
    std::set<std::string> fields;
    std::set<std::string> methods;
    while (!is_sym("}")) {
      if (is_word("var")) {
        FieldDecl fd;
        fd.pos = take().pos;
        fd.name = ident();
        expect_sym(":");
        fd.type = type();
        if (!fields.insert(fd.name).second) {
          throw Error(ErrorKind::DuplicateName,
                      "duplicate field '" + fd.name + "' in class " + cd.name, fd.pos);
        }
        cd.fields.push_back(std::move(fd));
      } else if (is_word("def")) {
        MethodDecl md;
        md.pos = take().pos;
        md.name = ident();
        expect_sym("(");
        std::set<std::string> params;
        while (!is_sym(")")) {
          const SourcePos ppos = peek().pos;
          Param prm;
          prm.name = binder();
          expect_sym(":");
          prm.type = type();
          if (!params.insert(prm.name).second) {
            throw Error(ErrorKind::DuplicateName,
                        "duplicate parameter '" + prm.name + "'", ppos);
          }
          md.params.push_back(std::move(prm));
          if (!is_sym(")")) expect_sym(",");
        }
        expect_sym(")");
        expect_sym(":");
        md.return_type = type();
        expect_sym("=");
        md.body = expr();
        if (!methods.insert(md.name).second) {
          throw Error(ErrorKind::DuplicateName,
                      "duplicate method '" + md.name + "' in class " + cd.name, md.pos);
        }
        cd.methods.push_back(std::move(md));
      } else {
        fail("expected 'var', 'def' or '}'");
      }
    }
    expect_sym("}");
    return cd;
  }

  Type type() {
    const std::string name = ident();
    if (name == "Boolean") return Type::boolean();
    if (name == "Int") return Type::integer();
    if (name == "Observable" || name == "Option") {
      expect_sym("[");
      Type elem = type();
      expect_sym("]");
      return name == "Observable" ? Type::observable(std::move(elem))
                                  : Type::option(std::move(elem));
    }
    return Type::class_type(name);
  }

  // seq := expr (';' expr)*, sugar for nested `let _ = e in ...`.
  ExprPtr seq() {
    const SourcePos pos = peek().pos;
    ExprPtr head = expr();
    if (!is_sym(";")) return head;
    take();
    ExprPtr rest = seq();
    return mk::let("_", std::move(head), std::move(rest), pos);
  }

  ExprPtr block() {
    expect_sym("{");
    ExprPtr e = seq();
    expect_sym("}");
    return e;
  }

  ExprPtr expr() {
    const SourcePos pos = peek().pos;
    if (is_word("let")) {
      take();
      std::string x = is_word("_") ? take().text : binder();
      expect_sym("=");
      ExprPtr rhs = expr();
      expect_word("in");
      ExprPtr body = seq();
      return mk::let(std::move(x), std::move(rhs), std::move(body), pos);
    }
    if (is_word("if")) return if_expr();
    if (is_word("while")) {
      take();
      expect_sym("(");
      ExprPtr cond = seq();
      expect_sym(")");
      ExprPtr body = block();
      return mk::while_(std::move(cond), std::move(body), pos);
    }
    if (is_word("rasync")) {
      take();
      expect_sym("[");
      Type elem = type();
      expect_sym("]");
      expect_sym("(");
      std::vector<ExprPtr> srcs = args_until_close();
      ExprPtr body = block();
      return mk::rasync(std::move(elem), std::move(srcs), std::move(body), pos);
    }
    return compare();
  }

  ExprPtr if_expr() {
    const SourcePos pos = peek().pos;
    expect_word("if");
    expect_sym("(");
    ExprPtr cond = seq();
    expect_sym(")");
    ExprPtr then_e = block();
    expect_word("else");
    ExprPtr else_e = is_word("if") ? if_expr() : block();
    return mk::if_(std::move(cond), std::move(then_e), std::move(else_e), pos);
  }

  // After '(' has been consumed.
  std::vector<ExprPtr> args_until_close() {
    std::vector<ExprPtr> out;
    while (!is_sym(")")) {
      out.push_back(expr());
      if (!is_sym(")")) expect_sym(",");
    }
    expect_sym(")");
    return out;
  }

  ExprPtr compare() {
    const SourcePos pos = peek().pos;
    ExprPtr lhs = additive();
    if (is_sym("<") || is_sym("==")) {
      std::string op = take().text;
      reject_operator(op);
      ExprPtr rhs = additive();
      return mk::prim(std::move(op), {std::move(lhs), std::move(rhs)}, pos);
    }
    return lhs;
  }

  ExprPtr additive() {
    const SourcePos pos = peek().pos;
    ExprPtr lhs = unary();
    while (is_sym("+") || is_sym("-")) {
      std::string op = take().text;
      reject_operator(op);
      ExprPtr rhs = unary();
      lhs = mk::prim(std::move(op), {std::move(lhs), std::move(rhs)}, pos);
    }
    return lhs;
  }

  ExprPtr unary() {
    const SourcePos pos = peek().pos;
    if (is_sym("!")) {
      take();
      reject_operator("!");
      return mk::prim("!", {unary()}, pos);
    }
    return postfix();
  }

  ExprPtr postfix() {
    ExprPtr e = primary();
    while (is_sym(".")) {
      const SourcePos pos = take().pos;
      std::string member = ident();
      if (is_sym("(")) {
        take();
        e = mk::invoke(std::move(e), std::move(member), args_until_close(), pos);
      } else if (is_sym("=")) {
        take();
        ExprPtr value = compare();
        return mk::assign(std::move(e), std::move(member), std::move(value), pos);
      } else {
        e = mk::select(std::move(e), std::move(member), pos);
      }
    }
    return e;
  }

  std::int64_t int_literal(bool negative) {
    const Token t = take();
    std::uint64_t mag = 0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), mag);
    const std::uint64_t limit =
        static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) +
        (negative ? 1u : 0u);
    if (ec != std::errc() || mag > limit) {
      throw Error(ErrorKind::SyntaxError, "integer literal out of range", t.pos);
    }
    if (negative) return static_cast<std::int64_t>(0 - mag);
    return static_cast<std::int64_t>(mag);
  }

  ExprPtr primary() {
    const Token& t = peek();
    const SourcePos pos = t.pos;
    if (t.kind == Tok::Int) return mk::integer(int_literal(false), pos);
    if (is_sym("-") && peek(1).kind == Tok::Int) {
      take();
      return mk::integer(int_literal(true), pos);
    }
    if (is_sym("(")) {
      take();
      ExprPtr e = seq();
      expect_sym(")");
      return e;
    }
    if (is_sym("{")) return block();
    if (t.kind != Tok::Ident) fail("expected expression");
    if (t.text == "true" || t.text == "false") {
      take();
      return mk::boolean(t.text == "true", pos);
    }
    if (t.text == "null") {
      take();
      return mk::null(pos);
    }
    if (t.text == "new") {
      take();
      std::string cls = ident();
      expect_sym("(");
      return mk::new_(std::move(cls), args_until_close(), pos);
    }
    if (t.text == "await" || t.text == "yield") {
      const bool is_await = t.text == "await";
      take();
      expect_sym("(");
      ExprPtr arg = seq();
      expect_sym(")");
      return is_await ? mk::await(std::move(arg), pos) : mk::yield(std::move(arg), pos);
    }
    if ((t.text == "isSome" || t.text == "get") && is_sym("(", 1)) {
      std::string op = take().text;
      take();
      ExprPtr arg = seq();
      expect_sym(")");
      return mk::prim(std::move(op), {std::move(arg)}, pos);
    }
    if (t.text == "_") fail("'_' cannot be used as a value");
    return mk::var(ident(), pos);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ParseOptions opts_;
};

}  // namespace

Program parse_program(std::string_view text, const ParseOptions& opts) {
  return Parser(text, opts).program();
}

ExprPtr parse_expr(std::string_view text, const ParseOptions& opts) {
  return Parser(text, opts).lone_expr();
}

Type parse_type(std::string_view text) { return Parser(text, {}).lone_type(); }

}  // namespace ray

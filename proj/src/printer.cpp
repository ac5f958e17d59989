#include <sstream>

#include "ray/syntax.hpp"

namespace ray {
namespace {

bool is_binary(const Expr& e) {
  return e.kind == ExprKind::PrimOp &&
         (e.name == "+" || e.name == "-" || e.name == "<" || e.name == "==");
}

// Forms that can appear as an operand or receiver without parentheses.
bool is_atomic(const Expr& e) {
  switch (e.kind) {
    case ExprKind::BoolLit:
    case ExprKind::IntLit:
    case ExprKind::Var:
    case ExprKind::Null:
    case ExprKind::New:
    case ExprKind::Await:
    case ExprKind::Yield:
    case ExprKind::Select:
    case ExprKind::Invoke:
      return true;
    case ExprKind::PrimOp:
      return e.name == "isSome" || e.name == "get";
    default:
      return false;
  }
}

class Printer {
 public:
  explicit Printer(bool multiline) : multiline_(multiline) {}

  std::string str() const { return out_.str(); }

  void expr(const Expr& e, int indent) {
    switch (e.kind) {
      case ExprKind::BoolLit:
        out_ << (e.bool_value ? "true" : "false");
        return;
      case ExprKind::IntLit:
        out_ << e.int_value;
        return;
      case ExprKind::Var:
        out_ << e.name;
        return;
      case ExprKind::Null:
        out_ << "null";
        return;
      case ExprKind::If:
        out_ << "if (";
        expr(*e.operands[0], indent);
        out_ << ") ";
        block(*e.first, indent);
        out_ << " else ";
        block(*e.second, indent);
        return;
      case ExprKind::While:
        out_ << "while (";
        expr(*e.operands[0], indent);
        out_ << ") ";
        block(*e.first, indent);
        return;
      case ExprKind::Select:
        operand(*e.operands[0], indent);
        out_ << "." << e.name;
        return;
      case ExprKind::Assign:
        operand(*e.operands[0], indent);
        out_ << "." << e.name << " = ";
        operand(*e.operands[1], indent);
        return;
      case ExprKind::Invoke:
        operand(*e.operands[0], indent);
        out_ << "." << e.name << "(";
        list(e.operands, 1, indent);
        out_ << ")";
        return;
      case ExprKind::New:
        out_ << "new " << e.name << "(";
        list(e.operands, 0, indent);
        out_ << ")";
        return;
      case ExprKind::Let:
        out_ << "let " << e.name << " = ";
        if (e.first->kind == ExprKind::Let) {
          out_ << "(";
          expr(*e.first, indent);
          out_ << ")";
        } else {
          expr(*e.first, indent);
        }
        out_ << " in";
        newline(indent);
        expr(*e.second, indent);
        return;
      case ExprKind::RAsync:
        out_ << "rasync[" << e.type.str() << "](";
        list(e.operands, 0, indent);
        out_ << ") ";
        block(*e.first, indent);
        return;
      case ExprKind::Await:
      case ExprKind::Yield:
        out_ << (e.kind == ExprKind::Await ? "await(" : "yield(");
        expr(*e.operands[0], indent);
        out_ << ")";
        return;
      case ExprKind::PrimOp:
        if (e.name == "isSome" || e.name == "get") {
          out_ << e.name << "(";
          expr(*e.operands[0], indent);
          out_ << ")";
        } else if (e.name == "!") {
          out_ << "!";
          operand(*e.operands[0], indent);
        } else {
          operand(*e.operands[0], indent);
          out_ << " " << e.name << " ";
          operand(*e.operands[1], indent);
        }
        return;
    }
  }

  void block(const Expr& e, int indent) {
    out_ << "{";
    if (multiline_) {
      newline(indent + 1);
      expr(e, indent + 1);
      newline(indent);
    } else {
      out_ << " ";
      expr(e, indent);
      out_ << " ";
    }
    out_ << "}";
  }

  void newline(int indent) {
    if (multiline_) {
      out_ << "\n" << std::string(static_cast<std::size_t>(indent) * 2, ' ');
    } else {
      out_ << " ";
    }
  }

 private:
  void operand(const Expr& e, int indent) {
    if (is_atomic(e) && !is_binary(e)) {
      expr(e, indent);
    } else {
      out_ << "(";
      expr(e, indent);
      out_ << ")";
    }
  }

  void list(const std::vector<ExprPtr>& xs, std::size_t from, int indent) {
    for (std::size_t i = from; i < xs.size(); ++i) {
      if (i > from) out_ << ", ";
      expr(*xs[i], indent);
    }
  }

  bool multiline_;
  std::ostringstream out_;
};

}  // namespace

std::string print_expr(const Expr& e) {
  Printer p(false);
  p.expr(e, 0);
  return p.str();
}

std::string pretty_print(const Program& prog) {
  std::ostringstream out;
  for (const auto& c : prog.classes) {
    out << "class " << c.name << " {\n";
    for (const auto& f : c.fields) {
      out << "  var " << f.name << ": " << f.type.str() << "\n";
    }
    for (const auto& m : c.methods) {
      out << "  def " << m.name << "(";
      for (std::size_t i = 0; i < m.params.size(); ++i) {
        if (i) out << ", ";
        out << m.params[i].name << ": " << m.params[i].type.str();
      }
      out << "): " << m.return_type.str() << " = ";
      Printer p(true);
      p.block(*m.body, 1);
      out << p.str() << "\n";
    }
    out << "}\n\n";
  }
  Printer p(true);
  p.expr(*prog.main, 0);
  out << p.str() << "\n";
  return out.str();
}

}  // namespace ray

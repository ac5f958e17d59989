#include "ray/ast.hpp"

#include <utility>

namespace ray {

Type Type::class_type(std::string name) {
  Type t(TypeKind::Class);
  t.name_ = std::move(name);
  return t;
}

Type Type::observable(Type elem) {
  Type t(TypeKind::Observable);
  t.elem_ = std::make_shared<const Type>(std::move(elem));
  return t;
}

Type Type::option(Type elem) {
  Type t(TypeKind::Option);
  t.elem_ = std::make_shared<const Type>(std::move(elem));
  return t;
}

std::string Type::str() const {
  switch (kind_) {
    case TypeKind::Boolean:
      return "Boolean";
    case TypeKind::Int:
      return "Int";
    case TypeKind::Class:
      return name_;
    case TypeKind::Observable:
      return "Observable[" + elem_->str() + "]";
    case TypeKind::Option:
      return "Option[" + elem_->str() + "]";
    case TypeKind::NullAny:
      return "Null";
  }
  return "?";
}

bool operator==(const Type& a, const Type& b) {
  if (a.kind_ != b.kind_) return false;
  switch (a.kind_) {
    case TypeKind::Class:
      return a.name_ == b.name_;
    case TypeKind::Observable:
    case TypeKind::Option:
      return *a.elem_ == *b.elem_;
    default:
      return true;
  }
}

bool compatible(const Type& actual, const Type& expected) {
  if (actual == expected) return true;
  if (actual.kind() == TypeKind::NullAny) {
    return expected.is_reference() || expected.kind() == TypeKind::Option ||
           expected.kind() == TypeKind::NullAny;
  }
  if (actual.kind() == TypeKind::Option && expected.kind() == TypeKind::Option) {
    return compatible(actual.elem(), expected.elem());
  }
  return false;
}

std::optional<Type> join(const Type& a, const Type& b) {
  if (compatible(a, b)) return b;
  if (compatible(b, a)) return a;
  return std::nullopt;
}

const char* expr_kind_name(ExprKind k) {
  switch (k) {
    case ExprKind::BoolLit: return "BoolLit";
    case ExprKind::IntLit: return "IntLit";
    case ExprKind::Var: return "Var";
    case ExprKind::Null: return "Null";
    case ExprKind::If: return "If";
    case ExprKind::While: return "While";
    case ExprKind::Select: return "Select";
    case ExprKind::Assign: return "Assign";
    case ExprKind::Invoke: return "Invoke";
    case ExprKind::New: return "New";
    case ExprKind::Let: return "Let";
    case ExprKind::RAsync: return "RAsync";
    case ExprKind::Await: return "Await";
    case ExprKind::Yield: return "Yield";
    case ExprKind::PrimOp: return "PrimOp";
  }
  return "?";
}

namespace mk {

namespace {
std::shared_ptr<Expr> node(ExprKind k, SourcePos pos) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  e->pos = pos;
  return e;
}
}  // namespace

ExprPtr boolean(bool b, SourcePos pos) {
  auto e = node(ExprKind::BoolLit, pos);
  e->bool_value = b;
  return e;
}

ExprPtr integer(std::int64_t i, SourcePos pos) {
  auto e = node(ExprKind::IntLit, pos);
  e->int_value = i;
  return e;
}

ExprPtr var(std::string name, SourcePos pos) {
  auto e = node(ExprKind::Var, pos);
  e->name = std::move(name);
  return e;
}

ExprPtr null(SourcePos pos) { return node(ExprKind::Null, pos); }

ExprPtr if_(ExprPtr cond, ExprPtr then_e, ExprPtr else_e, SourcePos pos) {
  auto e = node(ExprKind::If, pos);
  e->operands = {std::move(cond)};
  e->first = std::move(then_e);
  e->second = std::move(else_e);
  return e;
}

ExprPtr while_(ExprPtr cond, ExprPtr body, SourcePos pos) {
  auto e = node(ExprKind::While, pos);
  e->operands = {std::move(cond)};
  e->first = std::move(body);
  return e;
}

ExprPtr select(ExprPtr recv, std::string field, SourcePos pos) {
  auto e = node(ExprKind::Select, pos);
  e->operands = {std::move(recv)};
  e->name = std::move(field);
  return e;
}

ExprPtr assign(ExprPtr recv, std::string field, ExprPtr value, SourcePos pos) {
  auto e = node(ExprKind::Assign, pos);
  e->operands = {std::move(recv), std::move(value)};
  e->name = std::move(field);
  return e;
}

ExprPtr invoke(ExprPtr recv, std::string method, std::vector<ExprPtr> args,
               SourcePos pos) {
  auto e = node(ExprKind::Invoke, pos);
  e->operands.push_back(std::move(recv));
  for (auto& a : args) e->operands.push_back(std::move(a));
  e->name = std::move(method);
  return e;
}

ExprPtr new_(std::string cls, std::vector<ExprPtr> args, SourcePos pos) {
  auto e = node(ExprKind::New, pos);
  e->name = std::move(cls);
  e->operands = std::move(args);
  return e;
}

ExprPtr let(std::string binder, ExprPtr rhs, ExprPtr body, SourcePos pos) {
  auto e = node(ExprKind::Let, pos);
  e->name = std::move(binder);
  e->first = std::move(rhs);
  e->second = std::move(body);
  return e;
}

ExprPtr rasync(Type elem, std::vector<ExprPtr> sources, ExprPtr body,
               SourcePos pos) {
  auto e = node(ExprKind::RAsync, pos);
  e->type = std::move(elem);
  e->operands = std::move(sources);
  e->first = std::move(body);
  return e;
}

ExprPtr await(ExprPtr source, SourcePos pos) {
  auto e = node(ExprKind::Await, pos);
  e->operands = {std::move(source)};
  return e;
}

ExprPtr yield(ExprPtr value, SourcePos pos) {
  auto e = node(ExprKind::Yield, pos);
  e->operands = {std::move(value)};
  return e;
}

ExprPtr prim(std::string op, std::vector<ExprPtr> args, SourcePos pos) {
  auto e = node(ExprKind::PrimOp, pos);
  e->name = std::move(op);
  e->operands = std::move(args);
  return e;
}

}  // namespace mk

ExprPtr rebuild(const Expr& e, std::vector<ExprPtr> operands, ExprPtr first,
                ExprPtr second) {
  auto out = std::make_shared<Expr>(e);
  out->operands = std::move(operands);
  out->first = std::move(first);
  out->second = std::move(second);
  return out;
}

bool equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return equal(*a, *b);
}

bool equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case ExprKind::BoolLit:
      if (a.bool_value != b.bool_value) return false;
      break;
    case ExprKind::IntLit:
      if (a.int_value != b.int_value) return false;
      break;
    case ExprKind::RAsync:
      if (a.type != b.type) return false;
      break;
    default:
      break;
  }
  if (a.name != b.name) return false;
  if (a.operands.size() != b.operands.size()) return false;
  for (std::size_t i = 0; i < a.operands.size(); ++i) {
    if (!equal(a.operands[i], b.operands[i])) return false;
  }
  return equal(a.first, b.first) && equal(a.second, b.second);
}

bool is_var(const ExprPtr& e) { return e && e->kind == ExprKind::Var; }

void collect_names(const Expr& e, std::set<std::string>& out) {
  if (e.kind == ExprKind::Var || e.kind == ExprKind::Let) out.insert(e.name);
  for (const auto& o : e.operands) collect_names(*o, out);
  if (e.first) collect_names(*e.first, out);
  if (e.second) collect_names(*e.second, out);
}

namespace {

void free_vars_into(const Expr& e, std::set<std::string>& bound,
                    std::set<std::string>& out) {
  switch (e.kind) {
    case ExprKind::Var:
      if (!bound.count(e.name)) out.insert(e.name);
      return;
    case ExprKind::Let: {
      const bool self_bound = e.first->kind == ExprKind::RAsync;
      const bool fresh = !bound.count(e.name);
      if (self_bound) {
        // The observable's own name is visible inside its body, not in its
        // source list.
        for (const auto& s : e.first->operands) free_vars_into(*s, bound, out);
        if (fresh) bound.insert(e.name);
        free_vars_into(*e.first->first, bound, out);
        if (fresh) bound.erase(e.name);
      } else {
        free_vars_into(*e.first, bound, out);
      }
      if (fresh) bound.insert(e.name);
      free_vars_into(*e.second, bound, out);
      if (fresh) bound.erase(e.name);
      return;
    }
    default:
      for (const auto& o : e.operands) free_vars_into(*o, bound, out);
      if (e.first) free_vars_into(*e.first, bound, out);
      if (e.second) free_vars_into(*e.second, bound, out);
  }
}

}  // namespace

std::set<std::string> free_vars(const Expr& e) {
  std::set<std::string> bound;
  std::set<std::string> out;
  free_vars_into(e, bound, out);
  return out;
}

std::size_t expr_count(const Expr& e) {
  std::size_t n = 1;
  for (const auto& o : e.operands) n += expr_count(*o);
  if (e.first) n += expr_count(*e.first);
  if (e.second) n += expr_count(*e.second);
  return n;
}

bool equal(const Program& a, const Program& b) {
  if (a.classes.size() != b.classes.size()) return false;
  for (std::size_t i = 0; i < a.classes.size(); ++i) {
    const auto& ca = a.classes[i];
    const auto& cb = b.classes[i];
    if (ca.name != cb.name || ca.fields.size() != cb.fields.size() ||
        ca.methods.size() != cb.methods.size()) {
      return false;
    }
    for (std::size_t f = 0; f < ca.fields.size(); ++f) {
      if (ca.fields[f].name != cb.fields[f].name ||
          ca.fields[f].type != cb.fields[f].type) {
        return false;
      }
    }
    for (std::size_t m = 0; m < ca.methods.size(); ++m) {
      const auto& ma = ca.methods[m];
      const auto& mb = cb.methods[m];
      if (ma.name != mb.name || ma.return_type != mb.return_type ||
          ma.params.size() != mb.params.size()) {
        return false;
      }
      for (std::size_t p = 0; p < ma.params.size(); ++p) {
        if (ma.params[p].name != mb.params[p].name ||
            ma.params[p].type != mb.params[p].type) {
          return false;
        }
      }
      if (!equal(ma.body, mb.body)) return false;
    }
  }
  return equal(a.main, b.main);
}

std::size_t expr_count(const Program& p) {
  std::size_t n = p.main ? expr_count(*p.main) : 0;
  for (const auto& c : p.classes) {
    for (const auto& m : c.methods) n += expr_count(*m.body);
  }
  return n;
}

void collect_names(const Program& p, std::set<std::string>& out) {
  for (const auto& c : p.classes) {
    for (const auto& m : c.methods) {
      for (const auto& prm : m.params) out.insert(prm.name);
      collect_names(*m.body, out);
    }
  }
  if (p.main) collect_names(*p.main, out);
}

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::UnknownType: return "UnknownType";
    case ErrorKind::UnknownMember: return "UnknownMember";
    case ErrorKind::TypeMismatch: return "TypeMismatch";
    case ErrorKind::UnboundVariable: return "UnboundVariable";
    case ErrorKind::YieldOutsideRAsync: return "YieldOutsideRAsync";
    case ErrorKind::AwaitOutsideRAsync: return "AwaitOutsideRAsync";
  }
  return "?";
}

Error::Error(ErrorKind kind, std::string message, SourcePos pos)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
      kind_(kind),
      message_(std::move(message)),
      pos_(pos) {}

}  // namespace ray

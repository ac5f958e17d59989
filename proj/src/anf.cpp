#include <functional>
#include <set>

#include "ray/syntax.hpp"

namespace ray {
namespace {

class Normalizer {
 public:
  explicit Normalizer(std::set<std::string> used) : used_(std::move(used)) {}

  // Tail position: the result is a let-chain ending in a variable.
  ExprPtr tail(const ExprPtr& e) {
    if (e->kind == ExprKind::Var) return e;
    if (e->kind == ExprKind::Let) return bind(e->name, e->first, tail(e->second), e->pos);
    const std::string t = fresh();
    return bind(t, e, mk::var(t, e->pos), e->pos);
  }

 private:
  using Cont = std::function<ExprPtr(ExprPtr)>;

  std::string fresh() {
    for (;;) {
      std::string name = "t" + std::to_string(++counter_);
      if (used_.insert(name).second) return name;
    }
  }

  // Produces `let x = rhs' in rest` with rhs' atomic, hoisting whatever
  // bindings the operands of rhs need in front of it.
  ExprPtr bind(const std::string& x, const ExprPtr& rhs, ExprPtr rest, SourcePos pos) {
    switch (rhs->kind) {
      case ExprKind::BoolLit:
      case ExprKind::IntLit:
      case ExprKind::Var:
      case ExprKind::Null:
        return mk::let(x, rhs, std::move(rest), pos);
      case ExprKind::Let:
        return bind(rhs->name, rhs->first, bind(x, rhs->second, std::move(rest), pos),
                    rhs->pos);
      case ExprKind::If:
        return name(rhs->operands[0], [&](ExprPtr c) {
          return mk::let(x, rebuild(*rhs, {c}, tail(rhs->first), tail(rhs->second)),
                         rest, pos);
        });
      case ExprKind::While: {
        const ExprPtr& cond = rhs->operands[0];
        if (is_var(cond)) {
          return mk::let(x, rebuild(*rhs, {cond}, tail(rhs->first), nullptr), rest, pos);
        }
        // A compound condition is re-evaluated at the end of every iteration.
        const std::string c = fresh();
        ExprPtr body = mk::let("_", rhs->first, mk::let(c, cond, mk::var(c)), rhs->pos);
        ExprPtr loop = rebuild(*rhs, {mk::var(c, cond->pos)}, tail(body), nullptr);
        return bind(c, cond, mk::let(x, loop, std::move(rest), pos), cond->pos);
      }
      case ExprKind::RAsync:
        return names(rhs->operands, 0, {}, [&](std::vector<ExprPtr> srcs) {
          return mk::let(x, rebuild(*rhs, std::move(srcs), tail(rhs->first), nullptr),
                         rest, pos);
        });
      default:
        return names(rhs->operands, 0, {}, [&](std::vector<ExprPtr> ops) {
          return mk::let(x, rebuild(*rhs, std::move(ops), nullptr, nullptr), rest, pos);
        });
    }
  }

  ExprPtr name(const ExprPtr& e, const Cont& k) {
    if (e->kind == ExprKind::Var) return k(e);
    const std::string t = fresh();
    ExprPtr body = k(mk::var(t, e->pos));
    return bind(t, e, std::move(body), e->pos);
  }

  ExprPtr names(const std::vector<ExprPtr>& es, std::size_t i, std::vector<ExprPtr> acc,
                const std::function<ExprPtr(std::vector<ExprPtr>)>& k) {
    if (i == es.size()) return k(std::move(acc));
    return name(es[i], [&](ExprPtr v) {
      std::vector<ExprPtr> next = acc;
      next.push_back(std::move(v));
      return names(es, i + 1, std::move(next), k);
    });
  }

  std::set<std::string> used_;
  int counter_ = 0;
};

bool atomic_rhs(const Expr& r) {
  auto all_vars = [&] {
    for (const auto& o : r.operands) {
      if (!is_var(o)) return false;
    }
    return true;
  };
  switch (r.kind) {
    case ExprKind::BoolLit:
    case ExprKind::IntLit:
    case ExprKind::Var:
    case ExprKind::Null:
      return true;
    case ExprKind::Let:
      return false;
    case ExprKind::If:
      return all_vars() && is_anf(*r.first) && is_anf(*r.second);
    case ExprKind::While:
    case ExprKind::RAsync:
      return all_vars() && is_anf(*r.first);
    default:
      return all_vars();
  }
}

}  // namespace

bool is_anf(const Expr& e) {
  if (e.kind == ExprKind::Var) return true;
  if (e.kind != ExprKind::Let) return false;
  return atomic_rhs(*e.first) && is_anf(*e.second);
}

bool is_anf(const Program& p) {
  for (const auto& c : p.classes) {
    for (const auto& m : c.methods) {
      if (!is_anf(*m.body)) return false;
    }
  }
  return is_anf(*p.main);
}

Program normalize_anf(const Program& p) {
  std::set<std::string> used;
  collect_names(p, used);
  Normalizer n(used);
  Program out = p;
  for (auto& c : out.classes) {
    for (auto& m : c.methods) m.body = n.tail(m.body);
  }
  out.main = n.tail(p.main);
  return out;
}

}  // namespace ray

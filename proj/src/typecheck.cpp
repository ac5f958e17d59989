#include "ray/typecheck.hpp"

#include <set>

#include "ray/syntax.hpp"

namespace ray {

std::string scope_name(const std::string& cls, const std::string& method) {
  return cls + "." + method;
}

// ---------------------------------------------------------------------------
// Class table
// ---------------------------------------------------------------------------

ClassTable ClassTable::build(const Program& p) {
  ClassTable ct;
  for (const auto& c : p.classes) {
    if (!ct.classes_.emplace(c.name, c).second) {
      throw Error(ErrorKind::DuplicateName, "duplicate class '" + c.name + "'", c.pos);
    }
  }
  for (const auto& c : p.classes) {
    std::set<std::string> seen;
    for (const auto& f : c.fields) {
      if (!seen.insert(f.name).second) {
        throw Error(ErrorKind::DuplicateName,
                    "duplicate field '" + f.name + "' in class " + c.name, f.pos);
      }
      ct.check_type(f.type, f.pos);
    }
    seen.clear();
    for (const auto& m : c.methods) {
      if (!seen.insert(m.name).second) {
        throw Error(ErrorKind::DuplicateName,
                    "duplicate method '" + m.name + "' in class " + c.name, m.pos);
      }
      std::set<std::string> params;
      for (const auto& prm : m.params) {
        if (prm.name == "this" || !params.insert(prm.name).second) {
          throw Error(ErrorKind::DuplicateName,
                      "invalid or repeated parameter '" + prm.name + "'", m.pos);
        }
        ct.check_type(prm.type, m.pos);
      }
      ct.check_type(m.return_type, m.pos);
    }
  }
  return ct;
}

const ClassDecl& ClassTable::decl(const std::string& name) const {
  auto it = classes_.find(name);
  if (it == classes_.end()) {
    throw Error(ErrorKind::UnknownType, "unknown class '" + name + "'");
  }
  return it->second;
}

void ClassTable::check_type(const Type& t, SourcePos pos) const {
  switch (t.kind()) {
    case TypeKind::Class:
      if (!has_class(t.class_name())) {
        throw Error(ErrorKind::UnknownType, "unknown class '" + t.class_name() + "'", pos);
      }
      return;
    case TypeKind::Observable:
    case TypeKind::Option:
      check_type(t.elem(), pos);
      return;
    default:
      return;
  }
}

std::vector<std::string> ClassTable::fields(const std::string& cls) const {
  std::vector<std::string> out;
  for (const auto& f : decl(cls).fields) out.push_back(f.name);
  return out;
}

Type ClassTable::ftype(const Type& recv, const std::string& field) const {
  if (recv.kind() != TypeKind::Class) {
    throw Error(ErrorKind::UnknownMember,
                "type " + recv.str() + " has no field '" + field + "'");
  }
  for (const auto& f : decl(recv.class_name()).fields) {
    if (f.name == field) return f.type;
  }
  throw Error(ErrorKind::UnknownMember,
              "class " + recv.class_name() + " has no field '" + field + "'");
}

const MethodDecl& ClassTable::method(const Type& recv, const std::string& name) const {
  if (recv.kind() != TypeKind::Class) {
    throw Error(ErrorKind::UnknownMember,
                "type " + recv.str() + " has no method '" + name + "'");
  }
  for (const auto& m : decl(recv.class_name()).methods) {
    if (m.name == name) return m;
  }
  throw Error(ErrorKind::UnknownMember,
              "class " + recv.class_name() + " has no method '" + name + "'");
}

MethodType ClassTable::mtype(const Type& recv, const std::string& name) const {
  const MethodDecl& m = method(recv, name);
  MethodType mt;
  for (const auto& p : m.params) mt.params.push_back(p.type);
  mt.result = m.return_type;
  return mt;
}

MethodBody ClassTable::mbody(const std::string& cls, const std::string& name) const {
  const MethodDecl& m = method(Type::class_type(cls), name);
  MethodBody mb;
  for (const auto& p : m.params) mb.params.push_back(p.name);
  mb.body = m.body;
  return mb;
}

// ---------------------------------------------------------------------------
// Expression typing
// ---------------------------------------------------------------------------

namespace {

bool exempt_from_table(const std::string& x) {
  return x == "_" || (!x.empty() && x[0] == '$');
}

// Attaches the position of `e` to errors raised without one.
template <typename F>
decltype(auto) located(const Expr& e, F&& f) {
  try {
    return f();
  } catch (const Error& err) {
    if (err.pos().line != 0) throw;
    throw Error(err.kind(), err.message(), e.pos);
  }
}

class Checker {
 public:
  Checker(const ClassTable& ct, VarTable* vars, bool frozen,
          std::map<const Expr*, Type>* bodies, bool await_needs_async)
      : ct_(ct),
        vars_(vars),
        frozen_(frozen),
        bodies_(bodies),
        await_needs_async_(await_needs_async) {}

  Type check(const Expr& e, std::map<std::string, Type>& gamma, std::vector<Type>& delta) {
    switch (e.kind) {
      case ExprKind::BoolLit:
        return Type::boolean();
      case ExprKind::IntLit:
        return Type::integer();
      case ExprKind::Null:
        return Type::null_any();
      case ExprKind::Var: {
        auto it = gamma.find(e.name);
        if (it == gamma.end()) {
          throw Error(ErrorKind::UnboundVariable, "unbound variable '" + e.name + "'", e.pos);
        }
        return it->second;
      }
      case ExprKind::If: {
        expect(check(*e.operands[0], gamma, delta), Type::boolean(), e, "condition");
        Type t = check(*e.first, gamma, delta);
        Type s = check(*e.second, gamma, delta);
        auto j = join(t, s);
        if (!j) {
          throw Error(ErrorKind::TypeMismatch,
                      "branches have types " + t.str() + " and " + s.str(), e.pos);
        }
        return *j;
      }
      case ExprKind::While:
        expect(check(*e.operands[0], gamma, delta), Type::boolean(), e, "loop condition");
        check(*e.first, gamma, delta);
        return Type::boolean();
      case ExprKind::Select:
        return located(e, [&] {
          return ct_.ftype(receiver(*e.operands[0], gamma, delta), e.name);
        });
      case ExprKind::Assign: {
        Type ft = located(e, [&] {
          return ct_.ftype(receiver(*e.operands[0], gamma, delta), e.name);
        });
        expect(check(*e.operands[1], gamma, delta), ft, e, "assigned value");
        return ft;
      }
      case ExprKind::Invoke: {
        MethodType mt = located(e, [&] {
          return ct_.mtype(receiver(*e.operands[0], gamma, delta), e.name);
        });
        if (mt.params.size() + 1 != e.operands.size()) {
          throw Error(ErrorKind::TypeMismatch,
                      "method '" + e.name + "' expects " + std::to_string(mt.params.size()) +
                          " arguments",
                      e.pos);
        }
        for (std::size_t i = 0; i < mt.params.size(); ++i) {
          expect(check(*e.operands[i + 1], gamma, delta), mt.params[i], e, "argument");
        }
        return mt.result;
      }
      case ExprKind::New: {
        const ClassDecl& cd = located(e, [&]() -> const ClassDecl& { return ct_.decl(e.name); });
        if (cd.fields.size() != e.operands.size()) {
          throw Error(ErrorKind::TypeMismatch,
                      "new " + e.name + " expects " + std::to_string(cd.fields.size()) +
                          " arguments",
                      e.pos);
        }
        for (std::size_t i = 0; i < cd.fields.size(); ++i) {
          expect(check(*e.operands[i], gamma, delta), cd.fields[i].type, e,
                 "field '" + cd.fields[i].name + "'");
        }
        return Type::class_type(e.name);
      }
      case ExprKind::Let:
        return check_let(e, gamma, delta);
      case ExprKind::RAsync:
        return check_rasync(e, nullptr, gamma, delta);
      case ExprKind::Await: {
        if (await_needs_async_ && delta.empty()) {
          throw Error(ErrorKind::AwaitOutsideRAsync, "await outside an rasync body", e.pos);
        }
        Type src = check(*e.operands[0], gamma, delta);
        if (src.kind() != TypeKind::Observable) {
          throw Error(ErrorKind::TypeMismatch, "await expects an observable, got " + src.str(),
                      e.pos);
        }
        return Type::option(src.elem());
      }
      case ExprKind::Yield: {
        if (delta.empty()) {
          throw Error(ErrorKind::YieldOutsideRAsync, "yield outside an rasync body", e.pos);
        }
        expect(check(*e.operands[0], gamma, delta), delta.front(), e, "yielded value");
        return delta.front();
      }
      case ExprKind::PrimOp:
        return check_prim(e, gamma, delta);
    }
    throw Error(ErrorKind::TypeMismatch, "unknown expression", e.pos);
  }

 private:
  static void expect(const Type& actual, const Type& expected, const Expr& e,
                     const std::string& what) {
    if (!compatible(actual, expected)) {
      throw Error(ErrorKind::TypeMismatch,
                  what + " has type " + actual.str() + ", expected " + expected.str(), e.pos);
    }
  }

  Type receiver(const Expr& r, std::map<std::string, Type>& gamma, std::vector<Type>& delta) {
    Type t = check(r, gamma, delta);
    if (t.kind() != TypeKind::Class) {
      throw Error(ErrorKind::TypeMismatch, "receiver has type " + t.str() + ", expected a class",
                  r.pos);
    }
    return t;
  }

  // Records the binder in the flat table and returns the type to put in Γ.
  Type record(const std::string& x, const Type& rho, const Expr& e) {
    if (!vars_ || exempt_from_table(x)) return rho;
    auto it = vars_->find(x);
    if (it == vars_->end()) {
      if (!frozen_) vars_->emplace(x, rho);
      return rho;
    }
    Type& prev = it->second;
    if (prev == rho || compatible(rho, prev)) return prev;
    if (prev.kind() == TypeKind::NullAny && compatible(prev, rho)) {
      if (!frozen_) prev = rho;
      return rho;
    }
    throw Error(ErrorKind::TypeMismatch,
                "variable '" + x + "' rebound at type " + rho.str() + ", previously " +
                    prev.str(),
                e.pos);
  }

  Type check_let(const Expr& e, std::map<std::string, Type>& gamma, std::vector<Type>& delta) {
    Type rho;
    if (e.first->kind == ExprKind::RAsync) {
      Type self = Type::observable(e.first->type);
      ct_.check_type(e.first->type, e.first->pos);
      record(e.name, self, e);
      rho = check_rasync(*e.first, &e.name, gamma, delta);
    } else {
      rho = check(*e.first, gamma, delta);
    }
    if (e.name == "_") return check(*e.second, gamma, delta);
    Type bound = record(e.name, rho, e);
    auto saved = gamma.find(e.name) == gamma.end()
                     ? std::optional<Type>()
                     : std::optional<Type>(gamma.at(e.name));
    gamma[e.name] = bound;
    Type result = check(*e.second, gamma, delta);
    if (saved) {
      gamma[e.name] = *saved;
    } else {
      gamma.erase(e.name);
    }
    return result;
  }

  Type check_rasync(const Expr& e, const std::string* self, std::map<std::string, Type>& gamma,
                    std::vector<Type>& delta) {
    ct_.check_type(e.type, e.pos);
    for (const auto& s : e.operands) {
      Type t = check(*s, gamma, delta);
      if (t.kind() != TypeKind::Observable) {
        throw Error(ErrorKind::TypeMismatch,
                    "rasync source has type " + t.str() + ", expected an observable", s->pos);
      }
    }
    std::optional<Type> saved;
    if (self) {
      if (gamma.count(*self)) saved = gamma.at(*self);
      gamma[*self] = Type::observable(e.type);
    }
    delta.insert(delta.begin(), e.type);
    Type body;
    try {
      body = check(*e.first, gamma, delta);
    } catch (...) {
      delta.erase(delta.begin());
      throw;
    }
    delta.erase(delta.begin());
    if (self) {
      if (saved) {
        gamma[*self] = *saved;
      } else {
        gamma.erase(*self);
      }
    }
    if (bodies_) (*bodies_)[&e] = body;
    return Type::observable(e.type);
  }

  Type check_prim(const Expr& e, std::map<std::string, Type>& gamma, std::vector<Type>& delta) {
    std::vector<Type> args;
    for (const auto& o : e.operands) args.push_back(check(*o, gamma, delta));
    const std::string& op = e.name;
    if (op == "+" || op == "-" || op == "<") {
      expect(args.at(0), Type::integer(), e, "left operand of '" + op + "'");
      expect(args.at(1), Type::integer(), e, "right operand of '" + op + "'");
      return op == "<" ? Type::boolean() : Type::integer();
    }
    if (op == "==") {
      const TypeKind k = args.at(0).kind();
      if ((k != TypeKind::Int && k != TypeKind::Boolean) || args.at(1) != args.at(0)) {
        throw Error(ErrorKind::TypeMismatch,
                    "'==' compares Int or Boolean values of the same type, got " +
                        args.at(0).str() + " and " + args.at(1).str(),
                    e.pos);
      }
      return Type::boolean();
    }
    if (op == "!") {
      expect(args.at(0), Type::boolean(), e, "operand of '!'");
      return Type::boolean();
    }
    if (op == "isSome" || op == "get") {
      if (args.at(0).kind() != TypeKind::Option) {
        throw Error(ErrorKind::TypeMismatch, op + " expects an Option, got " + args.at(0).str(),
                    e.pos);
      }
      return op == "isSome" ? Type::boolean() : args.at(0).elem();
    }
    throw Error(ErrorKind::TypeMismatch, "unknown operator '" + op + "'", e.pos);
  }

  const ClassTable& ct_;
  VarTable* vars_;
  bool frozen_;
  std::map<const Expr*, Type>* bodies_;
  bool await_needs_async_;
};

}  // namespace

Type type_expr(TypeEnv env, const ClassTable& ct, const Expr& e) {
  Checker c(ct, env.vars, env.frozen_vars, env.rasync_bodies, false);
  return c.check(e, env.gamma, env.delta);
}

TypeReport typecheck_program(const Program& p) {
  TypeReport report;
  auto push = [&](const Error& err) {
    report.errors.push_back({err.kind(), err.message(), err.pos()});
  };
  ClassTable ct;
  try {
    ct = ClassTable::build(p);
  } catch (const Error& err) {
    push(err);
    return report;
  }
  for (const auto& c : p.classes) {
    for (const auto& m : c.methods) {
      VarTable& vars = report.scopes[scope_name(c.name, m.name)];
      std::map<std::string, Type> gamma;
      for (const auto& prm : m.params) {
        gamma[prm.name] = prm.type;
        vars[prm.name] = prm.type;
      }
      gamma["this"] = Type::class_type(c.name);
      vars["this"] = gamma["this"];
      std::vector<Type> delta;
      Checker chk(ct, &vars, false, &report.rasync_bodies, true);
      try {
        Type body = chk.check(*m.body, gamma, delta);
        if (!compatible(body, m.return_type)) {
          throw Error(ErrorKind::TypeMismatch,
                      "method " + c.name + "." + m.name + " declared " + m.return_type.str() +
                          " but its body has type " + body.str(),
                      m.pos);
        }
      } catch (const Error& err) {
        push(err);
      }
    }
  }
  VarTable& vars = report.scopes["main"];
  std::map<std::string, Type> gamma;
  std::vector<Type> delta;
  Checker chk(ct, &vars, false, &report.rasync_bodies, true);
  try {
    chk.check(*p.main, gamma, delta);
  } catch (const Error& err) {
    push(err);
  }
  return report;
}

CheckedProgram check_program(const Program& p) {
  CheckedProgram out;
  out.program = normalize_anf(p);
  out.types = typecheck_program(out.program);
  if (!out.types.ok()) {
    const Diagnostic& d = out.types.errors.front();
    throw Error(d.kind, d.message, d.pos);
  }
  out.classes = ClassTable::build(out.program);
  return out;
}

namespace {

ExprPtr publish(const ExprPtr& e, const TypeReport& types) {
  if (!e) return e;
  std::vector<ExprPtr> ops;
  for (const auto& o : e->operands) ops.push_back(publish(o, types));
  ExprPtr first = publish(e->first, types);
  ExprPtr second = publish(e->second, types);
  if (e->kind == ExprKind::RAsync) {
    auto it = types.rasync_bodies.find(e.get());
    if (it != types.rasync_bodies.end() && compatible(it->second, e->type)) {
      const std::string r = "$result";
      first = mk::let(r, first,
                      mk::let("_", mk::yield(mk::var(r, e->pos), e->pos), mk::var(r, e->pos)),
                      e->pos);
    }
  }
  return rebuild(*e, std::move(ops), std::move(first), std::move(second));
}

}  // namespace

Program desugar_publish_result(const Program& p, const TypeReport& types) {
  Program out = p;
  for (auto& c : out.classes) {
    for (auto& m : c.methods) m.body = publish(m.body, types);
  }
  out.main = publish(p.main, types);
  return out;
}

}  // namespace ray

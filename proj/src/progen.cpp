#include "ray/progen.hpp"

#include <algorithm>
#include <climits>
#include <random>
#include <stdexcept>

#include "ray/typecheck.hpp"

namespace ray {

namespace {

struct VarInfo {
  std::string name;
  Type type;
  bool nonnull = false;
};

struct MethodSig {
  std::string cls;
  std::string name;
  std::vector<Param> params;
  Type ret;
  int index = 0;
};

struct Ctx {
  std::vector<VarInfo> vars;
  bool in_async = false;
  Type elem;
  /// Observables this body subscribed to at creation.
  std::vector<std::string> sources;
  /// Observables certain to be running at this point of the body.
  std::vector<std::string> known;
  bool in_loop = false;
  bool in_method = false;
  std::string cls;
  int method_limit = INT_MAX;
};

// Restores the variable list on scope exit.
class Scope {
 public:
  explicit Scope(Ctx& c) : c_(c), n_(c.vars.size()) {}
  ~Scope() { c_.vars.resize(n_); }

 private:
  Ctx& c_;
  std::size_t n_;
};

class Generator {
 public:
  explicit Generator(const GenConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  Program run() {
    declare_classes();
    Program p;
    for (std::size_t k = 0; k < class_names_.size(); ++k) {
      ClassDecl c;
      c.name = class_names_[k];
      c.fields = class_fields_[k];
      p.classes.push_back(std::move(c));
    }
    for (const MethodSig& m : methods_) {
      auto it = std::find(class_names_.begin(), class_names_.end(), m.cls);
      ClassDecl& c = p.classes[static_cast<std::size_t>(it - class_names_.begin())];
      c.methods.push_back({m.name, m.params, m.ret, method_body(m), {}});
    }
    p.main = main_body();
    return p;
  }

 private:
  int pick(int n) { return n <= 1 ? 0 : std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  bool chance(int pct) { return pick(100) < pct; }
  std::string fresh(const std::string& stem) { return stem + std::to_string(++counter_); }

  template <class T>
  const T& one_of(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(pick(static_cast<int>(v.size())))];
  }

  // -- declarations ---------------------------------------------------------

  void declare_classes() {
    static const char* kNames[] = {"Box", "Cell", "Node", "Pair", "Slot", "Tree"};
    const int n = pick(cfg_.max_classes + 1);
    for (int k = 0; k < n; ++k) {
      class_names_.push_back(k < 6 ? kNames[k] : "K" + std::to_string(k));
    }
    for (int k = 0; k < n; ++k) {
      std::vector<FieldDecl> fields;
      const int nf = 1 + pick(3);
      for (int i = 0; i < nf; ++i) {
        Type t = i == 0 ? Type::integer() : field_type();
        fields.push_back({"f" + std::to_string(i), t, {}});
      }
      class_fields_.push_back(std::move(fields));
    }
    int index = 0;
    for (int k = 0; k < n; ++k) {
      const int nm = pick(cfg_.max_methods + 1);
      for (int i = 0; i < nm; ++i) {
        MethodSig m;
        m.cls = class_names_[static_cast<std::size_t>(k)];
        m.name = "m" + std::to_string(index);
        m.index = index++;
        const int np = pick(3);
        for (int j = 0; j < np; ++j) {
          Type t = chance(15) ? class_type() : (chance(65) ? Type::integer() : Type::boolean());
          m.params.push_back({"p" + std::to_string(j), t});
        }
        const int r = pick(100);
        m.ret = r < 60 ? Type::integer() : r < 85 ? Type::boolean() : class_type();
        methods_.push_back(std::move(m));
      }
    }
  }

  Type class_type() { return Type::class_type(one_of(class_names_)); }

  Type field_type() {
    const int r = pick(100);
    if (r < 50) return Type::integer();
    if (r < 75) return Type::boolean();
    return class_type();
  }

  const std::vector<FieldDecl>& fields_of(const std::string& cls) const {
    auto it = std::find(class_names_.begin(), class_names_.end(), cls);
    return class_fields_[static_cast<std::size_t>(it - class_names_.begin())];
  }

  // -- helpers --------------------------------------------------------------

  struct Recv {
    ExprPtr expr;
    std::string cls;
  };

  std::vector<Recv> receivers(const Ctx& c) const {
    std::vector<Recv> out;
    for (const VarInfo& v : c.vars) {
      if (v.nonnull && v.type.kind() == TypeKind::Class) {
        out.push_back({mk::var(v.name), v.type.class_name()});
      }
    }
    if (c.in_method) {
      // Weighted so that method bodies mostly touch their receiver.
      for (int i = 0; i < 3; ++i) out.push_back({mk::var("this"), c.cls});
    }
    return out;
  }

  std::vector<const VarInfo*> vars_of(const Ctx& c, const Type& t) const {
    std::vector<const VarInfo*> out;
    for (const VarInfo& v : c.vars) {
      if (v.type == t) out.push_back(&v);
    }
    return out;
  }

  std::vector<const VarInfo*> option_vars(const Ctx& c) const {
    std::vector<const VarInfo*> out;
    for (const VarInfo& v : c.vars) {
      if (v.type.kind() == TypeKind::Option) out.push_back(&v);
    }
    return out;
  }

  Type value_type(const Ctx& c) {
    const int r = pick(100);
    if (r < 55) return Type::integer();
    if (r < 85 || class_names_.empty()) return Type::boolean();
    (void)c;
    return class_type();
  }

  ExprPtr seq(ExprPtr head, ExprPtr rest) { return mk::let("_", std::move(head), std::move(rest)); }

  // -- expressions ----------------------------------------------------------

  ExprPtr leaf(const Type& goal, const Ctx& c) {
    auto vs = vars_of(c, goal);
    if (!vs.empty() && chance(50)) return mk::var(one_of(vs)->name);
    switch (goal.kind()) {
      case TypeKind::Int: return mk::integer(pick(10));
      case TypeKind::Boolean: return mk::boolean(chance(50));
      case TypeKind::Option:
        if (!vs.empty()) return mk::var(vs.front()->name);
        throw std::logic_error("no option value in scope");
      default: return mk::null();
    }
  }

  ExprPtr gen(const Type& goal, Ctx& c, int depth) {
    if (depth <= 0) return leaf(goal, c);
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (ExprPtr e = try_gen(goal, c, depth)) return e;
    }
    return leaf(goal, c);
  }

  ExprPtr try_gen(const Type& goal, Ctx& c, int depth) {
    const bool is_int = goal.kind() == TypeKind::Int;
    const bool is_bool = goal.kind() == TypeKind::Boolean;
    const bool is_class = goal.kind() == TypeKind::Class;
    switch (pick(14)) {
      case 0:
      case 1: return leaf(goal, c);
      case 2:
        if (is_int && !cfg_.strict_syntax) {
          return mk::prim(chance(60) ? "+" : "-", {gen(goal, c, depth - 1), gen(goal, c, depth - 1)});
        }
        if (is_bool && !cfg_.strict_syntax) {
          if (chance(30)) return mk::prim("!", {gen(goal, c, depth - 1)});
          Type t = Type::integer();
          return mk::prim(chance(50) ? "<" : "==", {gen(t, c, depth - 1), gen(t, c, depth - 1)});
        }
        return nullptr;
      case 3: return select(goal, c);
      case 4: return invoke(goal, c, depth);
      case 5:
        return mk::if_(gen(Type::boolean(), c, depth - 1), gen(goal, c, depth - 1),
                       gen(goal, c, depth - 1));
      case 6: {
        Scope s(c);
        Type t = value_type(c);
        std::string x = fresh("x");
        ExprPtr rhs;
        if (t.kind() == TypeKind::Class) {
          rhs = new_object(t.class_name(), c, depth - 1);
        } else {
          rhs = gen(t, c, depth - 1);
        }
        c.vars.push_back({x, t, t.kind() == TypeKind::Class});
        return mk::let(x, rhs, gen(goal, c, depth - 1));
      }
      case 7: {
        // Guarded unwrap of an awaited value.
        auto opts = option_vars(c);
        std::vector<const VarInfo*> match;
        for (const VarInfo* v : opts) {
          if (v->type.elem() == goal) match.push_back(v);
        }
        if (match.empty()) {
          if (is_bool && !opts.empty()) return mk::prim("isSome", {mk::var(one_of(opts)->name)});
          return nullptr;
        }
        const std::string a = one_of(match)->name;
        return mk::if_(mk::prim("isSome", {mk::var(a)}), mk::prim("get", {mk::var(a)}),
                       gen(goal, c, depth - 1));
      }
      case 8: return assign(goal, c, depth);
      case 9:
        if (c.in_async && goal == c.elem) return mk::yield(gen(goal, c, depth - 1));
        return nullptr;
      case 10:
        if (is_bool && depth >= 2) {
          return loop(c, [&](Ctx& in) { return gen(value_type(in), in, depth - 2); });
        }
        return nullptr;
      case 11:
        if (is_class) return new_object(goal.class_name(), c, depth - 1);
        return nullptr;
      case 12:
        if (c.in_method && is_int) return select(goal, c);
        return nullptr;
      default: return nullptr;
    }
  }

  ExprPtr new_object(const std::string& cls, Ctx& c, int depth) {
    std::vector<ExprPtr> args;
    for (const FieldDecl& f : fields_of(cls)) {
      if (f.type.kind() == TypeKind::Class) {
        auto vs = vars_of(c, f.type);
        args.push_back(!vs.empty() && chance(50) ? mk::var(one_of(vs)->name) : mk::null());
      } else {
        args.push_back(gen(f.type, c, std::min(depth, 1)));
      }
    }
    return mk::new_(cls, std::move(args));
  }

  ExprPtr select(const Type& goal, const Ctx& c) {
    std::vector<std::pair<ExprPtr, std::string>> cands;
    for (const Recv& r : receivers(c)) {
      for (const FieldDecl& f : fields_of(r.cls)) {
        if (f.type == goal) cands.push_back({r.expr, f.name});
      }
    }
    if (cands.empty()) return nullptr;
    const auto& [recv, field] = one_of(cands);
    return mk::select(recv, field);
  }

  ExprPtr assign(const Type& goal, Ctx& c, int depth) {
    std::vector<std::pair<ExprPtr, std::string>> cands;
    for (const Recv& r : receivers(c)) {
      for (const FieldDecl& f : fields_of(r.cls)) {
        if (f.type == goal) cands.push_back({r.expr, f.name});
      }
    }
    if (cands.empty()) return nullptr;
    const auto [recv, field] = one_of(cands);
    ExprPtr value = goal.kind() == TypeKind::Class ? new_object(goal.class_name(), c, depth - 1)
                                                   : gen(goal, c, depth - 1);
    return mk::assign(recv, field, value);
  }

  ExprPtr invoke(const Type& goal, Ctx& c, int depth) {
    std::vector<std::pair<ExprPtr, const MethodSig*>> cands;
    for (const Recv& r : receivers(c)) {
      for (const MethodSig& m : methods_) {
        if (m.cls == r.cls && m.ret == goal && m.index < c.method_limit) cands.push_back({r.expr, &m});
      }
    }
    if (cands.empty()) return nullptr;
    const auto [recv, m] = one_of(cands);
    std::vector<ExprPtr> args;
    for (const Param& p : m->params) args.push_back(gen(p.type, c, depth - 1));
    return mk::invoke(recv, m->name, std::move(args));
  }

  // -- loops ----------------------------------------------------------------

  template <class Body>
  ExprPtr loop(Ctx& c, Body body_fn) {
    Scope s(c);
    const bool saved_loop = c.in_loop;
    const std::vector<std::string> saved_known = c.known;
    c.in_loop = true;
    if (c.in_async) c.known = {c.known.empty() ? std::string() : c.known.front()};
    const int n = 1 + pick(std::max(1, cfg_.max_loop_iters));
    const std::string go = fresh("go");
    ExprPtr result;
    if (cfg_.may_diverge && chance(30)) {
      c.vars.push_back({go, Type::boolean(), false});
      ExprPtr body = body_fn(c);
      ExprPtr cond = gen(Type::boolean(), c, 1);
      result = mk::let(go, mk::boolean(true),
                       mk::while_(mk::var(go), seq(body, mk::let(go, cond, mk::var(go)))));
    } else if (!cfg_.strict_syntax) {
      const std::string i = fresh("i");
      c.vars.push_back({i, Type::integer(), false});
      c.vars.push_back({go, Type::boolean(), false});
      auto test = [&] { return mk::prim("<", {mk::var(i), mk::integer(n)}); };
      ExprPtr body = body_fn(c);
      ExprPtr step = mk::let(i, mk::prim("+", {mk::var(i), mk::integer(1)}),
                             mk::let(go, test(), mk::var(go)));
      result = mk::let(i, mk::integer(0),
                       mk::let(go, test(), mk::while_(mk::var(go), seq(body, step))));
    } else {
      // Shift register of flags: the loop runs while the head flag is true.
      std::vector<std::string> flags;
      for (int k = 0; k < n; ++k) flags.push_back(fresh("k"));
      c.vars.push_back({go, Type::boolean(), false});
      for (const std::string& f : flags) c.vars.push_back({f, Type::boolean(), false});
      ExprPtr body = body_fn(c);
      ExprPtr step = mk::var(go);
      for (int k = n - 2; k >= 0; --k) {
        step = mk::let(flags[static_cast<std::size_t>(k)],
                       mk::var(flags[static_cast<std::size_t>(k) + 1]), step);
      }
      step = mk::let(go, mk::var(flags[0]), step);
      result = mk::while_(mk::var(go), seq(body, step));
      for (int k = n - 1; k >= 0; --k) {
        result = mk::let(flags[static_cast<std::size_t>(k)], mk::boolean(k < n - 1), result);
      }
      result = mk::let(go, mk::boolean(true), result);
    }
    c.in_loop = saved_loop;
    c.known = saved_known;
    return result;
  }

  // -- bodies ---------------------------------------------------------------

  ExprPtr method_body(const MethodSig& m) {
    Ctx c;
    c.in_method = true;
    c.cls = m.cls;
    c.method_limit = m.index;
    for (const Param& p : m.params) c.vars.push_back({p.name, p.type, false});
    const int d = std::max(1, cfg_.max_expr_depth - 1);
    const auto& fields = fields_of(m.cls);
    const FieldDecl& f = fields[static_cast<std::size_t>(pick(static_cast<int>(fields.size())))];
    const int r = pick(100);
    Scope s(c);
    if (r < 35) {
      ExprPtr value = f.type.kind() == TypeKind::Class ? mk::null() : gen(f.type, c, d - 1);
      return seq(mk::assign(mk::var("this"), f.name, value), gen(m.ret, c, d));
    }
    if (r < 70) {
      const std::string x = fresh("x");
      c.vars.push_back({x, f.type, false});
      return mk::let(x, mk::select(mk::var("this"), f.name), gen(m.ret, c, d));
    }
    return gen(m.ret, c, d);
  }

  ExprPtr main_body() {
    Ctx c;
    const int d = cfg_.max_expr_depth;
    obs_left_ = cfg_.max_observables;
    // Objects first so that bodies and statements can use them.
    std::vector<int> order;
    for (std::size_t k = 0; k < class_names_.size(); ++k) {
      if (chance(70)) order.push_back(static_cast<int>(k));
    }
    const int tops = obs_left_ > 0 ? 1 + pick(std::min(2, obs_left_)) : 0;
    const int plain = pick(3);
    // Statement plan: 'o' object, 'r' observable, 'p' plain.
    std::string plan;
    for (std::size_t k = 0; k < order.size(); ++k) plan += 'o';
    std::string rest;
    for (int k = 0; k < tops; ++k) rest += 'r';
    for (int k = 0; k < plain; ++k) rest += 'p';
    std::shuffle(rest.begin(), rest.end(), rng_);
    plan += rest;
    std::size_t obj = 0;
    return block(c, plan, 0, [&](Ctx& in, char kind) -> std::pair<std::string, ExprPtr> {
      if (kind == 'o') {
        const std::string cls = class_names_[static_cast<std::size_t>(order[obj++])];
        const std::string x = fresh("o");
        ExprPtr e = new_object(cls, in, 1);
        in.vars.push_back({x, Type::class_type(cls), true});
        return {x, e};
      }
      if (kind == 'r') {
        if (obs_left_ <= 0) return {"_", gen(value_type(in), in, d)};
        return observable(in, {});
      }
      return {"_", gen(value_type(in), in, d)};
    }, [&](Ctx& in) { return gen(Type::integer(), in, d); });
  }

  // Folds a statement plan into nested lets; the statement callback pushes
  // its binder into the context itself.
  template <class Stmt, class Tail>
  ExprPtr block(Ctx& c, const std::string& plan, std::size_t at, Stmt stmt, Tail tail) {
    Scope s(c);
    if (at == plan.size()) return tail(c);
    auto [name, rhs] = stmt(c, plan[at]);
    ExprPtr rest = block(c, plan, at + 1, stmt, tail);
    return mk::let(name, rhs, rest);
  }

  // Binds a new observable subscribed to `sources`, which must be running.
  std::pair<std::string, ExprPtr> observable(Ctx& c, std::vector<std::string> sources) {
    --obs_left_;
    const std::string self = fresh("r");
    const Type elem = chance(75) ? Type::integer() : Type::boolean();
    Ctx body = c;
    body.in_async = true;
    body.in_loop = false;
    body.elem = elem;
    body.sources = sources;
    body.known = {self};
    for (const std::string& k : c.known) body.known.push_back(k);
    body.vars.push_back({self, Type::observable(elem), true});
    std::vector<ExprPtr> src_exprs;
    for (const std::string& s : sources) src_exprs.push_back(mk::var(s));
    ExprPtr e = mk::rasync(elem, std::move(src_exprs), async_body(body));
    c.vars.push_back({self, Type::observable(elem), true});
    return {self, e};
  }

  Type elem_of(const Ctx& c, const std::string& obs) const {
    for (const VarInfo& v : c.vars) {
      if (v.name == obs) return v.type.elem();
    }
    throw std::logic_error("unknown observable " + obs);
  }

  // `let a = await(src) in if (isSome(a)) { let v = get(a) in yield(..) } else { .. }`
  ExprPtr await_use(Ctx& c, int depth) {
    Scope s(c);
    const std::string src = one_of(c.sources);
    const Type t = elem_of(c, src);
    const std::string a = fresh("a");
    c.vars.push_back({a, Type::option(t), false});
    ExprPtr use;
    {
      Scope s2(c);
      const std::string v = fresh("v");
      c.vars.push_back({v, t, false});
      ExprPtr value = t == c.elem && chance(60) ? mk::var(v) : gen(c.elem, c, depth);
      use = mk::let(v, mk::prim("get", {mk::var(a)}), mk::yield(value));
    }
    ExprPtr other = chance(50) ? mk::yield(gen(c.elem, c, 0)) : gen(c.elem, c, 0);
    return mk::let(a, mk::await(mk::var(src)),
                   mk::if_(mk::prim("isSome", {mk::var(a)}), use, other));
  }

  ExprPtr async_body(Ctx& c) {
    const int d = std::max(1, cfg_.max_expr_depth - 1);
    const int n = 1 + pick(3);
    std::string plan;
    bool yielded = false;
    for (int k = 0; k < n; ++k) {
      const int r = pick(100);
      char kind;
      if (r < 20) {
        kind = 'y';
      } else if (r < 38) {
        kind = 'Y';
      } else if (r < 55) {
        kind = c.sources.empty() ? 'Y' : 'a';
      } else if (r < 70) {
        kind = c.sources.empty() ? 'y' : 'A';
      } else if (r < 88) {
        kind = 'c';
      } else {
        kind = 'p';
      }
      yielded = yielded || kind == 'y' || kind == 'Y';
      plan += kind;
    }
    if (!yielded) plan += 'y';
    // Consumers drain their sources in a loop; producers spawn a consumer
    // before publishing so that events queue up behind a waiting child.
    if (!c.sources.empty() && plan.find_first_of("aA") == std::string::npos) {
      plan.insert(plan.begin() + pick(static_cast<int>(plan.size()) + 1), 'A');
    }
    if (plan.find('c') == std::string::npos && obs_left_ > 0 && chance(60)) {
      plan.insert(plan.begin(), 'c');
    }
    return block(c, plan, 0, [&](Ctx& in, char kind) -> std::pair<std::string, ExprPtr> {
      switch (kind) {
        case 'y': return {"_", mk::yield(gen(in.elem, in, d))};
        case 'Y':
          return {"_", loop(in, [&](Ctx& l) -> ExprPtr {
                    if (chance(30)) return seq(gen(value_type(l), l, 1), mk::yield(gen(l.elem, l, 1)));
                    return mk::yield(gen(l.elem, l, d));
                  })};
        case 'a': {
          ExprPtr e = await_use(in, d);
          in.known = {in.known.front()};
          return {"_", e};
        }
        case 'A': {
          ExprPtr e = loop(in, [&](Ctx& l) { return await_use(l, 1); });
          in.known = {in.known.front()};
          return {"_", e};
        }
        case 'c': {
          if (obs_left_ <= 0 || in.in_loop) return {"_", gen(value_type(in), in, d)};
          std::vector<std::string> srcs;
          for (const std::string& k : in.known) {
            if (chance(60)) srcs.push_back(k);
          }
          if (srcs.empty()) srcs.push_back(in.known.front());
          return observable(in, srcs);
        }
        default: return {"_", gen(value_type(in), in, d)};
      }
    }, [&](Ctx& in) { return gen(Type::integer(), in, 1); });
  }

  GenConfig cfg_;
  std::mt19937_64 rng_;
  int counter_ = 0;
  int obs_left_ = 0;
  std::vector<std::string> class_names_;
  std::vector<std::vector<FieldDecl>> class_fields_;
  std::vector<MethodSig> methods_;
};

}  // namespace

Program generate_program(const GenConfig& cfg) { return Generator(cfg).run(); }

namespace {

ExprPtr replace(const ExprPtr& e, const Expr* target, const ExprPtr& with) {
  if (!e) return e;
  if (e.get() == target) return with;
  bool changed = false;
  std::vector<ExprPtr> ops;
  for (const ExprPtr& o : e->operands) {
    ops.push_back(replace(o, target, with));
    changed = changed || ops.back() != o;
  }
  ExprPtr first = replace(e->first, target, with);
  ExprPtr second = replace(e->second, target, with);
  if (!changed && first == e->first && second == e->second) return e;
  return rebuild(*e, std::move(ops), std::move(first), std::move(second));
}

bool binds(const Expr& e, const std::string& x) {
  if (e.kind == ExprKind::Let && e.name == x) return true;
  for (const ExprPtr& o : e.operands) {
    if (o && binds(*o, x)) return true;
  }
  return (e.first && binds(*e.first, x)) || (e.second && binds(*e.second, x));
}

ExprPtr substitute(const ExprPtr& e, const std::string& x, const ExprPtr& v) {
  if (!e) return e;
  if (e->kind == ExprKind::Var && e->name == x) return v;
  std::vector<ExprPtr> ops;
  for (const ExprPtr& o : e->operands) ops.push_back(substitute(o, x, v));
  return rebuild(*e, std::move(ops), substitute(e->first, x, v), substitute(e->second, x, v));
}

bool is_leaf(const Expr& e) {
  return e.kind == ExprKind::BoolLit || e.kind == ExprKind::IntLit || e.kind == ExprKind::Null ||
         e.kind == ExprKind::Var;
}

void nodes(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (!e) return;
  out.push_back(e);
  for (const ExprPtr& o : e->operands) nodes(o, out);
  nodes(e->first, out);
  nodes(e->second, out);
}

// Smaller variants of `e`, most aggressive first.
std::vector<ExprPtr> reductions(const ExprPtr& e) {
  std::vector<ExprPtr> out;
  if (e->kind == ExprKind::Let && e->first && is_leaf(*e->first) && !binds(*e->second, e->name)) {
    out.push_back(substitute(e->second, e->name, e->first));
  }
  if (e->kind == ExprKind::RAsync && !is_leaf(*e->first)) {
    out.push_back(rebuild(*e, e->operands, mk::integer(0), nullptr));
  }
  for (const ExprPtr& o : e->operands) out.push_back(o);
  if (e->first) out.push_back(e->first);
  if (e->second) out.push_back(e->second);
  if (!is_leaf(*e)) {
    out.push_back(mk::integer(0));
    out.push_back(mk::boolean(false));
    out.push_back(mk::null());
  }
  return out;
}

std::vector<Program> candidates(const Program& p) {
  std::vector<Program> out;
  for (std::size_t c = 0; c < p.classes.size(); ++c) {
    Program q = p;
    q.classes.erase(q.classes.begin() + static_cast<std::ptrdiff_t>(c));
    out.push_back(std::move(q));
    for (std::size_t m = 0; m < p.classes[c].methods.size(); ++m) {
      Program r = p;
      auto& ms = r.classes[c].methods;
      ms.erase(ms.begin() + static_cast<std::ptrdiff_t>(m));
      out.push_back(std::move(r));
    }
  }
  std::vector<ExprPtr> all;
  nodes(p.main, all);
  for (const ClassDecl& c : p.classes) {
    for (const MethodDecl& m : c.methods) nodes(m.body, all);
  }
  for (const ExprPtr& n : all) {
    for (const ExprPtr& r : reductions(n)) {
      Program q = p;
      q.main = replace(q.main, n.get(), r);
      for (ClassDecl& c : q.classes) {
        for (MethodDecl& m : c.methods) m.body = replace(m.body, n.get(), r);
      }
      out.push_back(std::move(q));
    }
  }
  return out;
}

bool typechecks(const Program& p) {
  try {
    return typecheck_program(p).ok();
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

Program shrink_program(const Program& p, const ProgramPredicate& failing) {
  if (!failing(p)) throw std::invalid_argument("shrink_program: the predicate does not hold");
  Program best = p;
  bool progress = true;
  while (progress) {
    progress = false;
    const std::size_t size = expr_count(best);
    std::vector<std::pair<std::size_t, Program>> cands;
    for (Program& q : candidates(best)) cands.emplace_back(expr_count(q), std::move(q));
    std::stable_sort(cands.begin(), cands.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [n, q] : cands) {
      const bool smaller = n < size || q.classes.size() < best.classes.size() ||
                           [&] {
                             std::size_t a = 0, b = 0;
                             for (const ClassDecl& c : q.classes) a += c.methods.size();
                             for (const ClassDecl& c : best.classes) b += c.methods.size();
                             return a < b;
                           }();
      if (smaller && typechecks(q) && failing(q)) {
        best = std::move(q);
        progress = true;
        break;
      }
    }
  }
  return best;
}

}  // namespace ray

#include "ray/semantics.hpp"

#include <algorithm>
#include <random>

#include "ray/syntax.hpp"

namespace ray {

const char* mutation_name(Mutation m) {
  switch (m) {
    case Mutation::None:
      return "none";
    case Mutation::YieldKeepsWaiters:
      return "yield-keeps-waiters";
    case Mutation::ReturnSkipsUnsub:
      return "return-skips-unsub";
    case Mutation::Await2FromHead:
      return "await2-from-head";
    case Mutation::Await1KeepsSubscriber:
      return "await1-keeps-subscriber";
    case Mutation::MethodDropsThis:
      return "method-drops-this";
  }
  return "none";
}

std::vector<Mutation> all_mutations() {
  return {Mutation::YieldKeepsWaiters, Mutation::ReturnSkipsUnsub, Mutation::Await2FromHead,
          Mutation::Await1KeepsSubscriber, Mutation::MethodDropsThis};
}

std::optional<Mutation> parse_mutation(const std::string& s) {
  if (s == "none") return Mutation::None;
  for (Mutation m : all_mutations()) {
    if (s == mutation_name(m)) return m;
  }
  return std::nullopt;
}

const char* choice_kind_name(ChoiceKind k) {
  switch (k) {
    case ChoiceKind::Exit:
      return "Exit";
    case ChoiceKind::Return:
      return "Return";
    case ChoiceKind::Yield:
      return "Yield";
    case ChoiceKind::Schedule:
      return "Schedule";
  }
  return "?";
}

std::string Choice::str() const {
  return std::string(choice_kind_name(kind)) + "(" + std::to_string(stack) + ")";
}

const char* outcome_kind_name(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Finished:
      return "Finished";
    case OutcomeKind::Deadlock:
      return "Deadlock";
    case OutcomeKind::StepLimit:
      return "StepLimit";
    case OutcomeKind::Stuck:
      return "Stuck";
  }
  return "?";
}

namespace {

const Value& lookup(const Frame& f, const std::string& x) {
  auto it = f.locals.find(x);
  if (it == f.locals.end()) {
    throw RuntimeFault(FaultKind::UnboundLocal, "no local '" + x + "' in " + frame_summary(f));
  }
  return it->second;
}

const Value& lookup(const Frame& f, const ExprPtr& var) { return lookup(f, var->name); }

ObjId deref(const Value& v, const std::string& what) {
  if (v.kind() != ValueKind::Ref) {
    throw RuntimeFault(FaultKind::NullDeref, what + " on " + v.str());
  }
  return v.as_ref();
}

bool is_literal(const Expr& e) {
  return e.kind == ExprKind::BoolLit || e.kind == ExprKind::IntLit || e.kind == ExprKind::Null;
}

Value literal_value(const Expr& e) {
  switch (e.kind) {
    case ExprKind::BoolLit:
      return Value::boolean(e.bool_value);
    case ExprKind::IntLit:
      return Value::integer(e.int_value);
    default:
      return Value::null();
  }
}

bool all_vars(const Expr& e) {
  return std::all_of(e.operands.begin(), e.operands.end(),
                     [](const ExprPtr& o) { return is_var(o); });
}

// Smallest `prefix<n>` outside dom(L) and the frame expression.
std::string fresh_local(const std::string& prefix, const Frame& f) {
  std::set<std::string> used;
  collect_names(*f.expr, used);
  for (int n = 0;; ++n) {
    std::string name = prefix + std::to_string(n);
    if (!f.locals.count(name) && !used.count(name)) return name;
  }
}

Frame with(const Frame& f, ExprPtr e) {
  Frame out = f;
  out.expr = std::move(e);
  return out;
}

Frame bind(const Frame& f, const std::string& x, Value v, ExprPtr e) {
  Frame out = with(f, std::move(e));
  out.locals[x] = std::move(v);
  return out;
}

std::int64_t wrap_add(std::int64_t a, std::int64_t b, bool sub) {
  auto ua = static_cast<std::uint64_t>(a);
  auto ub = static_cast<std::uint64_t>(b);
  return static_cast<std::int64_t>(sub ? ua - ub : ua + ub);
}

Value eval_prim(const Frame& f, const Expr& e) {
  const std::string& op = e.name;
  auto arg = [&](std::size_t i) -> const Value& { return lookup(f, e.operands.at(i)); };
  if (op == "+" || op == "-") {
    return Value::integer(wrap_add(arg(0).as_int(), arg(1).as_int(), op == "-"));
  }
  if (op == "<") return Value::boolean(arg(0).as_int() < arg(1).as_int());
  if (op == "==") return Value::boolean(arg(0) == arg(1));
  if (op == "!") return Value::boolean(!arg(0).as_bool());
  if (op == "isSome") return Value::boolean(arg(0).kind() == ValueKind::Some);
  if (op == "get") {
    if (arg(0).kind() != ValueKind::Some) {
      throw RuntimeFault(FaultKind::OptionGetOnNone, "get(" + arg(0).str() + ")");
    }
    return arg(0).inner();
  }
  throw RuntimeFault(FaultKind::UnboundLocal, "unknown operator '" + op + "'");
}

// Operand naming for frames not in A-normal form: the first compound
// operand of the bound expression is bound to a fresh local first.
std::optional<FrameStep> name_operand(const Heap& h, const Frame& f) {
  const Expr& let = *f.expr;
  const Expr& rhs = *let.first;
  if (rhs.kind == ExprKind::While && !is_var(rhs.operands[0])) {
    // The condition must be re-evaluated on every iteration.
    const std::string c = fresh_local("$anf_", f);
    const ExprPtr& cond = rhs.operands[0];
    ExprPtr body = mk::let("_", rhs.first, mk::let(c, cond, mk::var(c)));
    ExprPtr loop = rebuild(rhs, {mk::var(c)}, body, nullptr);
    ExprPtr out = mk::let(c, cond, rebuild(let, {}, loop, let.second));
    return FrameStep{h, with(f, out), "E-Name"};
  }
  for (std::size_t i = 0; i < rhs.operands.size(); ++i) {
    if (is_var(rhs.operands[i])) continue;
    const std::string t = fresh_local("$anf_", f);
    std::vector<ExprPtr> ops = rhs.operands;
    ops[i] = mk::var(t);
    ExprPtr inner = rebuild(let, {}, rebuild(rhs, std::move(ops), rhs.first, rhs.second), let.second);
    return FrameStep{h, with(f, mk::let(t, rhs.operands[i], inner)), "E-Name"};
  }
  return std::nullopt;
}

bool yield_shaped(const Expr& e) {
  if (e.kind == ExprKind::Yield) return is_var(e.operands[0]);
  return e.kind == ExprKind::Let && e.first->kind == ExprKind::Yield && is_var(e.first->operands[0]);
}

bool is_terminal_main(const FrameStack& fs) {
  return fs.size() == 1 && !fs[0].label.async && !fs[0].ret_var && is_var(fs[0].expr);
}

}  // namespace

// ---------------------------------------------------------------------------
// Frame rules
// ---------------------------------------------------------------------------

std::optional<FrameStep> step_frame(const Heap& h, const Frame& f, const Context& ctx) {
  const Expr& e = *f.expr;
  if (e.kind == ExprKind::Var) return std::nullopt;
  if (e.kind != ExprKind::Let) {
    if (yield_shaped(e)) return std::nullopt;
    if (e.kind == ExprKind::Yield) {
      // Compound yield operand in tail position.
      const std::string t = fresh_local("$anf_", f);
      return FrameStep{h, with(f, mk::let(t, e.operands[0], mk::yield(mk::var(t)))), "E-Name"};
    }
    const std::string t = fresh_local("$anf_", f);
    return FrameStep{h, with(f, mk::let(t, f.expr, mk::var(t))), "E-Name"};
  }

  const std::string& x = e.name;
  const Expr& rhs = *e.first;
  const ExprPtr& body = e.second;

  if (rhs.kind == ExprKind::Var) return FrameStep{h, bind(f, x, lookup(f, rhs.name), body), "E-Var"};
  if (is_literal(rhs)) return FrameStep{h, bind(f, x, literal_value(rhs), body), "E-Var"};
  if (rhs.kind == ExprKind::Let) {
    ExprPtr out = mk::let(rhs.name, rhs.first, rebuild(e, {}, rhs.second, body), rhs.pos);
    return FrameStep{h, with(f, out), "E-LetAssoc"};
  }
  if (!all_vars(rhs)) return name_operand(h, f);

  switch (rhs.kind) {
    case ExprKind::Select: {
      ObjId o = deref(lookup(f, rhs.operands[0]), "field read ." + rhs.name);
      const HeapObject& obj = h.at(o);
      auto it = obj.fields.find(rhs.name);
      if (obj.observable || it == obj.fields.end()) {
        throw RuntimeFault(FaultKind::NotAnObservable,
                           "#" + std::to_string(o) + " has no field " + rhs.name);
      }
      return FrameStep{h, bind(f, x, it->second, body), "E-Field"};
    }
    case ExprKind::While: {
      const Value& c = lookup(f, rhs.operands[0]);
      if (c.as_bool()) {
        const std::string x2 = fresh_local("$while_", f);
        ExprPtr out = mk::let(x2, rhs.first, f.expr);
        return FrameStep{h, with(f, out), "E-While"};
      }
      return FrameStep{h, with(f, mk::let(x, mk::boolean(false), body, e.pos)), "E-While"};
    }
    case ExprKind::If: {
      const Value& c = lookup(f, rhs.operands[0]);
      ExprPtr branch = c.as_bool() ? rhs.first : rhs.second;
      return FrameStep{h, with(f, mk::let(x, branch, body, e.pos)), "E-Cond"};
    }
    case ExprKind::Assign: {
      ObjId o = deref(lookup(f, rhs.operands[0]), "field write ." + rhs.name);
      HeapObject obj = h.at(o);
      if (obj.observable || !obj.fields.count(rhs.name)) {
        throw RuntimeFault(FaultKind::NotAnObservable,
                           "#" + std::to_string(o) + " has no field " + rhs.name);
      }
      obj.fields[rhs.name] = lookup(f, rhs.operands[1]);
      Heap h2 = h;
      h2.set(o, std::move(obj));
      return FrameStep{std::move(h2), with(f, mk::let(x, rhs.operands[1], body, e.pos)),
                       "E-Assign"};
    }
    case ExprKind::New: {
      std::vector<std::string> names = ctx.classes->fields(rhs.name);
      std::map<std::string, Value> fields;
      for (std::size_t i = 0; i < names.size(); ++i) {
        fields[names[i]] = lookup(f, rhs.operands.at(i));
      }
      auto [h2, o] = alloc(h, HeapObject::plain(rhs.name, std::move(fields)));
      return FrameStep{std::move(h2), bind(f, x, Value::ref(o), body), "E-New"};
    }
    case ExprKind::PrimOp:
      return FrameStep{h, bind(f, x, eval_prim(f, rhs), body), "E-Prim"};
    default:
      return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Stack rules
// ---------------------------------------------------------------------------

namespace {

StackStep stepped(Heap h, FrameStack fs, StepInfo info, StackStatus st = StackStatus::Stepped) {
  StackStep out;
  out.status = st;
  out.heap = std::move(h);
  out.stack = std::move(fs);
  out.info = std::move(info);
  return out;
}

StackStep step_await(const Heap& h, const FrameStack& fs, const Context& ctx, StepInfo info) {
  const Frame& top = fs.back();
  const Expr& e = *top.expr;
  if (!top.label.async) {
    throw RuntimeFault(FaultKind::AwaitInSyncFrame, frame_summary(top));
  }
  const ObjId o = top.label.owner;
  const ObjId src = deref(lookup(top, e.first->operands[0]), "await");
  HeapObject obj = h.at(src);
  if (!obj.observable) {
    throw RuntimeFault(FaultKind::NotAnObservable, "await on plain object #" + std::to_string(src));
  }
  info.target = src;
  auto sub = obj.subs.find(o);
  if (sub == obj.subs.end()) {
    throw RuntimeFault(FaultKind::AwaitNotSubscribed, "#" + std::to_string(o) +
                                                          " is not subscribed to #" +
                                                          std::to_string(src));
  }
  FrameStack rest(fs.begin(), fs.end() - 1);
  if (sub->second.empty()) {
    if (!obj.done) {
      info.rule = "E-Await1";
      if (ctx.options.mutation != Mutation::Await1KeepsSubscriber) obj.subs.erase(sub);
      obj.waiters.push_back(top);
      Heap h2 = h;
      h2.set(src, std::move(obj));
      return stepped(std::move(h2), std::move(rest), std::move(info), StackStatus::Parked);
    }
    if (ctx.options.strict_await) return StackStep{};
    info.rule = "E-Await4";
    info.value = Value::none();
    rest.push_back(bind(top, e.name, Value::none(), e.second));
    return stepped(h, std::move(rest), std::move(info));
  }
  Value v;
  if (ctx.options.mutation == Mutation::Await2FromHead && !obj.done) {
    v = sub->second.front();
    sub->second.pop_front();
  } else {
    v = sub->second.back();
    sub->second.pop_back();
  }
  info.rule = obj.done ? "E-Await3" : "E-Await2";
  info.value = v;
  Heap h2 = h;
  h2.set(src, std::move(obj));
  rest.push_back(bind(top, e.name, Value::some(v), e.second));
  return stepped(std::move(h2), std::move(rest), std::move(info));
}

StackStep step_rasync(const Heap& h, const FrameStack& fs, StepInfo info) {
  const Frame& top = fs.back();
  const Expr& e = *top.expr;
  const Expr& r = *e.first;
  std::vector<ObjId> srcs;
  for (const ExprPtr& y : r.operands) {
    ObjId p = deref(lookup(top, y), "rasync source");
    const HeapObject& obj = h.at(p);
    if (!obj.observable) {
      throw RuntimeFault(FaultKind::NotAnObservable, "rasync source #" + std::to_string(p));
    }
    if (obj.done) {
      throw RuntimeFault(FaultKind::SubscribeToDone,
                         "rasync source #" + std::to_string(p) + " is done");
    }
    srcs.push_back(p);
  }
  auto [h2, o] = alloc(h, HeapObject::running(r.type, e.name));
  for (ObjId p : srcs) {
    HeapObject obj = h2.at(p);
    obj.subs.emplace(o, Queue{});
    h2.set(p, std::move(obj));
  }
  FrameStack out(fs.begin(), fs.end() - 1);
  Frame cont = bind(top, e.name, Value::ref(o), e.second);
  Frame body = bind(top, e.name, Value::ref(o), r.first);
  body.label = Label::async_of(o, srcs);
  body.ret_var.reset();
  out.push_back(std::move(cont));
  out.push_back(std::move(body));
  info.rule = "E-RAsync";
  info.target = o;
  info.sources = srcs;
  return stepped(std::move(h2), std::move(out), std::move(info));
}

StackStep step_method(const Heap& h, const FrameStack& fs, const Context& ctx, StepInfo info) {
  const Frame& top = fs.back();
  const Expr& e = *top.expr;
  const Expr& call = *e.first;
  const Value& recv = lookup(top, call.operands[0]);
  ObjId o = deref(recv, "call ." + call.name);
  const HeapObject& obj = h.at(o);
  if (obj.observable) {
    throw RuntimeFault(FaultKind::NotAnObservable, "method call on observable #" + std::to_string(o));
  }
  MethodBody mb = ctx.classes->mbody(obj.cls, call.name);
  Frame callee;
  for (std::size_t i = 0; i < mb.params.size(); ++i) {
    callee.locals[mb.params[i]] = lookup(top, call.operands.at(i + 1));
  }
  if (ctx.options.mutation != Mutation::MethodDropsThis) callee.locals["this"] = recv;
  callee.expr = mb.body;
  callee.label = Label::sync();
  callee.scope = scope_name(obj.cls, call.name);
  FrameStack out(fs.begin(), fs.end() - 1);
  Frame caller = with(top, e.second);
  caller.ret_var = e.name;
  out.push_back(std::move(caller));
  out.push_back(std::move(callee));
  info.rule = "E-Method";
  return stepped(h, std::move(out), std::move(info));
}

}  // namespace

StackStep step_stack(const Heap& h, const FrameStack& fs, const Context& ctx) {
  if (fs.empty()) return StackStep{};
  const Frame& top = fs.back();
  const Expr& e = *top.expr;
  StepInfo info;
  info.level = StepLevel::Stack;
  info.stack_obs = obs_ids(fs);
  info.owner = top.label.async ? top.label.owner : -1;

  if (e.kind == ExprKind::Var) {
    if (top.label.async || fs.size() < 2 || !fs[fs.size() - 2].ret_var) return StackStep{};
    FrameStack out(fs.begin(), fs.end() - 1);
    Frame& caller = out.back();
    caller.locals[*caller.ret_var] = lookup(top, e.name);
    caller.ret_var.reset();
    info.rule = "E-Return";
    return stepped(h, std::move(out), std::move(info));
  }
  if (yield_shaped(e)) {
    if (!top.label.async) throw RuntimeFault(FaultKind::YieldInSyncFrame, frame_summary(top));
    return StackStep{};
  }
  if (e.kind == ExprKind::Let && all_vars(*e.first)) {
    switch (e.first->kind) {
      case ExprKind::Invoke:
        return step_method(h, fs, ctx, std::move(info));
      case ExprKind::RAsync:
        return step_rasync(h, fs, std::move(info));
      case ExprKind::Await:
        return step_await(h, fs, ctx, std::move(info));
      default:
        break;
    }
  }
  std::optional<FrameStep> fstep = step_frame(h, top, ctx);
  if (!fstep) return StackStep{};
  FrameStack out(fs.begin(), fs.end() - 1);
  out.push_back(std::move(fstep->frame));
  info.rule = fstep->rule;
  info.level = StepLevel::Frame;
  info.path = {"E-Frame"};
  return stepped(std::move(fstep->heap), std::move(out), std::move(info));
}

// ---------------------------------------------------------------------------
// Process rules
// ---------------------------------------------------------------------------

std::vector<Choice> enabled_choices(const Heap& h, const Process& p, const Context& ctx) {
  std::vector<Choice> out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const FrameStack& fs = p[i];
    if (fs.empty() || is_terminal_main(fs)) {
      out.push_back({ChoiceKind::Exit, i});
      continue;
    }
    const Frame& top = fs.back();
    if (top.label.async && is_var(top.expr)) {
      out.push_back({ChoiceKind::Return, i});
      continue;
    }
    if (top.label.async && yield_shaped(*top.expr)) {
      out.push_back({ChoiceKind::Yield, i});
      continue;
    }
    try {
      if (step_stack(h, fs, ctx).status == StackStatus::NoRule) continue;
    } catch (const RuntimeFault&) {
    }
    out.push_back({ChoiceKind::Schedule, i});
  }
  return out;
}

namespace {

void not_enabled(const Choice& c) {
  throw RuntimeFault(FaultKind::ChoiceNotEnabled, c.str());
}

void spawn(Process& p, std::vector<Frame> resumed) {
  for (Frame& r : resumed) p.push_back(FrameStack{std::move(r)});
}

ProcessStep do_yield(const Heap& h, const Process& p, std::size_t i, const Context& ctx) {
  const Frame& top = p[i].back();
  const Expr& e = *top.expr;
  const Expr& y = e.kind == ExprKind::Yield ? e : *e.first;
  const ObjId o = top.label.owner;
  const Value v = lookup(top, y.operands[0]);
  HeapObject obj = h.at(o);
  if (obj.done) not_enabled({ChoiceKind::Yield, i});

  ProcessStep out;
  out.info.rule = "E-Yield";
  out.info.level = StepLevel::Process;
  out.info.stack = i;
  out.info.target = o;
  out.info.owner = o;
  out.info.value = v;
  out.info.stack_obs = obs_ids(p[i]);

  std::vector<Frame> resumed = resume(obj.waiters, Value::some(v));
  for (auto& [id, q] : obj.subs) q.push_front(v);
  for (ObjId w : obs_ids(obj.waiters)) obj.subs.emplace(w, Queue{});
  if (ctx.options.mutation != Mutation::YieldKeepsWaiters) obj.waiters.clear();
  obj.published.push_back(v);
  out.heap = h;
  out.heap.set(o, std::move(obj));

  out.process = p;
  Frame& f = out.process[i].back();
  f.expr = e.kind == ExprKind::Yield ? y.operands[0] : mk::let(e.name, y.operands[0], e.second, e.pos);
  spawn(out.process, std::move(resumed));
  return out;
}

ProcessStep do_return(const Heap& h, const Process& p, std::size_t i, const Context& ctx) {
  const Frame& top = p[i].back();
  const ObjId o = top.label.owner;
  HeapObject obj = h.at(o);
  if (obj.done) not_enabled({ChoiceKind::Return, i});

  ProcessStep out;
  out.info.rule = "E-RAsync-Return";
  out.info.level = StepLevel::Process;
  out.info.stack = i;
  out.info.target = o;
  out.info.owner = o;
  out.info.sources = top.label.subs;
  out.info.stack_obs = obs_ids(p[i]);

  std::vector<Frame> resumed = resume(obj.waiters, Value::none());
  for (ObjId w : obs_ids(obj.waiters)) obj.subs.emplace(w, Queue{});
  obj.waiters.clear();
  obj.done = true;
  out.heap = h;
  out.heap.set(o, std::move(obj));
  if (ctx.options.mutation != Mutation::ReturnSkipsUnsub) {
    for (ObjId src : top.label.subs) out.heap.set(src, unsub_heap(o, src, h));
  }

  out.process = p;
  out.process[i].pop_back();
  spawn(out.process, std::move(resumed));
  return out;
}

}  // namespace

ProcessStep step_process(const Heap& h, const Process& p, const Choice& c, const Context& ctx) {
  if (c.stack >= p.size()) not_enabled(c);
  const FrameStack& fs = p[c.stack];
  switch (c.kind) {
    case ChoiceKind::Exit: {
      if (!fs.empty() && !is_terminal_main(fs)) not_enabled(c);
      ProcessStep out;
      out.heap = h;
      out.process = p;
      out.process.erase(out.process.begin() + static_cast<std::ptrdiff_t>(c.stack));
      out.info.rule = "E-Exit";
      out.info.level = StepLevel::Process;
      out.info.stack = c.stack;
      out.info.stack_obs = obs_ids(fs);
      return out;
    }
    case ChoiceKind::Return:
      if (fs.empty() || !fs.back().label.async || !is_var(fs.back().expr)) not_enabled(c);
      return do_return(h, p, c.stack, ctx);
    case ChoiceKind::Yield:
      if (fs.empty() || !fs.back().label.async || !yield_shaped(*fs.back().expr)) not_enabled(c);
      return do_yield(h, p, c.stack, ctx);
    case ChoiceKind::Schedule: {
      StackStep s = step_stack(h, fs, ctx);
      if (s.status == StackStatus::NoRule) not_enabled(c);
      ProcessStep out;
      out.heap = std::move(s.heap);
      out.process = p;
      out.process[c.stack] = std::move(s.stack);
      out.info = std::move(s.info);
      out.info.stack = c.stack;
      out.info.path.insert(out.info.path.begin(), "E-Schedule");
      return out;
    }
  }
  not_enabled(c);
  return {};
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

Machine initial_machine(const Program& p) {
  Machine m;
  Frame f;
  f.expr = p.main;
  f.label = Label::sync();
  f.scope = "main";
  m.process.push_back(FrameStack{std::move(f)});
  return m;
}

nlohmann::json heap_delta(const Heap& before, const Heap& after) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < after.size(); ++i) {
    const auto id = static_cast<ObjId>(i);
    if (i < before.size() && before.ptr(id) == after.ptr(id)) continue;
    nlohmann::json now = to_json(after.at(id));
    if (i < before.size() && to_json(before.at(id)) == now) continue;
    out["#" + std::to_string(i)] = std::move(now);
  }
  return out;
}

nlohmann::json to_json(const TraceEvent& e) {
  return {{"step", e.step},
          {"rule", e.info.rule},
          {"stack", e.choice.stack},
          {"choice", e.choice.str()},
          {"heapDelta", e.heap_delta},
          {"note", e.note}};
}

namespace {

std::string derivation(const StepInfo& info) {
  std::string out;
  for (const auto& r : info.path) out += r + " > ";
  return out + info.rule;
}

}  // namespace

Outcome run_machine(Machine m, const Context& ctx, const RunOptions& opts,
                    const StepObserver& observer) {
  Outcome out;
  std::mt19937_64 rng(opts.seed);
  std::size_t cursor = 0;
  std::size_t script_pos = 0;
  for (;;) {
    std::vector<Choice> choices = enabled_choices(m.heap, m.process, ctx);
    if (choices.empty()) {
      out.kind = m.process.empty() ? OutcomeKind::Finished : OutcomeKind::Deadlock;
      for (std::size_t i = 0; i < m.process.size(); ++i) out.blocked.push_back(i);
      break;
    }
    if (m.steps >= opts.max_steps) {
      out.kind = OutcomeKind::StepLimit;
      break;
    }
    std::size_t pick = 0;
    switch (opts.policy) {
      case Policy::RoundRobin: {
        auto it = std::find_if(choices.begin(), choices.end(),
                               [&](const Choice& c) { return c.stack >= cursor; });
        pick = it == choices.end() ? 0 : static_cast<std::size_t>(it - choices.begin());
        cursor = choices[pick].stack + 1;
        break;
      }
      case Policy::Random:
        pick = static_cast<std::size_t>(rng() % choices.size());
        break;
      case Policy::Script:
        // An exhausted script continues with the first enabled choice.
        pick = script_pos < opts.script.size() ? opts.script[script_pos++] % choices.size() : 0;
        break;
    }
    const Choice c = choices[pick];
    ProcessStep s;
    try {
      s = step_process(m.heap, m.process, c, ctx);
    } catch (const RuntimeFault& fault) {
      out.kind = OutcomeKind::Stuck;
      out.fault = fault.kind();
      out.reason = fault.what();
      if (!m.process[c.stack].empty()) out.stuck_frame = m.process[c.stack].back();
      break;
    }
    Machine next{std::move(s.heap), std::move(s.process), m.steps + 1};
    out.choices.push_back(c);
    if (opts.record_trace) {
      TraceEvent ev;
      ev.step = next.steps;
      ev.choice = c;
      ev.info = s.info;
      ev.heap_delta = heap_delta(m.heap, next.heap);
      ev.note = derivation(s.info);
      out.trace.push_back(std::move(ev));
    }
    if (observer) observer(m, c, s.info, next);
    m = std::move(next);
  }
  out.machine = std::move(m);
  return out;
}

Outcome run(const CheckedProgram& p, const SemanticsOptions& sem, const RunOptions& opts,
            const StepObserver& observer) {
  Context ctx{&p.classes, sem};
  return run_machine(initial_machine(p.program), ctx, opts, observer);
}

}  // namespace ray

#include <algorithm>
#include <deque>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

#include "ray/semantics.hpp"
#include "ray/syntax.hpp"

namespace ray {
namespace {

// Memoized expression rendering; keeps the nodes alive so addresses are
// never reused while the cache exists.
class ExprCache {
 public:
  const std::string& get(const ExprPtr& e) {
    auto it = cache_.find(e.get());
    if (it != cache_.end()) return it->second.second;
    auto& slot = cache_[e.get()];
    slot.first = e;
    slot.second = print_expr(*e);
    return slot.second;
  }

 private:
  std::unordered_map<const Expr*, std::pair<ExprPtr, std::string>> cache_;
};

class Canonicalizer {
 public:
  Canonicalizer(const Machine& m, ExprCache& exprs)
      : m_(m), exprs_(exprs), rename_(m.heap.size(), -1) {}

  std::string key() {
    const Process& p = m_.process;
    std::vector<std::string> shapes;
    for (const FrameStack& fs : p) {
      std::string s;
      stack(s, fs, true);
      shapes.push_back(std::move(s));
    }
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return shapes[a] < shapes[b]; });

    for (std::size_t i : idx) {
      for (const Frame& f : p[i]) touch_frame(f);
    }
    std::size_t k = 0;
    auto drain = [&] {
      for (; k < order_.size(); ++k) touch_object(m_.heap.at(order_[k]));
    };
    drain();
    for (std::size_t id = 0; id < m_.heap.size(); ++id) {
      if (rename_[id] < 0) {
        touch(static_cast<ObjId>(id));
        drain();
      }
    }

    std::string out;
    for (ObjId id : order_) object(out, m_.heap.at(id));
    out += "||";
    for (std::size_t i : idx) stack(out, p[i], false);
    return out;
  }

 private:
  void touch(ObjId id) {
    if (id < 0 || static_cast<std::size_t>(id) >= rename_.size()) return;
    if (rename_[static_cast<std::size_t>(id)] >= 0) return;
    rename_[static_cast<std::size_t>(id)] = static_cast<ObjId>(order_.size());
    order_.push_back(id);
  }

  void touch_value(const Value& v) {
    if (v.kind() == ValueKind::Ref) touch(v.as_ref());
    if (v.kind() == ValueKind::Some) touch_value(v.inner());
  }

  void touch_frame(const Frame& f) {
    for (const auto& [k, v] : f.locals) touch_value(v);
    if (f.label.async) {
      touch(f.label.owner);
      for (ObjId s : f.label.subs) touch(s);
    }
  }

  void touch_object(const HeapObject& o) {
    for (const auto& [k, v] : o.fields) touch_value(v);
    for (const Frame& w : o.waiters) touch_frame(w);
    for (const auto& [id, q] : o.subs) {
      touch(id);
      for (const Value& v : q) touch_value(v);
    }
    for (const Value& v : o.published) touch_value(v);
  }

  std::string id(ObjId i, bool mask) const {
    if (mask) return "#";
    return "#" + std::to_string(rename_.at(static_cast<std::size_t>(i)));
  }

  void value(std::string& out, const Value& v, bool mask) const {
    switch (v.kind()) {
      case ValueKind::Ref:
        out += id(v.as_ref(), mask);
        return;
      case ValueKind::Some:
        out += "S(";
        value(out, v.inner(), mask);
        out += ")";
        return;
      default:
        out += v.str();
    }
  }

  void frame(std::string& out, const Frame& f, bool mask) const {
    out += "<";
    for (const auto& [k, v] : f.locals) {
      out += k;
      out += '=';
      value(out, v, mask);
      out += ';';
    }
    out += '|';
    out += exprs_.get(f.expr);
    out += '|';
    if (f.label.async) {
      out += "a" + id(f.label.owner, mask);
      for (ObjId s : f.label.subs) out += "," + id(s, mask);
    } else {
      out += 's';
    }
    if (f.ret_var) out += "_" + *f.ret_var;
    out += '|' + f.scope + '>';
  }

  void stack(std::string& out, const FrameStack& fs, bool mask) const {
    out += '[';
    for (const Frame& f : fs) frame(out, f, mask);
    out += ']';
  }

  void object(std::string& out, const HeapObject& o) const {
    if (!o.observable) {
      out += "P" + o.cls + "{";
      for (const auto& [k, v] : o.fields) {
        out += k + "=";
        value(out, v, false);
        out += ';';
      }
      out += "}";
      return;
    }
    out += (o.done ? "D" : "R") + o.elem.str() + ":" + o.tag + "{w:";
    for (const Frame& w : o.waiters) frame(out, w, false);
    std::vector<std::pair<ObjId, const Queue*>> subs;
    for (const auto& [sid, q] : o.subs) subs.emplace_back(rename_.at(static_cast<std::size_t>(sid)), &q);
    std::sort(subs.begin(), subs.end());
    out += " s:";
    for (const auto& [sid, q] : subs) {
      out += "#" + std::to_string(sid) + "[";
      for (const Value& v : *q) {
        value(out, v, false);
        out += ',';
      }
      out += ']';
    }
    out += " p:";
    for (const Value& v : o.published) {
      value(out, v, false);
      out += ',';
    }
    out += "}";
  }

  const Machine& m_;
  ExprCache& exprs_;
  std::vector<ObjId> rename_;
  std::vector<ObjId> order_;
};

std::string render_sequence(const HeapObject& o) {
  std::string out = "[";
  for (std::size_t i = 0; i < o.published.size(); ++i) {
    if (i) out += ", ";
    out += o.published[i].str();
  }
  return out + (o.done ? "] done" : "] running");
}

// A done observable stays done, keeps its subscriber set, and never
// lengthens a queue or publishes again.
std::vector<std::string> protocol_violations(const Heap& before, const Heap& after) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < before.size() && i < after.size(); ++i) {
    const auto id = static_cast<ObjId>(i);
    if (before.ptr(id) == after.ptr(id)) continue;
    const HeapObject& b = before.at(id);
    const HeapObject& a = after.at(id);
    if (!b.observable || !b.done) continue;
    const std::string name = "#" + std::to_string(i);
    if (!a.done) out.push_back(name + " returned to running");
    if (a.published.size() != b.published.size()) out.push_back(name + " published while done");
    for (const auto& [sid, q] : a.subs) {
      auto it = b.subs.find(sid);
      if (it == b.subs.end()) {
        out.push_back(name + " gained subscriber #" + std::to_string(sid) + " while done");
      } else if (q.size() > it->second.size()) {
        out.push_back(name + " queue of #" + std::to_string(sid) + " grew while done");
      }
    }
  }
  return out;
}

struct Node {
  Machine machine;
  std::ptrdiff_t parent = -1;
  /// Choices from the parent, in order.
  std::vector<Choice> via;
  std::size_t depth = 0;
};

std::vector<Choice> trace_to(const std::vector<Node>& nodes, std::ptrdiff_t i) {
  std::vector<Choice> out;
  while (i > 0) {
    const auto& via = nodes[static_cast<std::size_t>(i)].via;
    out.insert(out.end(), via.rbegin(), via.rend());
    i = nodes[static_cast<std::size_t>(i)].parent;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

constexpr std::size_t kMaxFindings = 50;

void add_finding(std::vector<ExploreFinding>& list, std::vector<Choice> trace, std::string msg) {
  if (list.size() < kMaxFindings) list.push_back({std::move(trace), std::move(msg)});
}

// How a transition uses observables and plain objects, or how a stack may
// use them later. Observable uses: yield and return by the owner; await,
// subscribe and unsubscribe by a subscriber.
struct Footprint {
  std::set<ObjId> yield, ret, await, sub, unsub, plain;
  /// May await on or subscribe to arbitrary observables.
  bool any_sub = false;
  bool any_plain = false;

  void add(const Footprint& o) {
    for (auto [mine, theirs] : {std::pair{&yield, &o.yield}, {&ret, &o.ret}, {&await, &o.await},
                                {&sub, &o.sub}, {&unsub, &o.unsub}, {&plain, &o.plain}}) {
      mine->insert(theirs->begin(), theirs->end());
    }
    any_sub = any_sub || o.any_sub;
    any_plain = any_plain || o.any_plain;
  }

  bool touches_nothing() const {
    return yield.empty() && ret.empty() && await.empty() && sub.empty() && unsub.empty() &&
           plain.empty();
  }

  /// True when this transition may not commute with a use in `o`.
  bool conflicts(const Footprint& o) const {
    auto meets = [](const std::set<ObjId>& a, std::initializer_list<const std::set<ObjId>*> bs) {
      return std::any_of(a.begin(), a.end(), [&](ObjId id) {
        return std::any_of(bs.begin(), bs.end(), [&](const std::set<ObjId>* b) { return b->count(id) != 0; });
      });
    };
    if (o.any_sub && !(yield.empty() && ret.empty() && await.empty())) return true;
    if (o.any_plain && !plain.empty()) return true;
    if (any_plain && !o.plain.empty()) return true;
    return meets(yield, {&o.unsub, &o.sub, &o.await}) || meets(ret, {&o.sub, &o.await}) ||
           meets(unsub, {&o.yield}) || meets(sub, {&o.yield, &o.ret}) ||
           meets(await, {&o.yield, &o.ret, &o.await}) || meets(plain, {&o.plain});
  }
};

// Binders of `e`, mapped to whether every binding allocates a fresh object.
void binders(const Expr& e, std::map<std::string, bool>& out) {
  if (e.kind == ExprKind::Let) {
    bool fresh = e.first->kind == ExprKind::RAsync || e.first->kind == ExprKind::New;
    auto [it, added] = out.emplace(e.name, fresh);
    if (!added) it->second = it->second && fresh;
  }
  for (const ExprPtr& o : e.operands) binders(*o, out);
  if (e.first) binders(*e.first, out);
  if (e.second) binders(*e.second, out);
}

// Over-approximates the objects a frame may reach through `name` while it
// runs: the current binding, plus anything if it may be rebound to an
// object that already exists.
void resolve(const ExprPtr& operand, const Frame& f, const std::map<std::string, bool>& bound,
             std::set<ObjId>& into, bool& any) {
  if (operand->kind != ExprKind::Var) {
    any = true;
    return;
  }
  auto b = bound.find(operand->name);
  if (b != bound.end() && !b->second) {
    any = true;
    return;
  }
  auto it = f.locals.find(operand->name);
  if (it == f.locals.end() || !it->second.is_ref()) return;
  into.insert(it->second.as_ref());
}

void scan(const Expr& e, const Frame& f, const std::map<std::string, bool>& bound, Footprint& fp) {
  switch (e.kind) {
    case ExprKind::Await:
      resolve(e.operands[0], f, bound, fp.await, fp.any_sub);
      break;
    case ExprKind::RAsync:
      for (const ExprPtr& src : e.operands) resolve(src, f, bound, fp.sub, fp.any_sub);
      break;
    case ExprKind::Select:
    case ExprKind::Assign:
      resolve(e.operands[0], f, bound, fp.plain, fp.any_plain);
      break;
    case ExprKind::Yield:
      if (f.label.async) fp.yield.insert(f.label.owner);
      break;
    case ExprKind::Invoke:
      fp.any_sub = fp.any_plain = true;
      if (f.label.async) fp.yield.insert(f.label.owner);
      break;
    default:
      break;
  }
  for (const ExprPtr& o : e.operands) scan(*o, f, bound, fp);
  if (e.first) scan(*e.first, f, bound, fp);
  if (e.second) scan(*e.second, f, bound, fp);
}

Footprint future_of(const Frame& f) {
  Footprint fp;
  if (f.label.async) {
    fp.ret.insert(f.label.owner);
    fp.unsub.insert(f.label.subs.begin(), f.label.subs.end());
  }
  std::map<std::string, bool> bound;
  binders(*f.expr, bound);
  scan(*f.expr, f, bound, fp);
  return fp;
}

// What taking `c` touches. Nullopt when the choice must not be taken alone.
std::optional<Footprint> choice_footprint(const Machine& m, const Choice& c, const Context& ctx) {
  const FrameStack& fs = m.process[c.stack];
  Footprint fp;
  switch (c.kind) {
    case ChoiceKind::Exit:
      return fp;
    case ChoiceKind::Yield:
      fp.yield.insert(fs.back().label.owner);
      return fp;
    case ChoiceKind::Return:
      fp.ret.insert(fs.back().label.owner);
      fp.unsub.insert(fs.back().label.subs.begin(), fs.back().label.subs.end());
      return fp;
    case ChoiceKind::Schedule:
      break;
  }
  StackStep s;
  try {
    s = step_stack(m.heap, fs, ctx);
  } catch (const RuntimeFault&) {
    return std::nullopt;
  }
  const std::string& rule = s.info.rule;
  if (is_local_rule(rule) || rule == "E-New") return fp;
  if (rule.rfind("E-Await", 0) == 0) {
    fp.await.insert(s.info.target);
    return fp;
  }
  if (rule == "E-RAsync") {
    fp.sub.insert(s.info.sources.begin(), s.info.sources.end());
    return fp;
  }
  if (rule == "E-Field" || rule == "E-Assign") {
    const Frame& top = fs.back();
    const Expr& e = *top.expr;
    const Expr& redex = e.kind == ExprKind::Let ? *e.first : e;
    if (redex.operands.empty() || redex.operands[0]->kind != ExprKind::Var) return std::nullopt;
    auto it = top.locals.find(redex.operands[0]->name);
    if (it == top.locals.end() || !it->second.is_ref()) return std::nullopt;
    fp.plain.insert(it->second.as_ref());
    return fp;
  }
  return std::nullopt;
}

// Index of a choice that commutes with everything the other stacks and
// the parked waiters can still do, preferring frame-local steps.
std::optional<std::size_t> independent_choice(const Machine& m, const std::vector<Choice>& choices,
                                              const Context& ctx) {
  std::vector<std::optional<Footprint>> fps;
  for (const Choice& c : choices) fps.push_back(choice_footprint(m, c, ctx));
  for (std::size_t k = 0; k < choices.size(); ++k) {
    if (fps[k] && fps[k]->touches_nothing()) return k;
  }
  Footprint waiting;
  for (std::size_t id = 0; id < m.heap.size(); ++id) {
    for (const Frame& w : m.heap.at(static_cast<ObjId>(id)).waiters) waiting.add(future_of(w));
  }
  std::vector<Footprint> futures(m.process.size());
  for (std::size_t i = 0; i < m.process.size(); ++i) {
    for (const Frame& f : m.process[i]) futures[i].add(future_of(f));
  }
  for (std::size_t k = 0; k < choices.size(); ++k) {
    if (!fps[k]) continue;
    Footprint others = waiting;
    for (std::size_t i = 0; i < futures.size(); ++i) {
      if (i != choices[k].stack) others.add(futures[i]);
    }
    if (!fps[k]->conflicts(others)) return k;
  }
  return std::nullopt;
}

}  // namespace

bool is_local_rule(const std::string& rule) {
  static const std::set<std::string> local = {"E-Var",  "E-LetAssoc", "E-Name", "E-Prim",
                                              "E-Cond", "E-While",    "E-Return", "E-Method"};
  return local.count(rule) != 0;
}

std::string canonical_key(const Machine& m) {
  ExprCache cache;
  return Canonicalizer(m, cache).key();
}

ExploreReport explore(const CheckedProgram& p, const SemanticsOptions& sem,
                      const ExploreLimits& limits, const TransitionCheck& check) {
  const Context ctx{&p.classes, sem};
  ExploreReport report;
  ExprCache cache;
  std::vector<Node> nodes;
  std::unordered_map<std::string, std::size_t> seen;
  std::deque<std::size_t> queue;

  nodes.push_back({initial_machine(p.program), -1, {}, 0});
  seen.emplace(Canonicalizer(nodes[0].machine, cache).key(), 0);
  queue.push_back(0);

  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    const Machine m = nodes[cur].machine;
    const std::size_t depth = nodes[cur].depth;
    report.max_depth_seen = std::max(report.max_depth_seen, depth);

    std::vector<Choice> choices = enabled_choices(m.heap, m.process, ctx);
    if (choices.empty()) {
      if (m.process.empty()) {
        ++report.finished;
      } else {
        add_finding(report.deadlocks, trace_to(nodes, static_cast<std::ptrdiff_t>(cur)),
                    std::to_string(m.process.size()) + " blocked stack(s)");
      }
      std::map<std::string, std::vector<std::string>> per_tag;
      for (std::size_t i = 0; i < m.heap.size(); ++i) {
        const HeapObject& o = m.heap.at(static_cast<ObjId>(i));
        if (o.observable) per_tag[o.tag].push_back(render_sequence(o));
      }
      for (auto& [tag, seqs] : per_tag) {
        std::sort(seqs.begin(), seqs.end());
        std::string joined;
        for (std::size_t i = 0; i < seqs.size(); ++i) joined += (i ? " | " : "") + seqs[i];
        report.sequences[tag].insert(joined);
      }
      continue;
    }
    if (limits.reduce) {
      // A lone choice is never taken into an ancestor, so no other choice
      // can be postponed around a cycle.
      if (auto k = independent_choice(m, choices, ctx)) {
        try {
          ProcessStep s = step_process(m.heap, m.process, choices[*k], ctx);
          Machine next{std::move(s.heap), std::move(s.process), m.steps + 1};
          auto hit = seen.find(Canonicalizer(next, cache).key());
          bool closes_cycle = false;
          if (hit != seen.end()) {
            for (auto i = static_cast<std::ptrdiff_t>(cur); i >= 0 && !closes_cycle;
                 i = nodes[static_cast<std::size_t>(i)].parent) {
              closes_cycle = static_cast<std::size_t>(i) == hit->second;
            }
          }
          if (!closes_cycle) choices = {choices[*k]};
        } catch (const RuntimeFault&) {
        }
      }
    }
    if (depth >= limits.max_depth) {
      report.depth_limit_hit = true;
      continue;
    }
    for (const Choice& c : choices) {
      std::vector<Choice> path;
      Machine next = m;
      // Applies one choice; false when it faults.
      auto apply = [&](const Choice& step) {
        ProcessStep s;
        path.push_back(step);
        try {
          s = step_process(next.heap, next.process, step, ctx);
        } catch (const RuntimeFault& fault) {
          std::vector<Choice> t = trace_to(nodes, static_cast<std::ptrdiff_t>(cur));
          t.insert(t.end(), path.begin(), path.end());
          add_finding(report.stuck, std::move(t), fault.what());
          return false;
        }
        ++report.transitions;
        Machine after{std::move(s.heap), std::move(s.process), next.steps + 1};
        std::vector<std::string> bad = protocol_violations(next.heap, after.heap);
        if (check) {
          std::vector<std::string> more = check(next, step, s.info, after);
          bad.insert(bad.end(), more.begin(), more.end());
        }
        if (!bad.empty()) {
          std::vector<Choice> t = trace_to(nodes, static_cast<std::ptrdiff_t>(cur));
          t.insert(t.end(), path.begin(), path.end());
          for (std::string& msg : bad) add_finding(report.violations, t, s.info.rule + ": " + msg);
        }
        next = std::move(after);
        return true;
      };
      if (!apply(c)) continue;
      // Steps that touch nothing shared are folded into this transition.
      bool ok = true;
      while (limits.reduce && ok && depth + path.size() < limits.max_depth) {
        std::optional<Choice> quiet;
        for (const Choice& q : enabled_choices(next.heap, next.process, ctx)) {
          auto fp = choice_footprint(next, q, ctx);
          if (fp && fp->touches_nothing()) {
            quiet = q;
            break;
          }
        }
        if (!quiet) break;
        ok = apply(*quiet);
      }
      if (!ok) continue;
      std::string key = Canonicalizer(next, cache).key();
      if (seen.count(key)) continue;
      if (nodes.size() >= limits.max_states) {
        report.state_limit_hit = true;
        continue;
      }
      seen.emplace(std::move(key), nodes.size());
      const std::size_t d = depth + path.size();
      nodes.push_back({std::move(next), static_cast<std::ptrdiff_t>(cur), std::move(path), d});
      queue.push_back(nodes.size() - 1);
    }
  }
  report.states = nodes.size();
  return report;
}

nlohmann::json to_json(const ExploreReport& r) {
  auto findings = [](const std::vector<ExploreFinding>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& f : list) {
      nlohmann::json trace = nlohmann::json::array();
      for (const Choice& c : f.trace) trace.push_back(c.str());
      out.push_back({{"message", f.message}, {"trace", trace}});
    }
    return out;
  };
  nlohmann::json seqs = nlohmann::json::object();
  for (const auto& [tag, set] : r.sequences) {
    seqs[tag] = nlohmann::json(std::vector<std::string>(set.begin(), set.end()));
  }
  return {{"states", r.states},
          {"transitions", r.transitions},
          {"finished", r.finished},
          {"maxDepth", r.max_depth_seen},
          {"deadlocks", findings(r.deadlocks)},
          {"stuck", findings(r.stuck)},
          {"violations", findings(r.violations)},
          {"sequences", seqs},
          {"stateLimitHit", r.state_limit_hit},
          {"depthLimitHit", r.depth_limit_hit}};
}

}  // namespace ray

#include "ray/conformance.hpp"

#include <algorithm>

namespace ray {

namespace {

std::string id_str(ObjId id) { return "#" + std::to_string(id); }

std::string ids_str(const std::vector<ObjId>& ids) {
  std::string out = "[";
  for (std::size_t i = 0; i < ids.size(); ++i) out += (i ? ", " : "") + id_str(ids[i]);
  return out + "]";
}

bool same_frame(const Frame& a, const Frame& b) {
  return a.locals == b.locals && equal(a.expr, b.expr) && a.label == b.label &&
         a.ret_var == b.ret_var;
}

bool same_waiters(const std::vector<Frame>& a, const std::vector<Frame>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_frame(a[i], b[i])) return false;
  }
  return true;
}

bool same_object(const HeapObject& a, const HeapObject& b) {
  if (a.observable != b.observable) return false;
  if (!a.observable) return a.cls == b.cls && a.fields == b.fields;
  return a.elem == b.elem && a.done == b.done && a.subs == b.subs &&
         same_waiters(a.waiters, b.waiters);
}

std::vector<ObjId> keys(const Subscribers& s) {
  std::vector<ObjId> out;
  for (const auto& [k, q] : s) out.push_back(k);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Well-formedness
// ---------------------------------------------------------------------------

void WfReport::add(std::string judgment, std::string subject, std::string message) {
  violations.push_back({std::move(judgment), std::move(subject), std::move(message)});
}

void WfReport::merge(const WfReport& other) {
  violations.insert(violations.end(), other.violations.begin(), other.violations.end());
}

std::string WfReport::str() const {
  std::string out;
  for (const WfViolation& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.judgment + " " + v.subject + ": " + v.message;
  }
  return out;
}

WfReport check_frame_ok(const Heap& h, const Frame& f) {
  WfReport r;
  if (!f.label.async) return r;
  const ObjId o = f.label.owner;
  const std::string subject = "frame " + f.label.str();
  if (!h.contains(o) || !h.at(o).observable) {
    r.add("AF-ok", subject, "owner " + id_str(o) + " is not an observable");
    return r;
  }
  if (h.at(o).done) r.add("AF-ok", subject, "owner " + id_str(o) + " is done");
  for (std::size_t id = 0; id < h.size(); ++id) {
    const HeapObject& obj = h.at(static_cast<ObjId>(id));
    if (!obj.observable) continue;
    std::vector<ObjId> waiting = obs_ids(obj.waiters);
    if (std::find(waiting.begin(), waiting.end(), o) != waiting.end()) {
      r.add("AF-ok", subject, "owner is also waiting on " + id_str(static_cast<ObjId>(id)));
    }
    if (obj.subs.count(o) &&
        std::find(f.label.subs.begin(), f.label.subs.end(), static_cast<ObjId>(id)) ==
            f.label.subs.end()) {
      r.add("AF-ok", subject,
            "subscribed to " + id_str(static_cast<ObjId>(id)) + " which is not a source");
    }
  }
  return r;
}

WfReport check_stack_ok(const Heap& h, const FrameStack& fs) {
  WfReport r;
  std::set<ObjId> owners;
  for (const Frame& f : fs) {
    r.merge(check_frame_ok(h, f));
    if (f.label.async && !owners.insert(f.label.owner).second) {
      r.add("FS-ok", "owner " + id_str(f.label.owner), "owns two frames of one stack");
    }
  }
  return r;
}

WfReport check_heap_ok(const Heap& h) {
  WfReport r;
  std::map<ObjId, ObjId> waiting_on;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const ObjId id = static_cast<ObjId>(i);
    const HeapObject& obj = h.at(id);
    if (!obj.observable) continue;
    std::vector<ObjId> owners = obs_ids(obj.waiters);
    if (obj.waiters.size() != owners.size()) {
      r.add("ROHO-ok", id_str(id), "a waiter is not an async frame");
    }
    if (obj.done) {
      if (!obj.waiters.empty()) r.add("DOHO-ok", id_str(id), "done observable has waiters");
      continue;
    }
    std::set<ObjId> local;
    for (ObjId w : owners) {
      if (!local.insert(w).second) {
        r.add("ROHO-ok", id_str(id), "waiter owner " + id_str(w) + " appears twice");
      }
      if (!h.contains(w) || !h.at(w).observable || h.at(w).done) {
        r.add("ROHO-ok", id_str(id), "waiter owner " + id_str(w) + " is not running");
      }
      auto [it, added] = waiting_on.emplace(w, id);
      if (!added && it->second != id) {
        r.add("H-ok", id_str(id),
              "waiter owner " + id_str(w) + " also waits on " + id_str(it->second));
      }
    }
  }
  return r;
}

WfReport check_process_ok(const Heap& h, const Process& p) {
  WfReport r;
  std::map<ObjId, std::size_t> owner_stack;
  for (std::size_t i = 0; i < p.size(); ++i) {
    WfReport s = check_stack_ok(h, p[i]);
    for (WfViolation& v : s.violations) v.subject = "stack " + std::to_string(i) + " " + v.subject;
    r.merge(s);
    for (ObjId o : obs_ids(p[i])) {
      auto [it, added] = owner_stack.emplace(o, i);
      if (!added && it->second != i) {
        r.add("Proc-ok", "owner " + id_str(o),
              "in stacks " + std::to_string(it->second) + " and " + std::to_string(i));
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Heap evolution
// ---------------------------------------------------------------------------

const char* evolution_name(Evolution e) {
  switch (e) {
    case Evolution::Unchanged:
      return "Unchanged";
    case Evolution::New:
      return "New";
    case Evolution::PlainUpdated:
      return "PlainUpdated";
    case Evolution::DoneQueueStep:
      return "DoneQueueStep";
    case Evolution::RunningAddedSubscriber:
      return "RunningAddedSubscriber";
    case Evolution::RunningFlushed:
      return "RunningFlushed";
    case Evolution::RunningAddedWaiters:
      return "RunningAddedWaiters";
    case Evolution::BecameDone:
      return "BecameDone";
    case Evolution::QueueConsumed:
      return "QueueConsumed";
    case Evolution::Unsubscribed:
      return "Unsubscribed";
    case Evolution::Invalid:
      return "Invalid";
  }
  return "?";
}

std::vector<ObjectEvolution> EvolutionWitness::changes() const {
  std::vector<ObjectEvolution> out;
  for (const ObjectEvolution& o : objects) {
    if (o.kind != Evolution::Unchanged) out.push_back(o);
  }
  return out;
}

namespace {

// Keys of `b` minus keys of `a`, or nullopt when `b` lost a key or an
// existing queue changed.
std::optional<std::vector<ObjId>> added_queues(const Subscribers& a, const Subscribers& b) {
  for (const auto& [k, q] : a) {
    auto it = b.find(k);
    if (it == b.end() || it->second != q) return std::nullopt;
  }
  std::vector<ObjId> out;
  for (const auto& [k, q] : b) {
    if (!a.count(k)) {
      if (!q.empty()) return std::nullopt;
      out.push_back(k);
    }
  }
  return out;
}

// True when `b` is `a` with the entries of `gone` removed.
bool removed_exactly(const Subscribers& a, const Subscribers& b, const std::set<ObjId>& gone) {
  if (b.size() + gone.size() != a.size()) return false;
  for (const auto& [k, q] : a) {
    auto it = b.find(k);
    if (gone.count(k)) {
      if (it != b.end()) return false;
    } else if (it == b.end() || it->second != q) {
      return false;
    }
  }
  return true;
}

// Same domain, differing in at most `n` queues.
std::optional<std::vector<ObjId>> changed_queues(const Subscribers& a, const Subscribers& b) {
  if (keys(a) != keys(b)) return std::nullopt;
  std::vector<ObjId> out;
  for (const auto& [k, q] : a) {
    if (b.at(k) != q) out.push_back(k);
  }
  return out;
}

bool tail_consumed(const Queue& before, const Queue& after) {
  if (after.size() + 1 != before.size()) return false;
  return std::equal(after.begin(), after.end(), before.begin());
}

// New waiters of `b` over `a`: `a`'s waiters must reappear as a prefix
// or a suffix.
std::optional<std::vector<Frame>> added_waiters(const std::vector<Frame>& a,
                                                const std::vector<Frame>& b) {
  if (b.size() <= a.size()) return std::nullopt;
  const std::size_t n = b.size() - a.size();
  bool prefix = true, suffix = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    prefix = prefix && same_frame(a[i], b[i]);
    suffix = suffix && same_frame(a[i], b[i + n]);
  }
  if (prefix) return std::vector<Frame>(b.begin() + static_cast<std::ptrdiff_t>(a.size()), b.end());
  if (suffix) return std::vector<Frame>(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(n));
  return std::nullopt;
}

ObjectEvolution classify(ObjId id, const HeapObject& a, const HeapObject& b,
                         const std::set<ObjId>& bound, bool extended) {
  ObjectEvolution out{id, Evolution::Invalid, false, {}};
  auto fail = [&](std::string msg) {
    out.kind = Evolution::Invalid;
    out.message = std::move(msg);
    return out;
  };
  auto pass = [&](Evolution k, bool ext = false) {
    out.kind = k;
    out.extended = ext;
    return out;
  };
  if (same_object(a, b)) return pass(Evolution::Unchanged);
  if (a.observable != b.observable) return fail("object kind changed");
  if (!a.observable) {
    if (a.cls != b.cls) return fail("class changed from " + a.cls + " to " + b.cls);
    return pass(Evolution::PlainUpdated);
  }
  if (a.elem != b.elem) return fail("element type changed");

  if (a.done) {
    if (!b.done) return fail("done observable is running again");
    if (!b.waiters.empty()) return fail("done observable gained waiters");
    if (auto ch = changed_queues(a.subs, b.subs); ch && ch->size() <= 1) {
      return pass(Evolution::DoneQueueStep);
    }
    if (extended && b.subs.size() + 1 == a.subs.size()) {
      for (const auto& [k, q] : a.subs) {
        if (removed_exactly(a.subs, b.subs, {k})) return pass(Evolution::Unsubscribed, true);
      }
    }
    return fail("done observable subscribers changed beyond one queue");
  }

  const std::vector<ObjId> waiting = obs_ids(a.waiters);
  if (b.done) {
    if (!b.waiters.empty()) return fail("done observable kept waiters");
    if (b.subs == a.subs) return pass(Evolution::BecameDone);
    if (extended) {
      auto added = added_queues(a.subs, b.subs);
      if (added && std::all_of(added->begin(), added->end(), [&](ObjId k) {
            return std::find(waiting.begin(), waiting.end(), k) != waiting.end();
          })) {
        return pass(Evolution::BecameDone, true);
      }
    }
    return fail("subscribers changed on completion");
  }

  // Running to running.
  if (same_waiters(a.waiters, b.waiters)) {
    auto added = added_queues(a.subs, b.subs);
    if (added && added->size() == 1) return pass(Evolution::RunningAddedSubscriber);
  }
  if (b.waiters.empty() && keys(b.subs) == keys(a.subs)) return pass(Evolution::RunningFlushed);
  if (auto g = added_waiters(a.waiters, b.waiters)) {
    std::vector<ObjId> gids = obs_ids(*g);
    for (ObjId w : gids) {
      if (std::find(waiting.begin(), waiting.end(), w) != waiting.end()) {
        return fail("new waiter " + id_str(w) + " was already waiting");
      }
      if (!bound.count(w)) return fail("new waiter " + id_str(w) + " is outside the bound");
    }
    if (b.subs == a.subs) return pass(Evolution::RunningAddedWaiters);
    if (extended) {
      std::set<ObjId> gone;
      for (ObjId w : gids) {
        auto it = a.subs.find(w);
        if (it != a.subs.end() && it->second.empty()) gone.insert(w);
      }
      if (removed_exactly(a.subs, b.subs, gone)) return pass(Evolution::RunningAddedWaiters, true);
    }
    return fail("subscribers changed while adding waiters");
  }
  if (extended) {
    if (b.waiters.empty()) {
      std::vector<ObjId> grown = keys(b.subs);
      bool covered = true;
      for (ObjId k : grown) {
        if (!a.subs.count(k)) {
          covered = covered && b.subs.at(k).empty() &&
                    std::find(waiting.begin(), waiting.end(), k) != waiting.end();
        }
      }
      for (const auto& [k, q] : a.subs) covered = covered && b.subs.count(k);
      if (covered) return pass(Evolution::RunningFlushed, true);
    }
    if (same_waiters(a.waiters, b.waiters)) {
      if (auto ch = changed_queues(a.subs, b.subs);
          ch && ch->size() == 1 && tail_consumed(a.subs.at(ch->front()), b.subs.at(ch->front()))) {
        return pass(Evolution::QueueConsumed, true);
      }
      if (b.subs.size() + 1 == a.subs.size()) {
        for (const auto& [k, q] : a.subs) {
          if (removed_exactly(a.subs, b.subs, {k})) return pass(Evolution::Unsubscribed, true);
        }
      }
    }
  }
  return fail("running observable changed outside every clause (subscribers " +
              ids_str(keys(a.subs)) + " -> " + ids_str(keys(b.subs)) + ", waiters " +
              std::to_string(a.waiters.size()) + " -> " + std::to_string(b.waiters.size()) + ")");
}

}  // namespace

EvolutionResult heap_evolves(const Heap& h, const Heap& h2, const std::set<ObjId>& bound,
                             EvolutionMode mode) {
  EvolutionResult r;
  r.witness.bound = bound;
  const bool extended = mode == EvolutionMode::Extended;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const ObjId id = static_cast<ObjId>(i);
    if (!h2.contains(id)) {
      r.witness.objects.push_back({id, Evolution::Invalid, false, "object disappeared"});
      r.ok = false;
      continue;
    }
    if (h.ptr(id) == h2.ptr(id)) {
      r.witness.objects.push_back({id, Evolution::Unchanged, false, {}});
      continue;
    }
    ObjectEvolution e = classify(id, h.at(id), h2.at(id), bound, extended);
    r.ok = r.ok && e.kind != Evolution::Invalid;
    r.witness.objects.push_back(std::move(e));
  }
  for (std::size_t i = h.size(); i < h2.size(); ++i) {
    const ObjId id = static_cast<ObjId>(i);
    const HeapObject& o = h2.at(id);
    if (o.observable && !o.done && (!o.waiters.empty() || !o.subs.empty())) {
      r.witness.objects.push_back({id, Evolution::Invalid, false, "new observable is not empty"});
      r.ok = false;
    } else {
      r.witness.objects.push_back({id, Evolution::New, false, {}});
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Runtime typing
// ---------------------------------------------------------------------------

namespace {

// Value typing that lets None inhabit every option type.
bool value_fits(const Heap& h, const Value& v, const Type& want) {
  if (v.kind() == ValueKind::None) return want.kind() == TypeKind::Option;
  if (v.kind() == ValueKind::Some) {
    return want.kind() == TypeKind::Option && value_fits(h, v.inner(), want.elem());
  }
  return compatible(value_type(h, v), want);
}

const MethodDecl* method_of_scope(const CheckedProgram& p, const std::string& scope) {
  const auto dot = scope.find('.');
  if (dot == std::string::npos) return nullptr;
  const std::string cls = scope.substr(0, dot);
  const std::string m = scope.substr(dot + 1);
  if (!p.classes.has_class(cls)) return nullptr;
  for (const MethodDecl& md : p.classes.decl(cls).methods) {
    if (md.name == m) return &md;
  }
  return nullptr;
}

}  // namespace

std::optional<Type> type_frame(const Heap& h, const Frame& f, const CheckedProgram& p,
                               WfReport& report, const std::string& subject,
                               const std::map<std::string, Type>& extra) {
  auto scope_it = p.types.scopes.find(f.scope);
  VarTable table = scope_it == p.types.scopes.end() ? VarTable{} : scope_it->second;
  std::map<std::string, Type> declared;
  if (const MethodDecl* md = method_of_scope(p, f.scope)) {
    for (const Param& prm : md->params) declared[prm.name] = prm.type;
    declared["this"] = Type::class_type(f.scope.substr(0, f.scope.find('.')));
  }

  TypeEnv env;
  bool ok = true;
  for (const auto& [name, v] : f.locals) {
    Type vt;
    try {
      vt = value_type(h, v);
    } catch (const RuntimeFault& e) {
      report.add("frame-type", subject, "local " + name + ": " + e.what());
      ok = false;
      continue;
    }
    std::optional<Type> want;
    if (auto d = declared.find(name); d != declared.end()) {
      want = d->second;
    } else if (auto t = table.find(name); t != table.end()) {
      want = t->second;
    }
    if (want && !value_fits(h, v, *want)) {
      report.add("frame-type", subject,
                 "local " + name + " holds " + vt.str() + " but is typed " + want->str());
      ok = false;
    }
    env.gamma[name] = want ? *want : vt;
  }
  for (const auto& [name, t] : extra) {
    if (auto w = table.find(name); w != table.end()) {
      if (!compatible(t, w->second)) {
        report.add("stack-type", subject,
                   "return variable " + name + " receives " + t.str() + " but is typed " +
                       w->second.str());
        ok = false;
      }
      env.gamma[name] = w->second;
    } else {
      env.gamma[name] = t;
    }
  }
  if (f.label.async) {
    if (!h.contains(f.label.owner) || !h.at(f.label.owner).observable) {
      report.add("frame-type", subject, "owner " + id_str(f.label.owner) + " is not an observable");
      return std::nullopt;
    }
    env.delta = {h.at(f.label.owner).elem};
  }
  env.vars = scope_it == p.types.scopes.end() ? nullptr : &table;
  env.frozen_vars = true;
  if (!ok) return std::nullopt;
  try {
    return type_expr(env, p.classes, *f.expr);
  } catch (const Error& e) {
    report.add("frame-type", subject, e.message());
    return std::nullopt;
  }
}

WfReport type_state(const Heap& h, const Process& proc, const CheckedProgram& p) {
  WfReport r;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const ObjId id = static_cast<ObjId>(i);
    const HeapObject& obj = h.at(id);
    const std::string subject = id_str(id);
    auto check_value = [&](const Value& v, const Type& want, const std::string& where) {
      try {
        Type vt = value_type(h, v);
        if (!value_fits(h, v, want)) {
          r.add("heap-type", subject, where + " holds " + vt.str() + ", expected " + want.str());
        }
      } catch (const RuntimeFault& e) {
        r.add("heap-type", subject, where + ": " + e.what());
      }
    };
    if (!obj.observable) {
      if (!p.classes.has_class(obj.cls)) {
        r.add("heap-type", subject, "unknown class " + obj.cls);
        continue;
      }
      const Type cls = Type::class_type(obj.cls);
      for (const std::string& fname : p.classes.fields(obj.cls)) {
        auto it = obj.fields.find(fname);
        if (it == obj.fields.end()) {
          r.add("heap-type", subject, "missing field " + fname);
          continue;
        }
        check_value(it->second, p.classes.ftype(cls, fname), "field " + fname);
      }
      if (obj.fields.size() != p.classes.fields(obj.cls).size()) {
        r.add("heap-type", subject, "unexpected fields");
      }
      continue;
    }
    for (const auto& [k, q] : obj.subs) {
      for (const Value& v : q) check_value(v, obj.elem, "queue of " + id_str(k));
    }
    for (const Value& v : obj.published) check_value(v, obj.elem, "published event");
    for (std::size_t w = 0; w < obj.waiters.size(); ++w) {
      const Frame& f = obj.waiters[w];
      const std::string ws = subject + " waiter " + std::to_string(w);
      if (!f.label.async || f.expr->kind != ExprKind::Let || f.expr->first->kind != ExprKind::Await) {
        r.add("heap-type", ws, "waiter is not an awaiting async frame");
        continue;
      }
      type_frame(h, f, p, r, ws);
    }
  }
  for (std::size_t s = 0; s < proc.size(); ++s) {
    const FrameStack& fs = proc[s];
    std::optional<Type> above;
    for (std::size_t k = fs.size(); k-- > 0;) {
      const Frame& f = fs[k];
      const std::string subject = "stack " + std::to_string(s) + " frame " + std::to_string(k);
      std::map<std::string, Type> extra;
      if (f.ret_var) {
        if (k + 1 == fs.size()) {
          r.add("stack-type", subject, "return variable " + *f.ret_var + " with no callee");
        } else if (above) {
          extra[*f.ret_var] = *above;
        } else {
          above = std::nullopt;
          continue;
        }
      }
      above = type_frame(h, f, p, r, subject, extra);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const WfReport& r) {
  nlohmann::json out = nlohmann::json::array();
  for (const WfViolation& v : r.violations) {
    out.push_back({{"judgment", v.judgment}, {"subject", v.subject}, {"message", v.message}});
  }
  return out;
}

nlohmann::json to_json(const EvolutionWitness& w) {
  nlohmann::json objs = nlohmann::json::object();
  for (const ObjectEvolution& o : w.objects) {
    nlohmann::json j = {{"kind", evolution_name(o.kind)}};
    if (o.extended) j["extended"] = true;
    if (!o.message.empty()) j["message"] = o.message;
    objs[id_str(o.id)] = j;
  }
  nlohmann::json bound = nlohmann::json::array();
  for (ObjId b : w.bound) bound.push_back(id_str(b));
  return {{"objects", objs}, {"bound", bound}};
}

}  // namespace ray

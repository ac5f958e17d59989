#include <algorithm>

#include "ray/conformance.hpp"

namespace ray {

namespace {

std::string id_str(ObjId id) { return "#" + std::to_string(id); }

void add_all(std::vector<std::string>& out, const std::string& check, const WfReport& r) {
  for (const WfViolation& v : r.violations) {
    out.push_back(check + ": " + v.judgment + " " + v.subject + ": " + v.message);
  }
}

void yield_fan_out(const Heap& before, const Heap& after, const StepInfo& info,
                   std::vector<std::string>& out) {
  const HeapObject& a = before.at(info.target);
  const HeapObject& b = after.at(info.target);
  if (!b.waiters.empty()) out.push_back("yield-fan-out: waiters remain after yield");
  for (const auto& [k, q] : a.subs) {
    auto it = b.subs.find(k);
    if (it == b.subs.end()) {
      out.push_back("yield-fan-out: subscriber " + id_str(k) + " dropped");
      continue;
    }
    const Queue& q2 = it->second;
    if (q2.size() != q.size() + 1 || q2.front() != *info.value ||
        !std::equal(q.begin(), q.end(), q2.begin() + 1)) {
      out.push_back("yield-fan-out: queue of " + id_str(k) + " is not the old queue with " +
                    info.value->str() + " at the head");
    }
  }
  std::vector<ObjId> waiting = obs_ids(a.waiters);
  for (const auto& [k, q] : b.subs) {
    if (a.subs.count(k)) continue;
    if (!q.empty() || std::find(waiting.begin(), waiting.end(), k) == waiting.end()) {
      out.push_back("yield-fan-out: unexpected subscriber " + id_str(k));
    }
  }
}

void return_finality(const Heap& after, const StepInfo& info, std::vector<std::string>& out) {
  const ObjId o = info.target;
  if (!after.at(o).done) out.push_back("return-finality: owner " + id_str(o) + " is not done");
  for (ObjId src : info.sources) {
    if (after.at(src).subs.count(o)) {
      out.push_back("return-finality: " + id_str(o) + " still subscribed to " + id_str(src));
    }
  }
}

void await_conservation(const Heap& before, const Heap& after, const StepInfo& info,
                        std::vector<std::string>& out) {
  const HeapObject& a = before.at(info.target);
  const HeapObject& b = after.at(info.target);
  std::size_t changed = 0;
  for (const auto& [k, q] : a.subs) {
    auto it = b.subs.find(k);
    if (it == b.subs.end()) {
      out.push_back("await-conservation: subscriber " + id_str(k) + " dropped");
      continue;
    }
    if (it->second == q) continue;
    ++changed;
    if (k != info.owner) {
      out.push_back("await-conservation: queue of " + id_str(k) + " changed");
    } else if (it->second.size() + 1 != q.size() || !info.value || q.back() != *info.value) {
      out.push_back("await-conservation: delivered value is not the removed tail");
    }
  }
  if (changed != 1) {
    out.push_back("await-conservation: " + std::to_string(changed) + " queues changed");
  }
}

void done_monotonic(const Heap& before, const Heap& after, std::vector<std::string>& out) {
  for (std::size_t i = 0; i < before.size(); ++i) {
    const ObjId id = static_cast<ObjId>(i);
    const HeapObject& a = before.at(id);
    if (!a.observable || !a.done) continue;
    const HeapObject& b = after.at(id);
    if (!b.done) {
      out.push_back("done-monotonic: " + id_str(id) + " is running again");
      continue;
    }
    for (const auto& [k, q] : b.subs) {
      auto it = a.subs.find(k);
      if (it == a.subs.end() || q.size() > it->second.size()) {
        out.push_back("done-monotonic: " + id_str(id) + " grew the queue of " + id_str(k));
      }
    }
  }
}

std::set<ObjId> bound_for(const StepInfo& info) {
  if (info.level == StepLevel::Frame) return {};
  return {info.stack_obs.begin(), info.stack_obs.end()};
}

// Undelivered events per (source, subscriber), oldest first.
class QueueModel {
 public:
  void step(const Machine& before, const StepInfo& info, std::vector<std::string>& out) {
    const std::string& rule = info.rule;
    if (rule == "E-RAsync") {
      for (ObjId src : info.sources) pending_[{src, info.target}].clear();
    } else if (rule == "E-Yield") {
      const HeapObject& o = before.heap.at(info.target);
      std::set<ObjId> recipients;
      for (const auto& [k, q] : o.subs) recipients.insert(k);
      for (ObjId w : obs_ids(o.waiters)) recipients.insert(w);
      for (ObjId r : recipients) pending_[{info.target, r}].push_back(*info.value);
      for (ObjId w : obs_ids(o.waiters)) deliver(info.target, w, *info.value, out);
    } else if (rule == "E-Await2" || rule == "E-Await3") {
      deliver(info.target, info.owner, *info.value, out);
    } else if (rule == "E-Await1" || rule == "E-Await4") {
      expect_empty(info.target, info.owner, rule, out);
    } else if (rule == "E-RAsync-Return") {
      for (ObjId w : obs_ids(before.heap.at(info.target).waiters)) {
        expect_empty(info.target, w, rule, out);
      }
      for (ObjId src : info.sources) pending_.erase({src, info.target});
    }
  }

 private:
  void deliver(ObjId src, ObjId sub, const Value& v, std::vector<std::string>& out) {
    auto& q = pending_[{src, sub}];
    if (q.empty()) {
      out.push_back("queue-order: " + id_str(sub) + " received " + v.str() + " from " +
                    id_str(src) + " with nothing pending");
      return;
    }
    if (q.front() != v) {
      out.push_back("queue-order: " + id_str(sub) + " received " + v.str() + " from " +
                    id_str(src) + " but the oldest pending event is " + q.front().str());
    }
    q.pop_front();
  }

  void expect_empty(ObjId src, ObjId sub, const std::string& rule, std::vector<std::string>& out) {
    auto it = pending_.find({src, sub});
    if (it != pending_.end() && !it->second.empty()) {
      out.push_back("queue-order: " + rule + " while " + std::to_string(it->second.size()) +
                    " event(s) from " + id_str(src) + " are pending for " + id_str(sub));
    }
  }

  std::map<std::pair<ObjId, ObjId>, std::deque<Value>> pending_;
};

}  // namespace

bool fault_is_admissible(FaultKind k) {
  return k == FaultKind::NullDeref || k == FaultKind::OptionGetOnNone ||
         k == FaultKind::AwaitNotSubscribed || k == FaultKind::SubscribeToDone;
}

std::vector<std::string> check_transition(const CheckedProgram& p, const Machine& before,
                                          const Choice& choice, const StepInfo& info,
                                          const Machine& after, EvolutionMode mode) {
  std::vector<std::string> out;
  add_all(out, "heap-ok", check_heap_ok(after.heap));
  add_all(out, "process-ok", check_process_ok(after.heap, after.process));
  add_all(out, "typing", type_state(after.heap, after.process, p));

  if (info.level != StepLevel::Process || mode == EvolutionMode::Extended) {
    EvolutionResult ev = heap_evolves(before.heap, after.heap, bound_for(info), mode);
    if (!ev.ok) {
      for (const ObjectEvolution& o : ev.witness.objects) {
        if (o.kind == Evolution::Invalid) out.push_back("evolution: " + id_str(o.id) + ": " + o.message);
      }
    }
  }
  if (info.level == StepLevel::Frame) {
    const Label& l1 = before.process[choice.stack].back().label;
    const Label& l2 = after.process[choice.stack].back().label;
    if (!(l1 == l2)) out.push_back("label-preservation: " + l1.str() + " became " + l2.str());
  }
  if (info.rule == "E-Yield") yield_fan_out(before.heap, after.heap, info, out);
  if (info.rule == "E-RAsync-Return") return_finality(after.heap, info, out);
  if (info.rule == "E-Await2" || info.rule == "E-Await3") {
    await_conservation(before.heap, after.heap, info, out);
  }
  done_monotonic(before.heap, after.heap, out);
  return out;
}

TransitionCheck transition_checker(const CheckedProgram& p, EvolutionMode mode) {
  return [&p, mode](const Machine& before, const Choice& c, const StepInfo& info,
                    const Machine& after) { return check_transition(p, before, c, info, after, mode); };
}

HarnessReport subject_reduction_harness(const CheckedProgram& p, const HarnessOptions& opts) {
  HarnessReport report;
  const Machine init = initial_machine(p.program);
  std::vector<Choice> trace;
  auto record = [&](const std::string& rule, const std::string& entry) {
    const auto colon = entry.find(": ");
    report.violations.push_back({report.steps, rule, entry.substr(0, colon),
                                 colon == std::string::npos ? entry : entry.substr(colon + 2),
                                 trace});
  };
  {
    std::vector<std::string> init_bad;
    add_all(init_bad, "heap-ok", check_heap_ok(init.heap));
    add_all(init_bad, "process-ok", check_process_ok(init.heap, init.process));
    add_all(init_bad, "typing", type_state(init.heap, init.process, p));
    for (const std::string& b : init_bad) record("initial", b);
  }

  QueueModel model;
  RunOptions run = opts.run;
  run.record_trace = false;
  const Context ctx{&p.classes, opts.semantics};
  Outcome outcome = run_machine(
      init, ctx, run,
      [&](const Machine& before, const Choice& c, const StepInfo& info, const Machine& after) {
        trace.push_back(c);
        ++report.steps;
        ++report.rule_counts[info.rule];
        std::vector<std::string> bad = check_transition(p, before, c, info, after, opts.evolution);
        model.step(before, info, bad);
        for (const std::string& b : bad) record(info.rule, b);
      });
  report.outcome = outcome.kind;
  report.fault = outcome.fault;
  if (outcome.kind == OutcomeKind::Stuck && outcome.fault && !fault_is_admissible(*outcome.fault)) {
    record("stuck", "progress: " + outcome.reason);
  }
  return report;
}

nlohmann::json to_json(const HarnessReport& r) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [rule, n] : r.rule_counts) counts[rule] = n;
  nlohmann::json violations = nlohmann::json::array();
  for (const HarnessViolation& v : r.violations) {
    nlohmann::json trace = nlohmann::json::array();
    for (const Choice& c : v.trace) trace.push_back(c.str());
    violations.push_back({{"step", v.step},
                          {"rule", v.rule},
                          {"check", v.check},
                          {"message", v.message},
                          {"trace", trace}});
  }
  nlohmann::json j = {{"steps", r.steps},
                      {"outcome", outcome_kind_name(r.outcome)},
                      {"ruleCounts", counts},
                      {"violations", violations}};
  if (r.fault) j["fault"] = fault_kind_name(*r.fault);
  return j;
}

}  // namespace ray

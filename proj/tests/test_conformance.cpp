#include <doctest.h>

#include "support.hpp"

using namespace ray;

namespace {

bool has(const WfReport& r, const std::string& judgment) {
  for (const WfViolation& v : r.violations) {
    if (v.judgment == judgment) return true;
  }
  return false;
}

Frame async_frame(ObjId owner, std::vector<ObjId> subs) {
  Frame f;
  f.expr = mk::integer(0);
  f.label = Label::async_of(owner, std::move(subs));
  return f;
}

Frame waiter(ObjId owner, ObjId on) {
  Frame f;
  f.expr = mk::let("a", mk::await(mk::var("y")), mk::var("a"));
  f.locals["y"] = Value::ref(on);
  f.label = Label::async_of(owner, {on});
  return f;
}

HeapObject done_obs() {
  HeapObject o = HeapObject::running(Type::integer());
  o.done = true;
  return o;
}

Heap running_heap(int n) {
  Heap h;
  for (int i = 0; i < n; ++i) h.push(HeapObject::running(Type::integer()));
  return h;
}

std::size_t harness_violations(const CheckedProgram& p, Mutation m, int seeds) {
  std::size_t total = 0;
  for (int seed = -1; seed < seeds; ++seed) {
    HarnessOptions o;
    o.semantics.mutation = m;
    if (seed >= 0) {
      o.run.policy = Policy::Random;
      o.run.seed = static_cast<std::uint64_t>(seed);
    }
    total += subject_reduction_harness(p, o).violations.size();
  }
  return total;
}

}  // namespace

TEST_CASE("frame well-formedness") {
  Heap h;
  h.push(done_obs());
  h.push(HeapObject::running(Type::integer()));
  h.push(HeapObject::running(Type::integer()));
  CHECK(has(check_frame_ok(h, async_frame(0, {})), "AF-ok"));
  CHECK(check_frame_ok(h, Frame{}).ok());
  CHECK(check_frame_ok(h, async_frame(1, {2})).ok());
  HeapObject src = h.at(2);
  src.subs[1] = {};
  h.set(2, src);
  CHECK(has(check_frame_ok(h, async_frame(1, {})), "AF-ok"));
  CHECK(check_frame_ok(h, async_frame(1, {2})).ok());
  HeapObject parking = h.at(2);
  parking.waiters.push_back(waiter(1, 2));
  h.set(2, parking);
  CHECK(has(check_frame_ok(h, async_frame(1, {2})), "AF-ok"));
}

TEST_CASE("stack well-formedness") {
  Heap h = running_heap(2);
  CHECK(check_stack_ok(h, {}).ok());
  CHECK(has(check_stack_ok(h, {async_frame(0, {}), async_frame(0, {})}), "FS-ok"));
  CHECK(check_stack_ok(h, {async_frame(0, {}), async_frame(1, {})}).ok());
  Frame caller = async_frame(0, {});
  caller.ret_var = "r";
  CHECK(check_stack_ok(h, {caller, Frame{}}).ok());
}

TEST_CASE("heap well-formedness") {
  Heap h = running_heap(3);
  HeapObject a = h.at(0);
  a.waiters.push_back(waiter(2, 0));
  h.set(0, a);
  CHECK(check_heap_ok(h).ok());
  HeapObject b = h.at(1);
  b.waiters.push_back(waiter(2, 1));
  h.set(1, b);
  CHECK(has(check_heap_ok(h), "H-ok"));

  Heap d;
  d.push(HeapObject::running(Type::integer()));
  d.push(done_obs());
  HeapObject r = d.at(0);
  r.waiters.push_back(waiter(1, 0));
  d.set(0, r);
  CHECK(has(check_heap_ok(d), "ROHO-ok"));

  Heap plain;
  plain.push(HeapObject::plain("C", {}));
  plain.push(HeapObject::plain("D", {{"f", Value::integer(1)}}));
  CHECK(check_heap_ok(plain).ok());
}

TEST_CASE("process well-formedness") {
  Heap h = running_heap(1);
  CHECK(has(check_process_ok(h, {{async_frame(0, {})}, {async_frame(0, {})}}), "Proc-ok"));
  CHECK(check_process_ok(h, {{}, {}}).ok());
}

TEST_CASE("processes after a yield stay well formed on the corpus") {
  for (const char* name : testing::kCorpus) {
    CheckedProgram p = testing::corpus(name);
    bool saw_yield = false;
    run(p, {}, {}, [&](const Machine&, const Choice&, const StepInfo& info, const Machine& after) {
      if (info.rule != "E-Yield") return;
      saw_yield = true;
      CHECK(check_process_ok(after.heap, after.process).ok());
    });
    CHECK(saw_yield);
  }
}

TEST_CASE("heap evolution") {
  Heap h = running_heap(2);
  h.push(HeapObject::plain("C", {}));
  EvolutionResult same = heap_evolves(h, h, {});
  CHECK(same.ok);
  CHECK(same.witness.changes().empty());

  Heap d;
  d.push(done_obs());
  Heap d2 = d;
  HeapObject grown = d.at(0);
  grown.subs[5] = {};
  d2.set(0, grown);
  CHECK(!heap_evolves(d, d2, {}).ok);
  CHECK(!heap_evolves(d, d2, {}, EvolutionMode::Strict).ok);

  Heap fresh = running_heap(1);
  Heap fresh2 = fresh;
  fresh2.push(HeapObject::running(Type::integer()));
  EvolutionResult added = heap_evolves(fresh, fresh2, {});
  CHECK(added.ok);
  REQUIRE(added.witness.changes().size() == 1);
  CHECK(added.witness.changes()[0].kind == Evolution::New);
  HeapObject busy = HeapObject::running(Type::integer());
  busy.subs[0] = {};
  Heap fresh3 = fresh;
  fresh3.push(busy);
  CHECK(!heap_evolves(fresh, fresh3, {}).ok);

  Heap plain;
  plain.push(HeapObject::plain("C", {}));
  Heap plain2;
  plain2.push(HeapObject::plain("D", {}));
  CHECK(!heap_evolves(plain, plain2, {}).ok);
}

TEST_CASE("an await that parks evolves within the stack's bound") {
  CheckedProgram p = testing::corpus("producer_consumer");
  bool seen = false;
  run(p, {}, {}, [&](const Machine& before, const Choice& c, const StepInfo& info, const Machine& after) {
    if (info.rule != "E-Await1") return;
    seen = true;
    const std::vector<ObjId> ids = obs_ids(before.process.at(c.stack));
    const std::set<ObjId> bound(ids.begin(), ids.end());
    EvolutionResult r = heap_evolves(before.heap, after.heap, bound);
    CHECK(r.ok);
    bool parked = false;
    for (const ObjectEvolution& e : r.witness.changes()) parked |= e.kind == Evolution::RunningAddedWaiters;
    CHECK(parked);
    CHECK(!heap_evolves(before.heap, after.heap, {}).ok);
  });
  CHECK(seen);
}

TEST_CASE("state typing") {
  CheckedProgram p = testing::corpus("forwarder");
  Machine m = initial_machine(p.program);
  CHECK(type_state(m.heap, m.process, p).ok());

  Heap h;
  HeapObject o = HeapObject::running(Type::integer());
  o.subs[0] = {Value::boolean(true)};
  h.push(o);
  CHECK(has(type_state(h, {}, p), "heap-type"));

  Heap ok;
  HeapObject q = HeapObject::running(Type::integer());
  q.subs[0] = {Value::integer(1)};
  ok.push(q);
  CHECK(type_state(ok, {}, p).ok());
}

TEST_CASE("every state of a forwarder run is typed") {
  CheckedProgram p = testing::corpus("forwarder");
  std::size_t states = 0;
  run(p, {}, {}, [&](const Machine&, const Choice&, const StepInfo&, const Machine& after) {
    ++states;
    CHECK(type_state(after.heap, after.process, p).ok());
  });
  CHECK(states > 50);
}

TEST_CASE("checks are pure") {
  CheckedProgram p = testing::corpus("two_producers");
  run(p, {}, {}, [&](const Machine&, const Choice&, const StepInfo&, const Machine& after) {
    CHECK(check_heap_ok(after.heap).str() == check_heap_ok(after.heap).str());
    CHECK(type_state(after.heap, after.process, p).str() == type_state(after.heap, after.process, p).str());
  });
}

TEST_CASE("harness on an arithmetic program") {
  HarnessReport r = subject_reduction_harness(
      testing::checked("let a = 1 in let b = a + 2 in let c = b < 4 in if (c) { a } else { b }"), {});
  CHECK(r.ok());
  CHECK(r.steps > 3);
  CHECK(r.outcome == OutcomeKind::Finished);
}

TEST_CASE("harness over the corpus with round robin and twenty seeds") {
  for (const char* name : testing::kCorpus) {
    const std::string label = name;
    CAPTURE(label);
    CHECK(harness_violations(testing::corpus(name), Mutation::None, 20) == 0);
  }
}

TEST_CASE("strict evolution flags steps the printed definition misses") {
  HarnessOptions strict;
  strict.evolution = EvolutionMode::Strict;
  HarnessReport r = subject_reduction_harness(testing::corpus("forwarder"), strict);
  CHECK(!r.ok());
  CHECK(subject_reduction_harness(testing::corpus("counter"), strict).ok());
}

TEST_CASE("a yield that keeps its waiters is caught") {
  std::size_t total = 0;
  for (const char* name : testing::kCorpus) {
    total += harness_violations(testing::corpus(name), Mutation::YieldKeepsWaiters, 5);
  }
  CHECK(total > 0);
}

TEST_CASE("every mutation is caught somewhere in the corpus") {
  for (Mutation m : all_mutations()) {
    const std::string label = mutation_name(m);
    CAPTURE(label);
    std::size_t total = 0;
    for (const char* name : testing::kCorpus) total += harness_violations(testing::corpus(name), m, 10);
    CHECK(total > 0);
  }
}

TEST_CASE("harness reports serialize") {
  HarnessOptions o;
  o.semantics.mutation = Mutation::YieldKeepsWaiters;
  HarnessReport r = subject_reduction_harness(testing::corpus("forwarder"), o);
  REQUIRE(!r.ok());
  nlohmann::json j = to_json(r);
  CHECK(j.contains("violations"));
  CHECK(!r.violations[0].trace.empty());
}

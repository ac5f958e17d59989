#include <doctest.h>

#include "support.hpp"

using namespace ray;
using testing::checked;
using testing::corpus;
using testing::render_run;

namespace {

const char* const kGolden[] = {"e_var",    "e_field",  "e_assign", "e_cond",
                               "e_while",  "e_new",    "e_method", "e_return",
                               "e_rasync", "e_await1", "e_await2", "e_await3",
                               "e_exit",   "e_schedule", "e_yield", "e_rasync_return"};

std::string golden_policy(const std::string& trace) { return trace.substr(7, trace.find('\n') - 7); }

Context ctx_of(const CheckedProgram& p, SemanticsOptions o = {}) { return Context{&p.classes, o}; }

}  // namespace

TEST_CASE("golden traces, one per rule") {
  for (const char* name : kGolden) {
    const std::string label = name;
    CAPTURE(label);
    const std::string expected = testing::read_text(testing::golden_path(std::string(name) + ".trace"));
    CheckedProgram p = check_program(testing::parse_file(testing::golden_path(std::string(name) + ".ray")));
    CHECK(render_run(p, golden_policy(expected)) == expected);
  }
}

TEST_CASE("golden await trace dequeues from the tail and yield enqueues at the head") {
  const std::string a2 = testing::read_text(testing::golden_path("e_await2.trace"));
  CHECK(a2.find("subs={#1: [3, 2]}") != std::string::npos);
  CHECK(a2.find("E-Await2\n") != std::string::npos);
  CHECK(a2.find("b=Some(2)") != std::string::npos);
  const std::string y = testing::read_text(testing::golden_path("e_yield.trace"));
  CHECK(y.find("subs={#1: [6, 5]}") != std::string::npos);
}

TEST_CASE("frame rules preserve the label") {
  CheckedProgram p = checked("let x = 1 in let y = x in y");
  Frame f;
  f.expr = p.program.main;
  f.label = Label::async_of(3, {1});
  auto s = step_frame(Heap{}, f, ctx_of(p));
  REQUIRE(s);
  CHECK(s->rule == "E-Var");
  CHECK(s->frame.label == f.label);
  CHECK(s->frame.locals.at("x") == Value::integer(1));
}

TEST_CASE("yield with one subscriber enqueues the value and spawns nothing") {
  Heap h;
  h.push(HeapObject::running(Type::integer(), "o"));
  HeapObject w = HeapObject::running(Type::integer(), "w");
  h.push(w);
  HeapObject o = h.at(0);
  o.subs.emplace(1, Queue{});
  h.set(0, o);
  CheckedProgram p = checked("let z = 4 in z");
  Frame f;
  f.locals["z"] = Value::integer(4);
  f.expr = mk::let("_", mk::yield(mk::var("z")), mk::var("z"));
  f.label = Label::async_of(0, {});
  Process proc{FrameStack{f}};
  auto choices = enabled_choices(h, proc, ctx_of(p));
  REQUIRE(choices.size() == 1);
  CHECK(choices[0].kind == ChoiceKind::Yield);
  ProcessStep s = step_process(h, proc, choices[0], ctx_of(p));
  CHECK(s.info.rule == "E-Yield");
  CHECK(s.heap.at(0).subs.at(1) == Queue{Value::integer(4)});
  CHECK(s.process.size() == 1);
}

TEST_CASE("return with one waiter resumes it on a fresh stack with None") {
  Heap h;
  h.push(HeapObject::running(Type::integer(), "o"));
  h.push(HeapObject::running(Type::integer(), "w"));
  Frame waiter;
  waiter.expr = mk::let("a", mk::await(mk::var("o")), mk::var("a"));
  waiter.locals["o"] = Value::ref(0);
  waiter.label = Label::async_of(1, {0});
  HeapObject o = h.at(0);
  o.waiters.push_back(waiter);
  h.set(0, o);
  Frame body;
  body.locals["r"] = Value::integer(0);
  body.expr = mk::var("r");
  body.label = Label::async_of(0, {});
  CheckedProgram p = checked("let z = 0 in z");
  ProcessStep s = step_process(h, Process{FrameStack{body}}, {ChoiceKind::Return, 0}, ctx_of(p));
  CHECK(s.info.rule == "E-RAsync-Return");
  CHECK(s.heap.at(0).done);
  CHECK(s.heap.at(0).waiters.empty());
  REQUIRE(s.process.size() == 2);
  CHECK(s.process[0].empty());
  CHECK(s.process[1].back().locals.at("a") == Value::none());
}

TEST_CASE("exit removes an empty stack") {
  CheckedProgram p = checked("let z = 0 in z");
  Process proc{FrameStack{}, FrameStack{}};
  ProcessStep s = step_process(Heap{}, proc, {ChoiceKind::Exit, 0}, ctx_of(p));
  CHECK(s.process.size() == 1);
  CHECK(s.info.rule == "E-Exit");
}

TEST_CASE("a choice that is not enabled is rejected") {
  CheckedProgram p = checked("let z = 0 in z");
  Machine m = initial_machine(p.program);
  CHECK_THROWS_AS(step_process(m.heap, m.process, {ChoiceKind::Yield, 0}, ctx_of(p)), RuntimeFault);
  CHECK_THROWS_AS(step_process(m.heap, m.process, {ChoiceKind::Schedule, 5}, ctx_of(p)), RuntimeFault);
}

TEST_CASE("replaying the recorded choices reproduces the run") {
  CheckedProgram p = corpus("two_producers");
  RunOptions r;
  r.policy = Policy::Random;
  r.seed = 7;
  Outcome a = run(p, {}, r);
  Context ctx = ctx_of(p);
  Machine m = initial_machine(p.program);
  for (const Choice& c : a.choices) {
    ProcessStep s = step_process(m.heap, m.process, c, ctx);
    m = Machine{s.heap, s.process, m.steps + 1};
  }
  CHECK(m.heap == a.machine.heap);
  CHECK(m.process.empty());
}

TEST_CASE("a trivial program finishes after binding and exit") {
  Outcome o = run(checked("let x = 1 in x"), {}, {});
  CHECK(o.kind == OutcomeKind::Finished);
  CHECK(o.machine.process.empty());
  REQUIRE(o.trace.size() == 2);
  CHECK(o.trace[0].info.rule == "E-Var");
  CHECK(o.trace[1].info.rule == "E-Exit");
}

TEST_CASE("the consumer sees Some then None under every policy") {
  CheckedProgram p = corpus("producer_consumer");
  for (int seed = -1; seed < 30; ++seed) {
    RunOptions r;
    if (seed >= 0) {
      r.policy = Policy::Random;
      r.seed = static_cast<std::uint64_t>(seed);
    }
    Outcome o = run(p, {}, r);
    REQUIRE(o.kind == OutcomeKind::Finished);
    const HeapObject& cons = o.machine.heap.at(1);
    CHECK(cons.tag == "cons");
    CHECK(cons.published == std::vector<Value>{Value::integer(7), Value::integer(-1)});
  }
}

TEST_CASE("await after done: None by default, deadlock in strict mode") {
  CheckedProgram p = corpus("await_after_done");
  Outcome d = run(p, {}, {});
  CHECK(d.kind == OutcomeKind::Finished);
  CHECK(d.machine.heap.at(1).published ==
        std::vector<Value>{Value::integer(5), Value::integer(-1), Value::integer(-1)});
  SemanticsOptions strict;
  strict.strict_await = true;
  Outcome s = run(p, strict, {});
  CHECK(s.kind == OutcomeKind::Deadlock);
  CHECK(!s.blocked.empty());
}

TEST_CASE("null dereference and get on None are stuck states") {
  Outcome a = run(checked("class C { var f: Int } class D { var c: C } let n = null in let d = new D(n) in "
                      "let c = d.c in let x = c.f in x"), {}, {});
  CHECK(a.kind == OutcomeKind::Stuck);
  REQUIRE(a.fault);
  CHECK(*a.fault == FaultKind::NullDeref);
  Outcome b = run(checked(
                      "let p = rasync[Int]() {"
                      "  let c = rasync[Int](p) { let a = await(p) in let v = get(a) in v } in"
                      "  let z = 0 in z } in p"),
                  {}, {});
  CHECK(b.kind == OutcomeKind::Stuck);
  REQUIRE(b.fault);
  CHECK(*b.fault == FaultKind::OptionGetOnNone);
}

TEST_CASE("the step limit stops a diverging loop") {
  RunOptions r;
  r.max_steps = 500;
  Outcome o = run(checked("let go = true in let r = while (go) { go } in r"), {}, r);
  CHECK(o.kind == OutcomeKind::StepLimit);
  CHECK(o.machine.steps == 500);
}

TEST_CASE("publish-result desugaring publishes the body result") {
  Program src = parse_program("let r = rasync[Int]() { let z = 3 in z } in r");
  TypeReport types = typecheck_program(src);
  CheckedProgram p = check_program(desugar_publish_result(src, types));
  Outcome o = run(p, {}, {});
  CHECK(o.kind == OutcomeKind::Finished);
  CHECK(o.machine.heap.at(0).published == std::vector<Value>{Value::integer(3)});
}

TEST_CASE("trace events carry the documented fields") {
  Outcome o = run(corpus("forwarder"), {}, {});
  REQUIRE(!o.trace.empty());
  nlohmann::json j = to_json(o.trace.front());
  for (const char* k : {"step", "rule", "stack", "choice", "heapDelta", "note"}) CHECK(j.contains(k));
}

TEST_CASE("step invariants hold on every corpus transition") {
  for (const char* name : testing::kCorpus) {
    const std::string label = name;
    CAPTURE(label);
    CheckedProgram p = corpus(name);
    for (int seed = -1; seed < 10; ++seed) {
      RunOptions r;
      if (seed >= 0) {
        r.policy = Policy::Random;
        r.seed = static_cast<std::uint64_t>(seed);
      }
      run(p, {}, r, [&](const Machine& before, const Choice& c, const StepInfo& info, const Machine& after) {
        if (c.kind == ChoiceKind::Schedule || c.kind == ChoiceKind::Return || c.kind == ChoiceKind::Yield) {
          for (std::size_t k = 0; k < before.process.size(); ++k) {
            if (k == c.stack || before.process[k].empty()) continue;
            CHECK(before.process[k].back().label == after.process[k].back().label);
          }
        }
        if (info.rule == "E-Yield") {
          const ObjId o = before.process[c.stack].back().label.owner;
          const HeapObject& a = before.heap.at(o);
          const HeapObject& b = after.heap.at(o);
          CHECK(b.waiters.empty());
          for (const auto& [id, q] : a.subs) CHECK(b.subs.at(id).size() == q.size() + 1);
        }
        if (info.rule == "E-RAsync-Return") {
          const Label& l = before.process[c.stack].back().label;
          CHECK(after.heap.at(l.owner).done);
          for (ObjId s : l.subs) CHECK(after.heap.at(s).subs.count(l.owner) == 0);
        }
        if (info.rule == "E-Await2" || info.rule == "E-Await3") {
          std::size_t before_total = 0;
          std::size_t after_total = 0;
          for (std::size_t i = 0; i < before.heap.size(); ++i) {
            for (const auto& [id, q] : before.heap.at(static_cast<ObjId>(i)).subs) before_total += q.size();
            for (const auto& [id, q] : after.heap.at(static_cast<ObjId>(i)).subs) after_total += q.size();
          }
          CHECK(before_total == after_total + 1);
        }
        for (std::size_t i = 0; i < before.heap.size(); ++i) {
          if (before.heap.at(static_cast<ObjId>(i)).done) CHECK(after.heap.at(static_cast<ObjId>(i)).done);
        }
      });
    }
  }
}

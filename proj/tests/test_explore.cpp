#include <doctest.h>

#include <chrono>

#include "support.hpp"

using namespace ray;

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t i = s.find(from); i != std::string::npos; i = s.find(from, i + to.size())) {
    s.replace(i, from.size(), to);
  }
  return s;
}

CheckedProgram forwarder(int events) {
  std::string src = testing::read_text(testing::corpus_path("forwarder"));
  if (events == 2) src = replace_all(src, "yield(3);", "");
  return check_program(parse_program(src));
}

}  // namespace

TEST_CASE("a sequential program has one terminal state") {
  ExploreReport r = explore(testing::checked("let x = 1 in let y = x + 2 in y"), {}, {});
  CHECK(r.finished == 1);
  CHECK(r.deadlocks.empty());
  CHECK(r.violations.empty());
  CHECK(!r.limit_exceeded());
}

TEST_CASE("forwarder with two events forwards them in order") {
  ExploreReport r = explore(forwarder(2), {}, {});
  CHECK(r.violations.empty());
  CHECK(r.deadlocks.empty());
  CHECK(r.stuck.empty());
  CHECK(!r.limit_exceeded());
  CHECK(r.sequences.at("sink") == std::set<std::string>{"[1, 2] done"});
  CHECK(r.sequences.at("fwd") == std::set<std::string>{"[1, 2] done"});
}

TEST_CASE("forwarder with three events within the state budget") {
  auto t0 = std::chrono::steady_clock::now();
  ExploreLimits lim;
  lim.max_states = 2000;
  ExploreReport r = explore(forwarder(3), {}, lim);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(!r.limit_exceeded());
  CHECK(r.states <= 2000);
  CHECK(secs < 10.0);
  CHECK(r.violations.empty());
  CHECK(r.sequences.at("sink") == std::set<std::string>{"[1, 2, 3] done"});
}

TEST_CASE("two producers show both arrival orders") {
  ExploreReport r = explore(testing::corpus("two_producers"), {}, {});
  CHECK(r.violations.empty());
  const auto& c = r.sequences.at("c");
  CHECK(c.count("[0, 1] done") == 1);
  CHECK(c.count("[2, 0] done") == 1);
  CHECK(c.count("[0, 0] done") == 1);
  CHECK(c.size() == 3);
}

TEST_CASE("reduction keeps terminal sequences and deadlocks") {
  for (const char* name : testing::kCorpus) {
    const std::string label = name;
    CAPTURE(label);
    for (bool strict : {false, true}) {
      SemanticsOptions sem;
      sem.strict_await = strict;
      ExploreLimits full;
      full.reduce = false;
      full.max_states = 200000;
      ExploreReport a = explore(testing::corpus(name), sem, {});
      ExploreReport b = explore(testing::corpus(name), sem, full);
      REQUIRE(!b.limit_exceeded());
      CHECK(a.sequences == b.sequences);
      CHECK(a.deadlocks.empty() == b.deadlocks.empty());
      CHECK(a.violations.empty());
      CHECK(b.violations.empty());
      CHECK(a.states <= b.states);
    }
  }
}

TEST_CASE("strict await deadlocks after done and reports a trace") {
  SemanticsOptions sem;
  sem.strict_await = true;
  ExploreReport r = explore(testing::corpus("await_after_done"), sem, {});
  REQUIRE(!r.deadlocks.empty());
  CHECK(!r.deadlocks[0].trace.empty());
  ExploreReport d = explore(testing::corpus("await_after_done"), {}, {});
  CHECK(d.deadlocks.empty());
}

TEST_CASE("limits are reported, never silent") {
  ExploreLimits lim;
  lim.max_states = 10;
  ExploreReport r = explore(forwarder(3), {}, lim);
  CHECK(r.state_limit_hit);
  CHECK(r.limit_exceeded());
  ExploreLimits depth;
  depth.max_depth = 5;
  ExploreReport d = explore(forwarder(3), {}, depth);
  CHECK(d.depth_limit_hit);
  nlohmann::json j = to_json(d);
  CHECK(j.at("depthLimitHit") == true);
}

TEST_CASE("stuck states carry a minimal trace") {
  ExploreReport r = explore(testing::checked(
                                "class C { var f: Int } class D { var c: C } let n = null in "
                                "let d = new D(n) in let c = d.c in let x = c.f in x"),
                            {}, {});
  REQUIRE(r.stuck.size() == 1);
  // Three bindings, then the faulting choice.
  CHECK(r.stuck[0].trace.size() == 4);
}

TEST_CASE("canonical keys ignore object numbering and stack order") {
  CheckedProgram p = testing::corpus("two_producers");
  Machine m = initial_machine(p.program);
  CHECK(canonical_key(m) == canonical_key(m));
  Machine swapped = m;
  swapped.process.push_back(FrameStack{});
  Machine other = m;
  other.process.insert(other.process.begin(), FrameStack{});
  CHECK(canonical_key(swapped) == canonical_key(other));
}

TEST_CASE("extra transition checks are reported as violations") {
  int calls = 0;
  ExploreReport r = explore(testing::corpus("counter"), {}, {},
                            [&](const Machine&, const Choice&, const StepInfo& info, const Machine&) {
                              ++calls;
                              return info.rule == "E-Yield" ? std::vector<std::string>{"flagged"}
                                                            : std::vector<std::string>{};
                            });
  CHECK(calls > 0);
  CHECK(!r.violations.empty());
}

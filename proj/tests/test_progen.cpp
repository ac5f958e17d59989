#include <doctest.h>

#include <array>

#include "ray/progen.hpp"
#include "support.hpp"

using namespace ray;

namespace {

void kinds(const ExprPtr& e, std::array<bool, kExprKindCount>& seen) {
  if (!e) return;
  seen[static_cast<std::size_t>(e->kind)] = true;
  for (const ExprPtr& o : e->operands) kinds(o, seen);
  kinds(e->first, seen);
  kinds(e->second, seen);
}

std::array<bool, kExprKindCount> kinds(const Program& p) {
  std::array<bool, kExprKindCount> seen{};
  kinds(p.main, seen);
  for (const ClassDecl& c : p.classes) {
    for (const MethodDecl& m : c.methods) kinds(m.body, seen);
  }
  return seen;
}

GenConfig small(std::uint64_t seed) {
  GenConfig g;
  g.seed = seed;
  g.max_classes = 1;
  g.max_methods = 1;
  g.max_expr_depth = 2;
  g.max_observables = 2;
  return g;
}

/// A single round-robin harness run under a mutation, bounded because
/// shrinking can produce loops that never end.
ProgramPredicate caught_by(Mutation m) {
  return [m](const Program& p) {
    CheckedProgram cp;
    try {
      cp = check_program(p);
    } catch (const Error&) {
      return false;
    }
    HarnessOptions o;
    o.semantics.mutation = m;
    o.run.max_steps = 2000;
    return !subject_reduction_harness(cp, o).ok();
  };
}

}  // namespace

TEST_CASE("seed 1 at depth 3 typechecks") {
  GenConfig g;
  g.max_expr_depth = 3;
  CHECK(typecheck_program(normalize_anf(generate_program(g))).ok());
}

TEST_CASE("generation is deterministic per seed") {
  for (std::uint64_t s : {1u, 2u, 77u}) {
    GenConfig g;
    g.seed = s;
    CHECK(equal(generate_program(g), generate_program(g)));
  }
  GenConfig a;
  GenConfig b;
  b.seed = 2;
  CHECK(!equal(generate_program(a), generate_program(b)));
}

TEST_CASE("a thousand seeds typecheck, round trip and cover every form") {
  std::array<int, kExprKindCount> count{};
  for (std::uint64_t s = 1; s <= 1000; ++s) {
    GenConfig g;
    g.seed = s;
    Program p = generate_program(g);
    TypeReport r = typecheck_program(normalize_anf(p));
    if (!r.ok()) FAIL("seed " << s << ": " << r.errors[0].message);
    if (!equal(parse_program(pretty_print(p)), p)) FAIL("round trip failed for seed " << s);
    std::array<bool, kExprKindCount> seen = kinds(p);
    for (int k = 0; k < kExprKindCount; ++k) count[k] += seen[k] ? 1 : 0;
  }
  for (int k = 0; k < kExprKindCount; ++k) {
    const std::string label = expr_kind_name(static_cast<ExprKind>(k));
    CAPTURE(label);
    CHECK(count[k] >= 50);
  }
}

TEST_CASE("strict generation avoids the operators") {
  for (std::uint64_t s = 1; s <= 200; ++s) {
    GenConfig g;
    g.seed = s;
    g.strict_syntax = true;
    Program p = generate_program(g);
    const std::string text = pretty_print(p);
    CHECK_NOTHROW(parse_program(text, {true}));
    CHECK(typecheck_program(normalize_anf(p)).ok());
  }
}

TEST_CASE("generated programs terminate under every policy") {
  for (std::uint64_t s = 1; s <= 100; ++s) {
    GenConfig g;
    g.seed = s;
    CheckedProgram p = check_program(generate_program(g));
    for (int seed = -1; seed < 3; ++seed) {
      RunOptions r;
      if (seed >= 0) {
        r.policy = Policy::Random;
        r.seed = static_cast<std::uint64_t>(seed);
      }
      Outcome o = run(p, {}, r);
      if (o.kind != OutcomeKind::Finished) FAIL("seed " << s << " ended " << outcome_kind_name(o.kind));
    }
  }
}

TEST_CASE("diverging generation still typechecks") {
  for (std::uint64_t s = 1; s <= 100; ++s) {
    GenConfig g;
    g.seed = s;
    g.may_diverge = true;
    CHECK(typecheck_program(normalize_anf(generate_program(g))).ok());
  }
}

TEST_CASE("a forty expression repro shrinks to at most fifteen") {
  ProgramPredicate failing = caught_by(Mutation::YieldKeepsWaiters);
  int shrunk = 0;
  for (std::uint64_t s = 1; s <= 400 && shrunk < 3; ++s) {
    Program p = generate_program(small(s));
    const std::size_t n = expr_count(p);
    if (n < 38 || n > 50 || !failing(p)) continue;
    Program q = shrink_program(p, failing);
    CAPTURE(s);
    CHECK(expr_count(q) <= 15);
    CHECK(failing(q));
    CHECK(typecheck_program(normalize_anf(q)).ok());
    ++shrunk;
  }
  CHECK(shrunk == 3);
}

TEST_CASE("a minimal program is a fixpoint") {
  ProgramPredicate failing = caught_by(Mutation::ReturnSkipsUnsub);
  for (std::uint64_t s = 1; s <= 100; ++s) {
    Program p = generate_program(small(s));
    if (!failing(p)) continue;
    Program q = shrink_program(p, failing);
    CHECK(equal(shrink_program(q, failing), q));
    return;
  }
  FAIL("no failing program found");
}

TEST_CASE("shrinking needs a failing input") {
  CHECK_THROWS_AS(shrink_program(generate_program(small(1)), [](const Program&) { return false; }),
                  std::invalid_argument);
}

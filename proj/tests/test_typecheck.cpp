#include <doctest.h>

#include "support.hpp"

using namespace ray;

namespace {

Type type_of(const std::map<std::string, Type>& gamma, const std::string& src,
             const std::string& classes = "") {
  Program p = parse_program(classes + " 0");
  ClassTable ct = ClassTable::build(p);
  TypeEnv env;
  env.gamma = gamma;
  return type_expr(env, ct, *parse_expr(src));
}

ErrorKind error_of(const std::map<std::string, Type>& gamma, const std::string& src) {
  try {
    type_of(gamma, src);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a type error");
  return ErrorKind::SyntaxError;
}

const Type kInt = Type::integer();
const Type kBool = Type::boolean();

}  // namespace

TEST_CASE("class table lookups") {
  ClassTable ct = ClassTable::build(parse_program(
      "class C { var f: Int var d: D def m(k: Int): Int = k } class D { var c: C } 0"));
  CHECK(ct.ftype(Type::class_type("C"), "f") == kInt);
  CHECK(ct.ftype(Type::class_type("C"), "d") == Type::class_type("D"));
  CHECK(ct.fields("C") == std::vector<std::string>{"f", "d"});
  CHECK(ct.mtype(Type::class_type("C"), "m").result == kInt);
  CHECK(ct.mbody("C", "m").params == std::vector<std::string>{"k"});
  try {
    ct.mtype(Type::class_type("C"), "missing");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownMember);
  }
  try {
    ClassTable::build(parse_program("class C { var e: E } 0"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownType);
  }
}

TEST_CASE("expression typing") {
  CHECK(type_of({{"x", kBool}}, "if (x) { 1 } else { 2 }") == kInt);
  CHECK(type_of({{"s", Type::observable(kInt)}}, "await(s)") == Type::option(kInt));
  CHECK(type_of({{"y", Type::observable(kInt)}}, "rasync[Int](y) { let a = await(y) in 0 }") ==
        Type::observable(kInt));
  CHECK(type_of({{"x", kBool}}, "while (x) { x }") == kBool);
  CHECK(type_of({{"a", Type::option(kInt)}}, "get(a)") == kInt);
  CHECK(type_of({{"a", Type::option(kInt)}}, "isSome(a)") == kBool);
  CHECK(type_of({{"c", Type::class_type("C")}}, "c.f", "class C { var f: Int }") == kInt);
  CHECK(type_of({{"k", kInt}}, "new C(k)", "class C { var f: Int }") == Type::class_type("C"));
  CHECK(type_of({}, "let c = null in c") == Type::null_any());
}

TEST_CASE("expression typing errors") {
  CHECK(error_of({{"x", kInt}}, "yield(x)") == ErrorKind::YieldOutsideRAsync);
  CHECK(error_of({}, "x") == ErrorKind::UnboundVariable);
  CHECK(error_of({{"x", kInt}}, "if (x) { 1 } else { 2 }") == ErrorKind::TypeMismatch);
  CHECK(error_of({{"b", kBool}}, "if (b) { 1 } else { b }") == ErrorKind::TypeMismatch);
  CHECK(error_of({{"b", kBool}}, "rasync[Int]() { yield(b) }") == ErrorKind::TypeMismatch);
  CHECK(error_of({{"x", kInt}}, "rasync[Int](x) { 0 }") == ErrorKind::TypeMismatch);
}

TEST_CASE("await outside an rasync body is rejected") {
  TypeReport r = typecheck_program(parse_program(
      "let s = rasync[Int]() { 0 } in let a = await(s) in 0"));
  REQUIRE(!r.ok());
  CHECK(r.errors[0].kind == ErrorKind::AwaitOutsideRAsync);
}

TEST_CASE("the corpus typechecks") {
  for (const char* name : testing::kCorpus) {
    const std::string label = name;
    CAPTURE(label);
    TypeReport r = typecheck_program(normalize_anf(testing::parse_file(testing::corpus_path(name))));
    CHECK(r.ok());
  }
}

TEST_CASE("method bodies check against the declared result") {
  TypeReport r = typecheck_program(parse_program("class C { def m(): Int = true } 0"));
  REQUIRE(r.errors.size() == 1);
  CHECK(r.errors[0].kind == ErrorKind::TypeMismatch);
  CHECK(r.errors[0].pos.line == 1);
}

TEST_CASE("yield inside a called method is outside any rasync body") {
  TypeReport r = typecheck_program(parse_program(
      "class C { def m(k: Int): Int = { yield(k); k } } "
      "let c = new C() in let o = rasync[Int]() { let n = 1 in c.m(n) } in 0"));
  REQUIRE(!r.ok());
  CHECK(r.errors[0].kind == ErrorKind::YieldOutsideRAsync);
}

TEST_CASE("errors are aggregated across bodies") {
  TypeReport r = typecheck_program(parse_program(
      "class C { def a(): Int = true def b(): Boolean = 1 } let x = y in x"));
  CHECK(r.errors.size() == 3);
}

TEST_CASE("weakening with a fresh binding keeps the type") {
  const std::map<std::string, Type> base{{"x", kBool}, {"s", Type::observable(kInt)}};
  for (const char* src : {"if (x) { 1 } else { 2 }", "await(s)", "let y = x in y", "while (x) { x }"}) {
    CAPTURE(src);
    std::map<std::string, Type> wider = base;
    wider["fresh"] = Type::class_type("Nothing");
    wider["fresh2"] = kInt;
    CHECK(type_of(base, src) == type_of(wider, src));
  }
}

TEST_CASE("checked programs are normalized") {
  CheckedProgram p = testing::corpus("forwarder");
  CHECK(is_anf(p.program));
  CHECK_THROWS_AS(testing::checked("class C { def m(): Int = true } 0"), Error);
}

#include <doctest.h>

#include "support.hpp"

using namespace ray;

namespace {

Frame awaiting(const std::string& x, ObjId owner) {
  Frame f;
  f.expr = mk::let(x, mk::await(mk::var("y")), mk::var(x));
  f.locals["y"] = Value::ref(9);
  f.label = Label::async_of(owner, {9});
  return f;
}

}  // namespace

TEST_CASE("alloc gives fresh increasing ids and leaves the old heap alone") {
  Heap h0;
  auto [h1, a] = alloc(h0, HeapObject::plain("C", {{"f", Value::integer(1)}}));
  auto [h2, b] = alloc(h1, HeapObject::running(Type::integer()));
  CHECK(a == 0);
  CHECK(b == 1);
  CHECK(h0.size() == 0);
  CHECK(h1.size() == 1);
  const HeapObject& o = h2.at(b);
  CHECK(o.observable);
  CHECK(!o.done);
  CHECK(o.waiters.empty());
  CHECK(o.subs.empty());
}

TEST_CASE("heap updates are persistent") {
  Heap h;
  h.push(HeapObject::plain("C", {{"f", Value::integer(1)}}));
  Heap snapshot = h;
  h.set(0, HeapObject::plain("C", {{"f", Value::integer(2)}}));
  CHECK(snapshot.at(0).fields.at("f") == Value::integer(1));
  CHECK(h.at(0).fields.at("f") == Value::integer(2));
  CHECK(!(snapshot == h));
}

TEST_CASE("resume binds the await variable pointwise") {
  CHECK(resume({}, Value::none()).empty());
  std::vector<Frame> one = resume({awaiting("x", 1)}, Value::some(Value::integer(7)));
  REQUIRE(one.size() == 1);
  CHECK(one[0].locals.at("x") == Value::some(Value::integer(7)));
  CHECK(equal(one[0].expr, mk::var("x")));
  CHECK(one[0].label == Label::async_of(1, {9}));
  std::vector<Frame> two = resume({awaiting("a", 1), awaiting("b", 2)}, Value::none());
  REQUIRE(two.size() == 2);
  CHECK(two[0].locals.at("a") == Value::none());
  CHECK(two[1].locals.at("b") == Value::none());
  CHECK(two[1].label.owner == 2);
}

TEST_CASE("resume rejects a frame that is not awaiting") {
  Frame f;
  f.expr = mk::integer(1);
  f.label = Label::async_of(0, {});
  try {
    resume({f}, Value::none());
    FAIL("expected a fault");
  } catch (const RuntimeFault& e) {
    CHECK(e.kind() == FaultKind::MalformedWaiter);
  }
}

TEST_CASE("unsub_set removes one subscriber and keeps the rest") {
  Subscribers s{{1, {}}, {2, {Value::integer(5)}}};
  CHECK(unsub_set(s, 1) == Subscribers{{2, {Value::integer(5)}}});
  CHECK(unsub_set(s, 3) == s);
}

TEST_CASE("unsub_heap preserves the state and waiters") {
  Heap h;
  HeapObject r = HeapObject::running(Type::integer());
  r.subs = {{4, {Value::integer(1)}}, {5, {}}};
  r.waiters = {awaiting("x", 5)};
  h.push(r);
  HeapObject d = r;
  d.done = true;
  d.waiters.clear();
  h.push(d);
  h.push(HeapObject::plain("C", {}));
  HeapObject r2 = unsub_heap(4, 0, h);
  CHECK(!r2.done);
  CHECK(r2.subs == Subscribers{{5, {}}});
  CHECK(r2.waiters.size() == 1);
  HeapObject d2 = unsub_heap(4, 1, h);
  CHECK(d2.done);
  CHECK(d2.subs == Subscribers{{5, {}}});
  CHECK(unsub_heap(7, 0, h).subs == r.subs);
  try {
    unsub_heap(4, 2, h);
    FAIL("expected a fault");
  } catch (const RuntimeFault& e) {
    CHECK(e.kind() == FaultKind::NotAnObservable);
  }
}

TEST_CASE("value types") {
  Heap h;
  h.push(HeapObject::running(Type::integer()));
  h.push(HeapObject::plain("C", {}));
  CHECK(value_type(h, Value::ref(0)) == Type::observable(Type::integer()));
  CHECK(value_type(h, Value::ref(1)) == Type::class_type("C"));
  CHECK(value_type(h, Value::some(Value::integer(3))) == Type::option(Type::integer()));
  CHECK(value_type(h, Value::boolean(true)) == Type::boolean());
  CHECK(compatible(value_type(h, Value::null()), Type::class_type("C")));
  CHECK(value_type(h, Value::none()) == Type::option(Type::null_any()));
  CHECK(!compatible(value_type(h, Value::null()), Type::integer()));
  try {
    value_type(h, Value::ref(8));
    FAIL("expected a fault");
  } catch (const RuntimeFault& e) {
    CHECK(e.kind() == FaultKind::DanglingRef);
  }
}

TEST_CASE("obs_ids lists async owners") {
  Frame s;
  Frame a;
  a.label = Label::async_of(3, {});
  CHECK(obs_ids({s, a, s}) == std::vector<ObjId>{3});
}

TEST_CASE("values print and compare") {
  CHECK(Value::some(Value::integer(2)).str() == "Some(2)");
  CHECK(Value::none().str() == "None");
  CHECK(Value::null().str() == "null");
  CHECK(Value::ref(3).str() == "#3");
  CHECK(Value::integer(1) < Value::integer(2));
  CHECK(!(Value::none() == Value::null()));
}

TEST_CASE("each subscriber dequeues values in yield order") {
  CheckedProgram p = testing::corpus("forwarder");
  for (int seed = 0; seed < 40; ++seed) {
    RunOptions r;
    r.policy = Policy::Random;
    r.seed = static_cast<std::uint64_t>(seed);
    Outcome o = run(p, {}, r);
    REQUIRE(o.kind == OutcomeKind::Finished);
    for (ObjId i = 0; i < 3; ++i) {
      CHECK(o.machine.heap.at(i).published ==
            std::vector<Value>{Value::integer(1), Value::integer(2), Value::integer(3)});
    }
  }
}

TEST_CASE("serialization covers every heap object kind") {
  Heap h;
  h.push(HeapObject::plain("C", {{"f", Value::integer(1)}}));
  HeapObject o = HeapObject::running(Type::integer(), "src");
  o.subs[0] = {Value::integer(2), Value::integer(1)};
  h.push(o);
  nlohmann::json j = to_json(h);
  REQUIRE(j.is_object());
  CHECK(j.size() == 2);
  CHECK(j.contains("#1"));
  CHECK(to_json(Value::some(Value::integer(2))).dump() == to_json(Value::some(Value::integer(2))).dump());
}

#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ray/ast.hpp"

namespace ray {

using ObjId = std::int64_t;

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

enum class ValueKind { Bool, Int, Null, Ref, Some, None };

class Value {
 public:
  Value() = default;

  static Value boolean(bool b);
  static Value integer(std::int64_t i);
  static Value null();
  static Value ref(ObjId id);
  static Value some(Value inner);
  static Value none();

  ValueKind kind() const { return kind_; }
  bool as_bool() const { return scalar_ != 0; }
  std::int64_t as_int() const { return scalar_; }
  ObjId as_ref() const { return scalar_; }
  const Value& inner() const { return *inner_; }

  bool is_ref() const { return kind_ == ValueKind::Ref; }

  /// `true`, `7`, `null`, `#3`, `Some(7)`, `None`.
  std::string str() const;

  friend bool operator==(const Value& a, const Value& b);
  friend std::strong_ordering operator<=>(const Value& a, const Value& b);

 private:
  ValueKind kind_ = ValueKind::Null;
  std::int64_t scalar_ = 0;
  std::shared_ptr<const Value> inner_;
};

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

/// `s` or `a(owner, subs)`.
struct Label {
  bool async = false;
  ObjId owner = -1;
  std::vector<ObjId> subs;

  static Label sync() { return {}; }
  static Label async_of(ObjId owner, std::vector<ObjId> subs) {
    return {true, owner, std::move(subs)};
  }
  std::string str() const;
  friend bool operator==(const Label&, const Label&) = default;
};

using Locals = std::map<std::string, Value>;

struct Frame {
  Locals locals;
  ExprPtr expr;
  Label label;
  /// Set on a caller suspended by a method call.
  std::optional<std::string> ret_var;
  /// Static scope ("main" or "Class.method") whose variable table types
  /// this frame; not observed by any reduction rule.
  std::string scope = "main";
};

/// Top of stack is `back()`.
using FrameStack = std::vector<Frame>;
using Process = std::vector<FrameStack>;

// ---------------------------------------------------------------------------
// Heap
// ---------------------------------------------------------------------------

/// Subscriber queue: `front()` is the head where events are enqueued;
/// `back()` is the tail where they are consumed.
using Queue = std::deque<Value>;
using Subscribers = std::map<ObjId, Queue>;

struct HeapObject {
  bool observable = false;

  // Plain objects.
  std::string cls;
  std::map<std::string, Value> fields;

  // Observables.
  Type elem;
  bool done = false;
  /// Waiters in arrival order; always empty once done.
  std::vector<Frame> waiters;
  Subscribers subs;
  /// Binder name at creation, for reports only.
  std::string tag;
  /// Every value yielded by the observable, oldest first.
  std::vector<Value> published;

  static HeapObject plain(std::string cls, std::map<std::string, Value> fields);
  static HeapObject running(Type elem, std::string tag = {});

  Type type() const;
};

using ObjPtr = std::shared_ptr<const HeapObject>;

/// Persistent heap with dense ids. Copies share objects; updates replace
/// the slot, so earlier snapshots never change.
class Heap {
 public:
  std::size_t size() const { return objs_.size(); }
  bool contains(ObjId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  /// Throws RuntimeFault(DanglingRef).
  const HeapObject& at(ObjId id) const;
  const ObjPtr& ptr(ObjId id) const { return objs_.at(static_cast<std::size_t>(id)); }
  void set(ObjId id, HeapObject obj);
  ObjId push(HeapObject obj);

  friend bool operator==(const Heap& a, const Heap& b);

 private:
  std::vector<ObjPtr> objs_;
};

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

enum class FaultKind {
  NullDeref,
  OptionGetOnNone,
  AwaitNotSubscribed,
  AwaitInSyncFrame,
  YieldInSyncFrame,
  SubscribeToDone,
  UnboundLocal,
  MalformedWaiter,
  NotAnObservable,
  DanglingRef,
  ChoiceNotEnabled,
};

const char* fault_kind_name(FaultKind k);

/// Run-time error: a stuck configuration or an interpreter invariant breach.
class RuntimeFault : public std::runtime_error {
 public:
  RuntimeFault(FaultKind kind, const std::string& message);
  FaultKind kind() const { return kind_; }

 private:
  FaultKind kind_;
};

// ---------------------------------------------------------------------------
// Auxiliary functions
// ---------------------------------------------------------------------------

/// Returns the extended heap and the fresh id (always the previous size).
std::pair<Heap, ObjId> alloc(const Heap& h, HeapObject obj);

/// Binds `v` into each waiter's await variable and continues with its body.
std::vector<Frame> resume(const std::vector<Frame>& waiters, const Value& v);

/// Subscribers other than `o`.
Subscribers unsub_set(const Subscribers& subs, ObjId o);

/// `h(p)` with `o` removed from its subscribers.
HeapObject unsub_heap(ObjId o, ObjId p, const Heap& h);

/// Null gives NullAny, None gives Option[NullAny].
Type value_type(const Heap& h, const Value& v);

/// Owner ids of the async frames in `frames`.
std::vector<ObjId> obs_ids(const std::vector<Frame>& frames);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const Value& v);
nlohmann::json to_json(const Frame& f);
nlohmann::json to_json(const HeapObject& o);
nlohmann::json to_json(const Heap& h);
nlohmann::json to_json(const Process& p);

/// One-line frame rendering: `<{x=1}, let y = x in y>^s`.
std::string frame_summary(const Frame& f);

}  // namespace ray

#include "ray/runtime.hpp"

#include <algorithm>
#include <sstream>

#include "ray/syntax.hpp"

namespace ray {

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

Value Value::boolean(bool b) {
  Value v;
  v.kind_ = ValueKind::Bool;
  v.scalar_ = b ? 1 : 0;
  return v;
}

Value Value::integer(std::int64_t i) {
  Value v;
  v.kind_ = ValueKind::Int;
  v.scalar_ = i;
  return v;
}

Value Value::null() { return Value(); }

Value Value::ref(ObjId id) {
  Value v;
  v.kind_ = ValueKind::Ref;
  v.scalar_ = id;
  return v;
}

Value Value::some(Value inner) {
  Value v;
  v.kind_ = ValueKind::Some;
  v.inner_ = std::make_shared<const Value>(std::move(inner));
  return v;
}

Value Value::none() {
  Value v;
  v.kind_ = ValueKind::None;
  return v;
}

std::string Value::str() const {
  switch (kind_) {
    case ValueKind::Bool:
      return scalar_ ? "true" : "false";
    case ValueKind::Int:
      return std::to_string(scalar_);
    case ValueKind::Null:
      return "null";
    case ValueKind::Ref:
      return "#" + std::to_string(scalar_);
    case ValueKind::Some:
      return "Some(" + inner_->str() + ")";
    case ValueKind::None:
      return "None";
  }
  return "?";
}

bool operator==(const Value& a, const Value& b) { return (a <=> b) == 0; }

std::strong_ordering operator<=>(const Value& a, const Value& b) {
  if (a.kind_ != b.kind_) return a.kind_ <=> b.kind_;
  if (a.kind_ == ValueKind::Some) return *a.inner_ <=> *b.inner_;
  return a.scalar_ <=> b.scalar_;
}

std::string Label::str() const {
  if (!async) return "s";
  std::string out = "a(#" + std::to_string(owner) + ", [";
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (i) out += ", ";
    out += "#" + std::to_string(subs[i]);
  }
  return out + "])";
}

// ---------------------------------------------------------------------------
// Heap
// ---------------------------------------------------------------------------

HeapObject HeapObject::plain(std::string cls, std::map<std::string, Value> fields) {
  HeapObject o;
  o.cls = std::move(cls);
  o.fields = std::move(fields);
  return o;
}

HeapObject HeapObject::running(Type elem, std::string tag) {
  HeapObject o;
  o.observable = true;
  o.elem = std::move(elem);
  o.tag = std::move(tag);
  return o;
}

Type HeapObject::type() const {
  return observable ? Type::observable(elem) : Type::class_type(cls);
}

const HeapObject& Heap::at(ObjId id) const {
  if (!contains(id)) {
    throw RuntimeFault(FaultKind::DanglingRef, "dangling reference #" + std::to_string(id));
  }
  return *objs_[static_cast<std::size_t>(id)];
}

void Heap::set(ObjId id, HeapObject obj) {
  at(id);
  objs_[static_cast<std::size_t>(id)] = std::make_shared<const HeapObject>(std::move(obj));
}

ObjId Heap::push(HeapObject obj) {
  objs_.push_back(std::make_shared<const HeapObject>(std::move(obj)));
  return static_cast<ObjId>(objs_.size() - 1);
}

namespace {

bool same_frame(const Frame& a, const Frame& b) {
  return a.locals == b.locals && equal(a.expr, b.expr) && a.label == b.label &&
         a.ret_var == b.ret_var && a.scope == b.scope;
}

bool same_object(const HeapObject& a, const HeapObject& b) {
  if (a.observable != b.observable) return false;
  if (!a.observable) return a.cls == b.cls && a.fields == b.fields;
  if (a.elem != b.elem || a.done != b.done || a.subs != b.subs ||
      a.waiters.size() != b.waiters.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.waiters.size(); ++i) {
    if (!same_frame(a.waiters[i], b.waiters[i])) return false;
  }
  return true;
}

}  // namespace

bool operator==(const Heap& a, const Heap& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.objs_[i] != b.objs_[i] && !same_object(*a.objs_[i], *b.objs_[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

const char* fault_kind_name(FaultKind k) {
  switch (k) {
    case FaultKind::NullDeref:
      return "NullDeref";
    case FaultKind::OptionGetOnNone:
      return "OptionGetOnNone";
    case FaultKind::AwaitNotSubscribed:
      return "AwaitNotSubscribed";
    case FaultKind::AwaitInSyncFrame:
      return "AwaitInSyncFrame";
    case FaultKind::YieldInSyncFrame:
      return "YieldInSyncFrame";
    case FaultKind::SubscribeToDone:
      return "SubscribeToDone";
    case FaultKind::UnboundLocal:
      return "UnboundLocal";
    case FaultKind::MalformedWaiter:
      return "MalformedWaiter";
    case FaultKind::NotAnObservable:
      return "NotAnObservable";
    case FaultKind::DanglingRef:
      return "DanglingRef";
    case FaultKind::ChoiceNotEnabled:
      return "ChoiceNotEnabled";
  }
  return "Fault";
}

RuntimeFault::RuntimeFault(FaultKind kind, const std::string& message)
    : std::runtime_error(std::string(fault_kind_name(kind)) + ": " + message), kind_(kind) {}

// ---------------------------------------------------------------------------
// Auxiliary functions
// ---------------------------------------------------------------------------

std::pair<Heap, ObjId> alloc(const Heap& h, HeapObject obj) {
  Heap out = h;
  ObjId id = out.push(std::move(obj));
  return {std::move(out), id};
}

std::vector<Frame> resume(const std::vector<Frame>& waiters, const Value& v) {
  std::vector<Frame> out;
  out.reserve(waiters.size());
  for (const Frame& w : waiters) {
    const Expr& e = *w.expr;
    if (!w.label.async || e.kind != ExprKind::Let || e.first->kind != ExprKind::Await) {
      throw RuntimeFault(FaultKind::MalformedWaiter,
                         "waiter is not an awaiting async frame: " + frame_summary(w));
    }
    Frame r = w;
    r.locals[e.name] = v;
    r.expr = e.second;
    out.push_back(std::move(r));
  }
  return out;
}

Subscribers unsub_set(const Subscribers& subs, ObjId o) {
  Subscribers out = subs;
  out.erase(o);
  return out;
}

HeapObject unsub_heap(ObjId o, ObjId p, const Heap& h) {
  const HeapObject& obj = h.at(p);
  if (!obj.observable) {
    throw RuntimeFault(FaultKind::NotAnObservable, "#" + std::to_string(p) + " is not an observable");
  }
  HeapObject out = obj;
  out.subs = unsub_set(obj.subs, o);
  return out;
}

Type value_type(const Heap& h, const Value& v) {
  switch (v.kind()) {
    case ValueKind::Bool:
      return Type::boolean();
    case ValueKind::Int:
      return Type::integer();
    case ValueKind::Null:
      return Type::null_any();
    case ValueKind::Ref:
      return h.at(v.as_ref()).type();
    case ValueKind::Some:
      return Type::option(value_type(h, v.inner()));
    case ValueKind::None:
      return Type::option(Type::null_any());
  }
  return Type::null_any();
}

std::vector<ObjId> obs_ids(const std::vector<Frame>& frames) {
  std::vector<ObjId> out;
  for (const Frame& f : frames) {
    if (f.label.async) out.push_back(f.label.owner);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

nlohmann::json to_json(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Bool:
      return v.as_bool();
    case ValueKind::Int:
      return v.as_int();
    case ValueKind::Null:
      return nullptr;
    default:
      return v.str();
  }
}

std::string frame_summary(const Frame& f) {
  std::ostringstream out;
  out << "<{";
  bool first = true;
  for (const auto& [k, v] : f.locals) {
    if (!first) out << ", ";
    first = false;
    out << k << "=" << v.str();
  }
  out << "}, " << print_expr(*f.expr) << ">^" << f.label.str();
  if (f.ret_var) out << "_" << *f.ret_var;
  return out.str();
}

nlohmann::json to_json(const Frame& f) {
  nlohmann::json locals = nlohmann::json::object();
  for (const auto& [k, v] : f.locals) locals[k] = to_json(v);
  nlohmann::json j = {{"locals", locals}, {"expr", print_expr(*f.expr)}, {"label", f.label.str()}};
  if (f.ret_var) j["retVar"] = *f.ret_var;
  return j;
}

nlohmann::json to_json(const HeapObject& o) {
  if (!o.observable) {
    nlohmann::json fields = nlohmann::json::object();
    for (const auto& [k, v] : o.fields) fields[k] = to_json(v);
    return {{"class", o.cls}, {"fields", fields}};
  }
  nlohmann::json waiters = nlohmann::json::array();
  for (const Frame& w : o.waiters) waiters.push_back(frame_summary(w));
  nlohmann::json subs = nlohmann::json::object();
  for (const auto& [id, q] : o.subs) {
    nlohmann::json jq = nlohmann::json::array();
    for (const Value& v : q) jq.push_back(to_json(v));
    subs["#" + std::to_string(id)] = jq;
  }
  nlohmann::json published = nlohmann::json::array();
  for (const Value& v : o.published) published.push_back(to_json(v));
  nlohmann::json j = {{"type", o.type().str()},
                      {"state", o.done ? "done" : "running"},
                      {"waiters", waiters},
                      {"subscribers", subs},
                      {"published", published}};
  if (!o.tag.empty()) j["tag"] = o.tag;
  return j;
}

nlohmann::json to_json(const Heap& h) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < h.size(); ++i) {
    j["#" + std::to_string(i)] = to_json(h.at(static_cast<ObjId>(i)));
  }
  return j;
}

nlohmann::json to_json(const Process& p) {
  nlohmann::json j = nlohmann::json::array();
  for (const FrameStack& fs : p) {
    nlohmann::json stack = nlohmann::json::array();
    for (auto it = fs.rbegin(); it != fs.rend(); ++it) stack.push_back(frame_summary(*it));
    j.push_back(stack);
  }
  return j;
}

}  // namespace ray

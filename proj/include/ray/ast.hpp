#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace ray {

struct SourcePos {
  int line = 0;
  int column = 0;
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

enum class TypeKind { Boolean, Int, Class, Observable, Option, NullAny };

/// A RAY type. `NullAny` is the type of the `null` literal: compatible with
/// every reference and Option type, never written in source.
class Type {
 public:
  Type() = default;

  static Type boolean() { return Type(TypeKind::Boolean); }
  static Type integer() { return Type(TypeKind::Int); }
  static Type null_any() { return Type(TypeKind::NullAny); }
  static Type class_type(std::string name);
  static Type observable(Type elem);
  static Type option(Type elem);

  TypeKind kind() const { return kind_; }
  const std::string& class_name() const { return name_; }
  const Type& elem() const { return *elem_; }

  bool is_reference() const {
    return kind_ == TypeKind::Class || kind_ == TypeKind::Observable;
  }

  std::string str() const;

  friend bool operator==(const Type& a, const Type& b);
  friend bool operator!=(const Type& a, const Type& b) { return !(a == b); }

 private:
  explicit Type(TypeKind k) : kind_(k) {}

  TypeKind kind_ = TypeKind::Int;
  std::string name_;
  std::shared_ptr<const Type> elem_;
};

/// `actual` may flow where `expected` is required (null into references).
bool compatible(const Type& actual, const Type& expected);

/// Least common type of two branch results, if any.
std::optional<Type> join(const Type& a, const Type& b);

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ExprKind {
  BoolLit,
  IntLit,
  Var,
  Null,
  If,
  While,
  Select,
  Assign,
  Invoke,
  New,
  Let,
  RAsync,
  Await,
  Yield,
  PrimOp,
};

const char* expr_kind_name(ExprKind k);
inline constexpr int kExprKindCount = 15;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Layout by kind:
//   Var:     name
//   If:      operands[0] = condition, first = then, second = else
//   While:   operands[0] = condition, first = body
//   Select:  operands[0] = receiver, name = field
//   Assign:  operands[0] = receiver, operands[1] = value, name = field
//   Invoke:  operands[0] = receiver, operands[1..] = arguments, name = method
//   New:     name = class, operands = constructor arguments
//   Let:     name = binder, first = bound expression, second = body
//   RAsync:  type = element type, operands = sources, first = body
//   Await:   operands[0]
//   Yield:   operands[0]
//   PrimOp:  name = operator ("+", "-", "<", "==", "!", "isSome", "get")
// In A-normal form every operand is a Var.
struct Expr {
  ExprKind kind = ExprKind::Null;
  bool bool_value = false;
  std::int64_t int_value = 0;
  std::string name;
  std::vector<ExprPtr> operands;
  ExprPtr first;
  ExprPtr second;
  Type type;
  SourcePos pos;
};

namespace mk {
ExprPtr boolean(bool b, SourcePos pos = {});
ExprPtr integer(std::int64_t i, SourcePos pos = {});
ExprPtr var(std::string name, SourcePos pos = {});
ExprPtr null(SourcePos pos = {});
ExprPtr if_(ExprPtr cond, ExprPtr then_e, ExprPtr else_e, SourcePos pos = {});
ExprPtr while_(ExprPtr cond, ExprPtr body, SourcePos pos = {});
ExprPtr select(ExprPtr recv, std::string field, SourcePos pos = {});
ExprPtr assign(ExprPtr recv, std::string field, ExprPtr value, SourcePos pos = {});
ExprPtr invoke(ExprPtr recv, std::string method, std::vector<ExprPtr> args,
               SourcePos pos = {});
ExprPtr new_(std::string cls, std::vector<ExprPtr> args, SourcePos pos = {});
ExprPtr let(std::string binder, ExprPtr rhs, ExprPtr body, SourcePos pos = {});
ExprPtr rasync(Type elem, std::vector<ExprPtr> sources, ExprPtr body,
               SourcePos pos = {});
ExprPtr await(ExprPtr source, SourcePos pos = {});
ExprPtr yield(ExprPtr value, SourcePos pos = {});
ExprPtr prim(std::string op, std::vector<ExprPtr> args, SourcePos pos = {});
}  // namespace mk

/// Copy of `e` with different children; keeps kind, scalars and position.
ExprPtr rebuild(const Expr& e, std::vector<ExprPtr> operands, ExprPtr first,
                ExprPtr second);

/// Structural equality; positions are ignored.
bool equal(const Expr& a, const Expr& b);
bool equal(const ExprPtr& a, const ExprPtr& b);

bool is_var(const ExprPtr& e);

/// Every identifier that occurs anywhere in `e` (uses and binders).
void collect_names(const Expr& e, std::set<std::string>& out);

/// Free variables of `e` under lexical scoping.
std::set<std::string> free_vars(const Expr& e);

/// Number of expression nodes.
std::size_t expr_count(const Expr& e);

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

struct FieldDecl {
  std::string name;
  Type type;
  SourcePos pos;
};

struct Param {
  std::string name;
  Type type;
};

struct MethodDecl {
  std::string name;
  std::vector<Param> params;
  Type return_type;
  ExprPtr body;
  SourcePos pos;
};

struct ClassDecl {
  std::string name;
  std::vector<FieldDecl> fields;
  std::vector<MethodDecl> methods;
  SourcePos pos;
};

struct Program {
  std::vector<ClassDecl> classes;
  ExprPtr main;
};

bool equal(const Program& a, const Program& b);
std::size_t expr_count(const Program& p);
void collect_names(const Program& p, std::set<std::string>& out);

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

enum class ErrorKind {
  SyntaxError,
  DuplicateName,
  UnknownType,
  UnknownMember,
  TypeMismatch,
  UnboundVariable,
  YieldOutsideRAsync,
  AwaitOutsideRAsync,
};

const char* error_kind_name(ErrorKind k);

/// Front-end error (parsing, class table, typing) carrying a position.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string message, SourcePos pos = {});

  ErrorKind kind() const { return kind_; }
  const SourcePos& pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
  SourcePos pos_;
};

}  // namespace ray

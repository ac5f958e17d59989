#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ray/ast.hpp"

namespace ray {

struct MethodType {
  std::vector<Type> params;
  Type result;
};

struct MethodBody {
  std::vector<std::string> params;
  ExprPtr body;
};

/// Declared classes with the lookups used by the typing and reduction rules.
class ClassTable {
 public:
  /// Throws ray::Error (DuplicateName, UnknownType).
  static ClassTable build(const Program& p);

  bool has_class(const std::string& name) const { return classes_.count(name) != 0; }
  const ClassDecl& decl(const std::string& name) const;

  /// Field names in declaration order.
  std::vector<std::string> fields(const std::string& cls) const;
  Type ftype(const Type& recv, const std::string& field) const;
  MethodType mtype(const Type& recv, const std::string& method) const;
  MethodBody mbody(const std::string& cls, const std::string& method) const;

  /// Throws UnknownType when a class name inside `t` is not declared.
  void check_type(const Type& t, SourcePos pos = {}) const;

 private:
  const MethodDecl& method(const Type& recv, const std::string& name) const;

  std::map<std::string, ClassDecl> classes_;
};

/// Per-scope record of every variable's type. Locals form one flat map per
/// frame at run time, so a variable keeps a single type across all of its
/// bindings in a method body (rasync bodies included).
using VarTable = std::map<std::string, Type>;

struct TypeEnv {
  std::map<std::string, Type> gamma;
  /// Yield-type stack; front is the innermost rasync element type.
  std::vector<Type> delta;
  /// Flat variable table checked on every let. Null disables the check.
  VarTable* vars = nullptr;
  /// When set, binders absent from `vars` are accepted without recording.
  bool frozen_vars = false;
  /// Lexical rasync body types keyed by node, filled while checking.
  std::map<const Expr*, Type>* rasync_bodies = nullptr;
};

/// Type of `e` under Γ;Δ. Throws ray::Error on the first rule that fails.
Type type_expr(TypeEnv env, const ClassTable& ct, const Expr& e);

struct Diagnostic {
  ErrorKind kind;
  std::string message;
  SourcePos pos;
};

struct TypeReport {
  std::vector<Diagnostic> errors;
  /// Variable tables keyed by scope name: "main" or "Class.method".
  std::map<std::string, VarTable> scopes;
  std::map<const Expr*, Type> rasync_bodies;

  bool ok() const { return errors.empty(); }
};

/// Checks every method body against its signature and `main` with empty
/// environments. Errors are aggregated, one per failing body or declaration.
TypeReport typecheck_program(const Program& p);

/// A parsed, normalized and well-typed program with its derived tables.
struct CheckedProgram {
  Program program;
  ClassTable classes;
  TypeReport types;
};

/// Normalizes and typechecks; throws the first diagnostic as ray::Error.
CheckedProgram check_program(const Program& p);

/// Appends `let $r = body in let _ = yield($r) in $r` to every rasync body
/// whose result type matches the element type.
Program desugar_publish_result(const Program& p, const TypeReport& types);

std::string scope_name(const std::string& cls, const std::string& method);

}  // namespace ray

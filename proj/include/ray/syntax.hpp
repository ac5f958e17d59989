#pragma once

#include <string>
#include <string_view>

#include "ray/ast.hpp"

namespace ray {

struct ParseOptions {
  /// Reject the primitive operators `+ - < == !`; `isSome` and `get`
  /// remain available because `await` results cannot be consumed otherwise.
  bool strict_syntax = false;
};

/// Parses a `.ray` source. Names are not resolved here.
/// Throws ray::Error (SyntaxError, DuplicateName).
Program parse_program(std::string_view text, const ParseOptions& opts = {});

/// Parses a single expression (no class declarations).
ExprPtr parse_expr(std::string_view text, const ParseOptions& opts = {});

/// Parses a type such as `Observable[Int]`.
Type parse_type(std::string_view text);

/// Source text that parses back to a structurally equal program.
std::string pretty_print(const Program& p);

/// Single-line rendering of an expression, also re-parseable.
std::string print_expr(const Expr& e);

/// Let-binds every compound subexpression. Fresh binders avoid every name
/// already used in the program. Idempotent.
Program normalize_anf(const Program& p);

/// Checks the A-normal-form shape: tails are variables, let right-hand sides
/// are atomic redexes, and every operand position holds a variable.
bool is_anf(const Expr& e);
bool is_anf(const Program& p);

}  // namespace ray

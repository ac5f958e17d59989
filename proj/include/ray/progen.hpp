#pragma once

#include <cstdint>
#include <functional>

#include "ray/ast.hpp"

namespace ray {

struct GenConfig {
  std::uint64_t seed = 1;
  int max_classes = 2;
  int max_methods = 2;
  int max_expr_depth = 3;
  int max_observables = 3;
  int max_loop_iters = 3;
  /// Avoid the primitive operators; loops count with a chain of flags.
  bool strict_syntax = false;
  /// Allow loops without a counter, which may run forever.
  bool may_diverge = false;
};

/// A well-typed program, deterministic per configuration. Observables are
/// only subscribed to while they are certain to be running, awaits only
/// name sources of the innermost body, and option values are only
/// unwrapped behind an isSome test, so runs never get stuck.
Program generate_program(const GenConfig& cfg);

using ProgramPredicate = std::function<bool(const Program&)>;

/// Greedy shrinking by subtree replacement, binding removal, let inlining
/// and declaration removal; every candidate must still typecheck and fail.
/// Candidates may loop forever, so the predicate should bound its runs.
/// Throws std::invalid_argument when `failing(p)` is false.
Program shrink_program(const Program& p, const ProgramPredicate& failing);

}  // namespace ray

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ray/runtime.hpp"
#include "ray/semantics.hpp"
#include "ray/typecheck.hpp"

namespace ray {

// ---------------------------------------------------------------------------
// Well-formedness
// ---------------------------------------------------------------------------

struct WfViolation {
  /// Judgment that failed, e.g. "AF-ok".
  std::string judgment;
  /// Object id, stack index or frame path.
  std::string subject;
  std::string message;
};

struct WfReport {
  std::vector<WfViolation> violations;

  bool ok() const { return violations.empty(); }
  void add(std::string judgment, std::string subject, std::string message);
  void merge(const WfReport& other);
  std::string str() const;
};

/// Sync frames are always ok. An async frame `a(o, p)` needs `o` running,
/// absent from every waiter list, and every observable it subscribes to
/// listed in `p`.
WfReport check_frame_ok(const Heap& h, const Frame& f);

/// Every frame ok and owner ids pairwise distinct down the stack.
WfReport check_stack_ok(const Heap& h, const FrameStack& fs);

/// Running observables hold waiters with distinct owners that are all
/// running; waiter owner sets are disjoint across the heap.
WfReport check_heap_ok(const Heap& h);

/// Every stack ok and owner ids disjoint across stacks.
WfReport check_process_ok(const Heap& h, const Process& p);

// ---------------------------------------------------------------------------
// Heap evolution
// ---------------------------------------------------------------------------

enum class Evolution {
  Unchanged,
  New,
  PlainUpdated,
  DoneQueueStep,
  RunningAddedSubscriber,
  RunningFlushed,
  RunningAddedWaiters,
  BecameDone,
  /// Extended: one subscriber queue of a running observable lost its tail.
  QueueConsumed,
  /// Extended: one subscriber left the observable.
  Unsubscribed,
  /// No clause applies.
  Invalid,
};

const char* evolution_name(Evolution e);

enum class EvolutionMode {
  /// The printed definition plus the clauses needed by the rules as
  /// implemented: queue consumption with waiters present, unsubscription,
  /// and the resubscription of resumed waiters.
  Extended,
  /// The printed definition only.
  Strict,
};

struct ObjectEvolution {
  ObjId id = -1;
  Evolution kind = Evolution::Unchanged;
  /// Set when only an extended clause matched.
  bool extended = false;
  std::string message;
};

struct EvolutionWitness {
  std::vector<ObjectEvolution> objects;
  std::set<ObjId> bound;

  /// The objects whose kind is not Unchanged.
  std::vector<ObjectEvolution> changes() const;
};

struct EvolutionResult {
  bool ok = true;
  EvolutionWitness witness;
};

EvolutionResult heap_evolves(const Heap& h, const Heap& h2, const std::set<ObjId>& bound,
                             EvolutionMode mode = EvolutionMode::Extended);

// ---------------------------------------------------------------------------
// Runtime typing
// ---------------------------------------------------------------------------

/// Types a frame's expression. Γ comes from the locals, read through the
/// frame scope's variable table where it has an entry; Δ is the owner's
/// element type for async frames and empty otherwise. `extra` adds
/// bindings, used for return variables.
std::optional<Type> type_frame(const Heap& h, const Frame& f, const CheckedProgram& p,
                               WfReport& report, const std::string& subject,
                               const std::map<std::string, Type>& extra = {});

/// Heap, stack and process typing. Violations use the judgment names
/// "heap-type", "frame-type" and "stack-type".
WfReport type_state(const Heap& h, const Process& proc, const CheckedProgram& p);

// ---------------------------------------------------------------------------
// Subject reduction harness
// ---------------------------------------------------------------------------

struct HarnessOptions {
  SemanticsOptions semantics;
  RunOptions run;
  EvolutionMode evolution = EvolutionMode::Extended;
};

struct HarnessViolation {
  std::size_t step = 0;
  std::string rule;
  /// Name of the failed check, e.g. "heap-ok" or "yield-fan-out".
  std::string check;
  std::string message;
  std::vector<Choice> trace;
};

struct HarnessReport {
  std::size_t steps = 0;
  OutcomeKind outcome = OutcomeKind::Finished;
  std::optional<FaultKind> fault;
  std::map<std::string, std::size_t> rule_counts;
  std::vector<HarnessViolation> violations;

  bool ok() const { return violations.empty(); }
};

/// Faults that typing does not rule out: null dereference, `get` on None,
/// awaiting a non-source, subscribing to a done observable.
bool fault_is_admissible(FaultKind k);

/// Checks that need only the states around one transition: typing and
/// well-formedness of the result, heap evolution, the per-rule
/// postconditions and done-monotonicity. Returns "check: message" entries.
std::vector<std::string> check_transition(const CheckedProgram& p, const Machine& before,
                                          const Choice& choice, const StepInfo& info,
                                          const Machine& after, EvolutionMode mode);

/// Explorer hook running check_transition on every transition.
TransitionCheck transition_checker(const CheckedProgram& p, EvolutionMode mode);

/// Runs the program under the chosen policy, checking the initial state
/// and every transition. Also replays a model of every subscriber queue
/// so that each event is delivered exactly once and in publication order.
HarnessReport subject_reduction_harness(const CheckedProgram& p, const HarnessOptions& opts);

nlohmann::json to_json(const WfReport& r);
nlohmann::json to_json(const EvolutionWitness& w);
nlohmann::json to_json(const HarnessReport& r);

}  // namespace ray

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ray/runtime.hpp"
#include "ray/typecheck.hpp"

namespace ray {

/// Deliberate interpreter faults used to measure how sensitive the
/// conformance checks are.
enum class Mutation {
  None,
  YieldKeepsWaiters,
  ReturnSkipsUnsub,
  Await2FromHead,
  Await1KeepsSubscriber,
  MethodDropsThis,
};

const char* mutation_name(Mutation m);
std::optional<Mutation> parse_mutation(const std::string& s);
std::vector<Mutation> all_mutations();

struct SemanticsOptions {
  /// Await on a done observable with an empty queue blocks instead of
  /// delivering None.
  bool strict_await = false;
  Mutation mutation = Mutation::None;
};

struct Context {
  const ClassTable* classes = nullptr;
  SemanticsOptions options;
};

enum class StepLevel { Frame, Stack, Process };

/// What a single transition did. `rule` is the innermost rule applied;
/// `path` lists the enclosing rules outermost first.
struct StepInfo {
  std::string rule;
  std::vector<std::string> path;
  StepLevel level = StepLevel::Frame;
  std::size_t stack = 0;
  /// Observable acted on: awaited source, yielding or returning owner.
  ObjId target = -1;
  /// Owner of the stepping async frame, if any.
  ObjId owner = -1;
  /// Value delivered by await or published by yield.
  std::optional<Value> value;
  /// Sources of the returning owner.
  std::vector<ObjId> sources;
  /// Obs ids of the stepped stack before the step.
  std::vector<ObjId> stack_obs;
};

struct FrameStep {
  Heap heap;
  Frame frame;
  std::string rule;
};

/// Frame-level rules plus the administrative ones (literal binding, let
/// re-association, operand naming, primitive operators). Nullopt when no
/// frame rule matches. Throws RuntimeFault when the frame is stuck.
std::optional<FrameStep> step_frame(const Heap& h, const Frame& f, const Context& ctx);

enum class StackStatus { Stepped, Parked, NoRule };

struct StackStep {
  StackStatus status = StackStatus::NoRule;
  Heap heap;
  FrameStack stack;
  StepInfo info;
};

StackStep step_stack(const Heap& h, const FrameStack& fs, const Context& ctx);

enum class ChoiceKind { Exit, Return, Yield, Schedule };

struct Choice {
  ChoiceKind kind = ChoiceKind::Schedule;
  std::size_t stack = 0;

  std::string str() const;
  friend bool operator==(const Choice&, const Choice&) = default;
};

const char* choice_kind_name(ChoiceKind k);

/// Ordered by stack index. A Schedule choice is listed when a stack rule
/// applies or the stack is stuck, so that running it surfaces the fault.
std::vector<Choice> enabled_choices(const Heap& h, const Process& p, const Context& ctx);

struct ProcessStep {
  Heap heap;
  Process process;
  StepInfo info;
};

/// Throws RuntimeFault(ChoiceNotEnabled) when `c` does not apply.
ProcessStep step_process(const Heap& h, const Process& p, const Choice& c, const Context& ctx);

struct Machine {
  Heap heap;
  Process process;
  std::size_t steps = 0;
};

/// Empty heap and one stack holding `main` in a sync frame.
Machine initial_machine(const Program& p);

struct TraceEvent {
  std::size_t step = 0;
  Choice choice;
  StepInfo info;
  nlohmann::json heap_delta;
  std::string note;
};

nlohmann::json to_json(const TraceEvent& e);

/// Changed or new heap objects, keyed `#n`.
nlohmann::json heap_delta(const Heap& before, const Heap& after);

enum class Policy { RoundRobin, Random, Script };

struct RunOptions {
  Policy policy = Policy::RoundRobin;
  std::uint64_t seed = 0;
  std::size_t max_steps = 100000;
  /// Indices into the enabled-choice list, consumed one per step.
  std::vector<std::size_t> script;
  bool record_trace = true;
};

enum class OutcomeKind { Finished, Deadlock, StepLimit, Stuck };

const char* outcome_kind_name(OutcomeKind k);

struct Outcome {
  OutcomeKind kind = OutcomeKind::Finished;
  Machine machine;
  std::vector<TraceEvent> trace;
  std::vector<Choice> choices;
  /// Deadlock: indices of stacks that cannot move.
  std::vector<std::size_t> blocked;
  /// Stuck: the fault and the frame that raised it.
  std::optional<FaultKind> fault;
  std::string reason;
  std::optional<Frame> stuck_frame;
};

/// Receives every transition; used by the conformance harness.
using StepObserver = std::function<void(const Machine& before, const Choice& choice,
                                        const StepInfo& info, const Machine& after)>;

Outcome run_machine(Machine m, const Context& ctx, const RunOptions& opts,
                    const StepObserver& observer = {});

/// Typechecked program in, outcome out.
Outcome run(const CheckedProgram& p, const SemanticsOptions& sem, const RunOptions& opts,
            const StepObserver& observer = {});

// ---------------------------------------------------------------------------
// Exhaustive exploration
// ---------------------------------------------------------------------------

struct ExploreLimits {
  std::size_t max_states = 20000;
  std::size_t max_depth = 10000;
  /// Partial-order reduction. Steps that touch no shared object are folded
  /// into the transition before them, and a state whose enabled choices
  /// include one that commutes with everything the other stacks and parked
  /// waiters can still do is expanded through that choice alone. The
  /// reduced graph reaches the same terminal states and deadlocks.
  bool reduce = true;
};

/// True for rules that read and write only the stepping frame or stack.
bool is_local_rule(const std::string& rule);

/// Extra per-transition check; returns violation messages.
using TransitionCheck = std::function<std::vector<std::string>(
    const Machine& before, const Choice& choice, const StepInfo& info, const Machine& after)>;

struct ExploreFinding {
  std::vector<Choice> trace;
  std::string message;
};

struct ExploreReport {
  std::size_t states = 0;
  std::size_t transitions = 0;
  std::size_t finished = 0;
  std::vector<ExploreFinding> deadlocks;
  std::vector<ExploreFinding> stuck;
  std::vector<ExploreFinding> violations;
  /// Per observable tag, the distinct published sequences at terminal
  /// states, rendered as `[v1, v2] done` or `[v1] running`.
  std::map<std::string, std::set<std::string>> sequences;
  bool state_limit_hit = false;
  bool depth_limit_hit = false;
  std::size_t max_depth_seen = 0;

  bool limit_exceeded() const { return state_limit_hit || depth_limit_hit; }
};

/// Key of a machine up to object renaming and stack order.
std::string canonical_key(const Machine& m);

/// Breadth-first, so the recorded trace to every finding is minimal.
/// Every transition is also checked for the observable protocol: a done
/// observable never returns to running and never grows a queue.
ExploreReport explore(const CheckedProgram& p, const SemanticsOptions& sem,
                      const ExploreLimits& limits, const TransitionCheck& check = {});

nlohmann::json to_json(const ExploreReport& r);

}  // namespace ray

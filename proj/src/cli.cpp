#include "ray/cli.hpp"

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ray/conformance.hpp"
#include "ray/progen.hpp"
#include "ray/semantics.hpp"
#include "ray/syntax.hpp"
#include "ray/typecheck.hpp"

namespace ray {

namespace {

using nlohmann::json;

// Raised for bad arguments discovered after option parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

bool color_enabled() {
  const char* v = std::getenv("RAY_COLOR");
  if (v) {
    const std::string s = v;
    if (s == "0" || s == "never" || s == "off" || s == "false" || s == "no") return false;
    if (s == "1" || s == "always" || s == "on" || s == "true" || s == "yes") return true;
  }
  return isatty(STDOUT_FILENO) != 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string located(const std::string& file, const SourcePos& pos, const std::string& msg) {
  return file + ":" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ": " + msg;
}

json diag_json(ErrorKind kind, const std::string& msg, const SourcePos& pos) {
  return {{"kind", error_kind_name(kind)},
          {"message", msg},
          {"line", pos.line},
          {"column", pos.column}};
}

void emit(std::ostream& out, json j, bool pretty_json = true) {
  j["version"] = kVersion;
  out << (pretty_json ? j.dump(2) : j.dump()) << "\n";
}

Policy parse_policy(const std::string& s) {
  if (s == "rr") return Policy::RoundRobin;
  if (s == "random") return Policy::Random;
  if (s == "script") return Policy::Script;
  throw UsageError("unknown policy '" + s + "'");
}

const char* policy_name(Policy p) {
  switch (p) {
    case Policy::RoundRobin: return "rr";
    case Policy::Random: return "random";
    case Policy::Script: return "script";
  }
  return "?";
}

struct Common {
  std::string file;
  bool strict_syntax = false;
  bool strict_await = false;
  bool publish_result = false;
};

void add_common(CLI::App* cmd, Common& c, bool semantics) {
  cmd->add_option("file", c.file, "Program source (.ray)")->required();
  cmd->add_flag("--strict-syntax", c.strict_syntax, "Reject the primitive operators");
  if (semantics) {
    cmd->add_flag("--strict-await", c.strict_await,
                  "Await on a done observable with an empty queue parks");
    cmd->add_flag("--publish-result", c.publish_result,
                  "Publish each rasync body's result before it returns");
  }
}

// Parses and typechecks; prints diagnostics and returns nullopt on errors.
std::optional<CheckedProgram> load(const Common& c, std::ostream& err) {
  const std::string text = read_file(c.file);
  Program p;
  try {
    p = parse_program(text, {c.strict_syntax});
  } catch (const Error& e) {
    err << located(c.file, e.pos(), e.message()) << "\n";
    return std::nullopt;
  }
  TypeReport report = typecheck_program(p);
  if (!report.ok()) {
    for (const Diagnostic& d : report.errors) err << located(c.file, d.pos, d.message) << "\n";
    return std::nullopt;
  }
  if (c.publish_result) p = desugar_publish_result(p, report);
  try {
    return check_program(p);
  } catch (const Error& e) {
    err << located(c.file, e.pos(), e.message()) << "\n";
    return std::nullopt;
  }
}

json observables_json(const Heap& h) {
  json out = json::object();
  for (std::size_t i = 0; i < h.size(); ++i) {
    const HeapObject& o = h.at(static_cast<ObjId>(i));
    if (!o.observable) continue;
    json pub = json::array();
    for (const Value& v : o.published) pub.push_back(to_json(v));
    out["#" + std::to_string(i)] = {{"tag", o.tag}, {"published", pub}, {"done", o.done}};
  }
  return out;
}

std::string observable_line(const Heap& h, ObjId id) {
  const HeapObject& o = h.at(id);
  std::string s = "[";
  for (std::size_t i = 0; i < o.published.size(); ++i) {
    s += (i ? ", " : "") + o.published[i].str();
  }
  return s + "] " + (o.done ? "done" : "running");
}

// -- check ------------------------------------------------------------------

int cmd_check(const Common& c, bool as_json, std::ostream& out, std::ostream& err) {
  const std::string text = read_file(c.file);
  json errors = json::array();
  try {
    Program p = parse_program(text, {c.strict_syntax});
    TypeReport report = typecheck_program(p);
    for (const Diagnostic& d : report.errors) {
      errors.push_back(diag_json(d.kind, d.message, d.pos));
      err << located(c.file, d.pos, d.message) << "\n";
    }
  } catch (const Error& e) {
    errors.push_back(diag_json(e.kind(), e.message(), e.pos()));
    err << located(c.file, e.pos(), e.message()) << "\n";
  }
  if (as_json) emit(out, {{"file", c.file}, {"ok", errors.empty()}, {"errors", errors}});
  return errors.empty() ? kExitOk : kExitProgramError;
}

// -- run --------------------------------------------------------------------

struct RunArgs {
  Common common;
  std::string policy = "rr";
  std::uint64_t seed = 0;
  std::string script;
  std::size_t max_steps = 100000;
  bool check = false;
  bool strict_evolution = false;
  std::string trace;
  bool pretty = false;
  bool json_out = false;
};

void pretty_event(std::ostream& out, const TraceEvent& e, bool color) {
  const char* bold = color ? "\x1b[1;36m" : "";
  const char* dim = color ? "\x1b[2m" : "";
  const char* reset = color ? "\x1b[0m" : "";
  std::ostringstream line;
  line << std::setw(5) << e.step << "  " << bold << std::left << std::setw(16) << e.info.rule
       << reset << " stack " << e.choice.stack << "  " << e.choice.str();
  if (e.info.value) line << "  value " << e.info.value->str();
  out << line.str() << "\n";
  if (!e.heap_delta.empty()) out << "       " << dim << e.heap_delta.dump() << reset << "\n";
}

int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<CheckedProgram> cp = load(a.common, err);
  if (!cp) return kExitProgramError;
  RunOptions opts;
  opts.policy = parse_policy(a.policy);
  opts.seed = a.seed;
  opts.max_steps = a.max_steps;
  if (!a.script.empty()) {
    opts.policy = Policy::Script;
    std::stringstream ss(a.script);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        opts.script.push_back(std::stoul(item));
      } catch (const std::exception&) {
        throw UsageError("bad script entry '" + item + "'");
      }
    }
  }
  opts.record_trace = !a.trace.empty() || a.pretty;
  SemanticsOptions sem;
  sem.strict_await = a.common.strict_await;
  const EvolutionMode mode = a.strict_evolution ? EvolutionMode::Strict : EvolutionMode::Extended;

  std::vector<std::string> violations;
  StepObserver observer;
  if (a.check) {
    observer = [&](const Machine& before, const Choice& c, const StepInfo& info,
                   const Machine& after) {
      for (const std::string& v : check_transition(*cp, before, c, info, after, mode)) {
        violations.push_back("step " + std::to_string(after.steps) + " " + info.rule + ": " + v);
      }
    };
  }
  Outcome o = run(*cp, sem, opts, observer);

  if (!a.trace.empty()) {
    std::ofstream tf(a.trace);
    if (!tf) throw UsageError("cannot write " + a.trace);
    for (const TraceEvent& e : o.trace) tf << to_json(e).dump() << "\n";
  }
  if (a.pretty) {
    const bool color = color_enabled();
    for (const TraceEvent& e : o.trace) pretty_event(out, e, color);
  }
  for (const std::string& v : violations) err << a.common.file << ": " << v << "\n";
  if (o.kind == OutcomeKind::Stuck) err << a.common.file << ": stuck: " << o.reason << "\n";

  const Heap& h = o.machine.heap;
  if (a.json_out) {
    json j = {{"file", a.common.file},
              {"policy", policy_name(opts.policy)},
              {"seed", opts.seed},
              {"outcome", outcome_kind_name(o.kind)},
              {"steps", o.machine.steps},
              {"observables", observables_json(h)},
              {"violations", violations}};
    if (o.kind == OutcomeKind::Deadlock) j["blocked"] = o.blocked;
    if (o.fault) {
      j["fault"] = fault_kind_name(*o.fault);
      j["reason"] = o.reason;
    }
    emit(out, j);
  } else {
    out << "outcome: " << outcome_kind_name(o.kind) << "\n";
    out << "steps: " << o.machine.steps << "\n";
    for (std::size_t i = 0; i < h.size(); ++i) {
      const ObjId id = static_cast<ObjId>(i);
      if (!h.at(id).observable) continue;
      out << "#" << i << " " << h.at(id).tag << ": " << observable_line(h, id) << "\n";
    }
    if (o.kind == OutcomeKind::Deadlock) out << "blocked stacks: " << o.blocked.size() << "\n";
  }
  if (!violations.empty()) return kExitViolation;
  return o.kind == OutcomeKind::Stuck ? kExitProgramError : kExitOk;
}

// -- explore ----------------------------------------------------------------

struct ExploreArgs {
  Common common;
  std::size_t max_depth = ExploreLimits{}.max_depth;
  std::size_t max_states = ExploreLimits{}.max_states;
  bool no_reduce = false;
  bool strict_evolution = false;
};

int cmd_explore(const ExploreArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<CheckedProgram> cp = load(a.common, err);
  if (!cp) return kExitProgramError;
  SemanticsOptions sem;
  sem.strict_await = a.common.strict_await;
  ExploreLimits limits;
  limits.max_depth = a.max_depth;
  limits.max_states = a.max_states;
  limits.reduce = !a.no_reduce;
  const EvolutionMode mode = a.strict_evolution ? EvolutionMode::Strict : EvolutionMode::Extended;
  ExploreReport r = explore(*cp, sem, limits, transition_checker(*cp, mode));
  json j = to_json(r);
  j["file"] = a.common.file;
  emit(out, j);
  if (r.limit_exceeded()) err << a.common.file << ": exploration limit exceeded\n";
  for (const ExploreFinding& f : r.violations) err << a.common.file << ": " << f.message << "\n";
  for (const ExploreFinding& f : r.stuck) err << a.common.file << ": stuck: " << f.message << "\n";
  if (!r.violations.empty()) return kExitViolation;
  return r.stuck.empty() ? kExitOk : kExitProgramError;
}

// -- verify -----------------------------------------------------------------

struct VerifyArgs {
  std::string file;
  bool strict_syntax = false;
  bool strict_await = false;
  int seeds = 10;
  std::string policy = "all";
  bool strict_evolution = false;
  std::size_t max_steps = 100000;
  int generated = 0;
  std::string mutate;
  bool fail_fast = false;
};

struct VerifyTotals {
  std::size_t runs = 0;
  std::size_t steps = 0;
  std::size_t violations = 0;
  std::map<std::string, std::size_t> rule_counts;
};

// Runs the harness under round-robin and/or the random seeds. Returns the
// run reports; only failing runs when `failing_only`.
json verify_program(const CheckedProgram& cp, const VerifyArgs& a, VerifyTotals& totals,
                    bool failing_only) {
  HarnessOptions base;
  base.semantics.strict_await = a.strict_await;
  base.evolution = a.strict_evolution ? EvolutionMode::Strict : EvolutionMode::Extended;
  base.run.max_steps = a.max_steps;
  if (!a.mutate.empty()) {
    auto m = parse_mutation(a.mutate);
    if (!m) throw UsageError("unknown mutation '" + a.mutate + "'");
    base.semantics.mutation = *m;
  }
  std::vector<std::pair<Policy, std::uint64_t>> plan;
  if (a.policy == "all" || a.policy == "rr") plan.push_back({Policy::RoundRobin, 0});
  if (a.policy == "all" || a.policy == "random") {
    for (int s = 0; s < a.seeds; ++s) plan.push_back({Policy::Random, static_cast<std::uint64_t>(s)});
  }
  if (plan.empty()) throw UsageError("unknown policy '" + a.policy + "'");
  json runs = json::array();
  for (const auto& [policy, seed] : plan) {
    HarnessOptions o = base;
    o.run.policy = policy;
    o.run.seed = seed;
    HarnessReport r = subject_reduction_harness(cp, o);
    ++totals.runs;
    totals.steps += r.steps;
    totals.violations += r.violations.size();
    for (const auto& [rule, n] : r.rule_counts) totals.rule_counts[rule] += n;
    if (!failing_only || !r.ok()) {
      json j = to_json(r);
      j["policy"] = policy_name(policy);
      j["seed"] = seed;
      runs.push_back(std::move(j));
    }
    if (a.fail_fast && !r.ok()) break;
  }
  return runs;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  if (a.file.empty() == (a.generated == 0)) {
    throw UsageError("verify takes either a file or --generated N");
  }
  VerifyTotals totals;
  json programs = json::array();
  if (!a.file.empty()) {
    Common c;
    c.file = a.file;
    c.strict_syntax = a.strict_syntax;
    std::optional<CheckedProgram> cp = load(c, err);
    if (!cp) return kExitProgramError;
    programs.push_back({{"file", a.file}, {"runs", verify_program(*cp, a, totals, false)}});
  } else {
    for (int s = 1; s <= a.generated; ++s) {
      GenConfig g;
      g.seed = static_cast<std::uint64_t>(s);
      g.strict_syntax = a.strict_syntax;
      CheckedProgram cp = check_program(generate_program(g));
      const std::size_t before = totals.violations;
      json runs = verify_program(cp, a, totals, true);
      if (!runs.empty()) programs.push_back({{"generatorSeed", s}, {"runs", runs}});
      if (a.fail_fast && totals.violations > before) break;
    }
  }
  json counts = json::object();
  for (const auto& [rule, n] : totals.rule_counts) counts[rule] = n;
  emit(out, {{"programs", programs},
             {"summary",
              {{"runs", totals.runs},
               {"steps", totals.steps},
               {"violations", totals.violations},
               {"ruleCounts", counts}}},
             {"ok", totals.violations == 0}});
  if (totals.violations) {
    err << "verify: " << totals.violations << " violation(s) in " << totals.runs << " run(s)\n";
    return kExitViolation;
  }
  return kExitOk;
}

// -- gen --------------------------------------------------------------------

int cmd_gen(const GenConfig& g, const std::string& out_path, std::ostream& out) {
  const std::string text = pretty_print(generate_program(g));
  if (out_path.empty()) {
    out << text;
    return kExitOk;
  }
  std::ofstream f(out_path);
  if (!f) throw UsageError("cannot write " + out_path);
  f << text;
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reference interpreter and checker for RAY programs", "ray"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common check_c;
  bool check_json = false;
  CLI::App* check = app.add_subcommand("check", "Parse and typecheck a program");
  add_common(check, check_c, false);
  check->add_flag("--json", check_json, "Report diagnostics as JSON");

  RunArgs run_a;
  CLI::App* runc = app.add_subcommand("run", "Run a program under a scheduling policy");
  add_common(runc, run_a.common, true);
  runc->add_option("--policy", run_a.policy, "rr, random or script")
      ->check(CLI::IsMember({"rr", "random", "script"}));
  runc->add_option("--seed", run_a.seed, "Seed of the random policy");
  runc->add_option("--script", run_a.script, "Comma-separated choice indices");
  runc->add_option("--max-steps", run_a.max_steps, "Step limit");
  runc->add_flag("--check", run_a.check, "Check every transition for conformance");
  runc->add_flag("--strict-evolution", run_a.strict_evolution,
                 "Use only the printed heap evolution clauses with --check");
  runc->add_option("--trace", run_a.trace, "Write a JSON-lines trace");
  runc->add_flag("--pretty", run_a.pretty, "Print a readable trace");
  runc->add_flag("--json", run_a.json_out, "Print the outcome as JSON");

  ExploreArgs ex_a;
  CLI::App* exc = app.add_subcommand("explore", "Enumerate every interleaving");
  add_common(exc, ex_a.common, true);
  exc->add_option("--max-depth", ex_a.max_depth, "Longest explored path");
  exc->add_option("--max-states", ex_a.max_states, "State budget");
  exc->add_flag("--no-reduce", ex_a.no_reduce, "Disable the partial-order reduction");
  exc->add_flag("--strict-evolution", ex_a.strict_evolution,
                "Use only the printed heap evolution clauses");

  VerifyArgs ver_a;
  CLI::App* verc = app.add_subcommand("verify", "Run the subject reduction harness");
  verc->add_option("file", ver_a.file, "Program source (.ray)");
  verc->add_flag("--strict-syntax", ver_a.strict_syntax, "Reject the primitive operators");
  verc->add_flag("--strict-await", ver_a.strict_await,
                 "Await on a done observable with an empty queue parks");
  verc->add_option("--seeds", ver_a.seeds, "Number of random-policy seeds")
      ->check(CLI::NonNegativeNumber);
  verc->add_option("--policy", ver_a.policy, "rr, random or all")
      ->check(CLI::IsMember({"rr", "random", "all"}));
  verc->add_flag("--strict-evolution", ver_a.strict_evolution,
                 "Use only the printed heap evolution clauses");
  verc->add_option("--max-steps", ver_a.max_steps, "Step limit per run");
  verc->add_option("--generated", ver_a.generated,
                   "Verify the programs generated from seeds 1..N instead of a file")
      ->check(CLI::PositiveNumber);
  verc->add_flag("--fail-fast", ver_a.fail_fast, "Stop at the first failing run");
  verc->add_option("--mutate", ver_a.mutate, "Interpreter mutation")->group("");

  GenConfig gen_c;
  std::string gen_out;
  CLI::App* genc = app.add_subcommand("gen", "Generate a well-typed program");
  genc->add_option("--seed", gen_c.seed, "Generator seed")->required();
  genc->add_option("--out", gen_out, "Output file");
  genc->add_option("--max-classes", gen_c.max_classes)->check(CLI::NonNegativeNumber);
  genc->add_option("--max-methods", gen_c.max_methods)->check(CLI::NonNegativeNumber);
  genc->add_option("--max-expr-depth", gen_c.max_expr_depth)->check(CLI::NonNegativeNumber);
  genc->add_option("--max-observables", gen_c.max_observables)->check(CLI::NonNegativeNumber);
  genc->add_option("--max-loop-iters", gen_c.max_loop_iters)->check(CLI::NonNegativeNumber);
  genc->add_flag("--strict-syntax", gen_c.strict_syntax, "Avoid the primitive operators");
  genc->add_flag("--may-diverge", gen_c.may_diverge, "Allow loops without a counter");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (check->parsed()) return cmd_check(check_c, check_json, out, err);
    if (runc->parsed()) return cmd_run(run_a, out, err);
    if (exc->parsed()) return cmd_explore(ex_a, out, err);
    if (verc->parsed()) return cmd_verify(ver_a, out, err);
    if (genc->parsed()) return cmd_gen(gen_c, gen_out, out);
  } catch (const UsageError& e) {
    err << "ray: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "ray: " << e.what() << "\n";
    return kExitProgramError;
  }
  return kExitUsage;
}

}  // namespace ray

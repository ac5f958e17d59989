#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "ray/conformance.hpp"
#include "ray/semantics.hpp"
#include "ray/syntax.hpp"
#include "ray/typecheck.hpp"

namespace testing {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string corpus_path(const std::string& name) {
  return std::string(RAY_CORPUS_DIR) + "/" + name + ".ray";
}

inline std::string golden_path(const std::string& name) {
  return std::string(RAY_GOLDEN_DIR) + "/" + name;
}

inline ray::Program parse_file(const std::string& path, bool strict = false) {
  return ray::parse_program(read_text(path), {strict});
}

inline ray::CheckedProgram corpus(const std::string& name) {
  return ray::check_program(parse_file(corpus_path(name)));
}

inline ray::CheckedProgram checked(const std::string& source) {
  return ray::check_program(ray::parse_program(source));
}

/// The parsed program as written, without ANF normalization.
inline ray::CheckedProgram source_program(const std::string& path) {
  ray::CheckedProgram cp;
  cp.program = parse_file(path);
  cp.types = ray::typecheck_program(cp.program);
  cp.classes = ray::ClassTable::build(cp.program);
  return cp;
}

/// Published events per observable tag, the observable part of a final heap.
inline std::map<std::string, std::vector<ray::Value>> observations(const ray::Heap& h) {
  std::map<std::string, std::vector<ray::Value>> out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const ray::HeapObject& o = h.at(static_cast<ray::ObjId>(i));
    if (o.observable) out[o.tag + "#" + std::to_string(i)] = o.published;
  }
  return out;
}

inline const char* const kCorpus[] = {"forwarder", "producer_consumer", "two_producers",
                                      "await_after_done",  "counter", "collect"};

/// `Cell{v=1}`, `running Observable[Int] subs={#1: [2, 1]} waiters=[..]`
/// or `done Observable[Int] subs={}`. Queues are listed head first.
inline std::string render_object(const ray::HeapObject& o) {
  std::string s;
  if (!o.observable) {
    s = o.cls + "{";
    bool first = true;
    for (const auto& [k, v] : o.fields) {
      s += (first ? "" : ", ") + k + "=" + v.str();
      first = false;
    }
    return s + "}";
  }
  s = std::string(o.done ? "done " : "running ") + o.type().str() + " subs={";
  bool first = true;
  for (const auto& [k, q] : o.subs) {
    s += (first ? "#" : ", #") + std::to_string(k) + ": [";
    for (std::size_t i = 0; i < q.size(); ++i) s += (i ? ", " : "") + q[i].str();
    s += "]";
    first = false;
  }
  s += "}";
  if (!o.done) {
    s += " waiters=[";
    for (std::size_t i = 0; i < o.waiters.size(); ++i) {
      s += (i ? ", " : "") + ray::frame_summary(o.waiters[i]);
    }
    s += "]";
  }
  return s;
}

inline std::string render_state(const ray::Machine& m) {
  std::string s;
  for (std::size_t i = 0; i < m.process.size(); ++i) {
    s += "  S" + std::to_string(i) + ": ";
    if (m.process[i].empty()) s += "empty";
    for (std::size_t k = 0; k < m.process[i].size(); ++k) {
      s += (k ? " | " : "") + ray::frame_summary(m.process[i][k]);
    }
    s += "\n";
  }
  for (std::size_t i = 0; i < m.heap.size(); ++i) {
    s += "  #" + std::to_string(i) + " " + render_object(m.heap.at(static_cast<ray::ObjId>(i))) + "\n";
  }
  return s;
}

/// Runs `p` and renders every state. `policy` is "rr" or "script i,j,..".
inline std::string render_run(const ray::CheckedProgram& p, const std::string& policy) {
  ray::RunOptions opts;
  if (policy.rfind("script", 0) == 0) {
    opts.policy = ray::Policy::Script;
    std::stringstream ss(policy.substr(7));
    std::string item;
    while (std::getline(ss, item, ',')) opts.script.push_back(std::stoul(item));
  }
  std::vector<std::string> states;
  ray::Outcome o = ray::run(p, {}, opts,
                            [&](const ray::Machine&, const ray::Choice&, const ray::StepInfo&,
                                const ray::Machine& after) { states.push_back(render_state(after)); });
  std::string out = "policy " + policy + "\n0 init\n" + render_state(ray::initial_machine(p.program));
  for (std::size_t i = 0; i < o.trace.size(); ++i) {
    const ray::TraceEvent& e = o.trace[i];
    out += std::to_string(e.step) + " " + e.choice.str() + " " + e.note + "\n" + states[i];
  }
  return out + "outcome " + ray::outcome_kind_name(o.kind) + "\n";
}

}  // namespace testing

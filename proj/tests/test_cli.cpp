#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <nlohmann/json.hpp>

#include "ray/cli.hpp"
#include "support.hpp"

using namespace ray;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result ray_cmd(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string corpus(const std::string& name) { return testing::corpus_path(name); }

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ray_test_" + name)).string();
}

std::string write_temp(const std::string& name, const std::string& text) {
  const std::string path = temp_path(name);
  std::ofstream(path) << text;
  return path;
}

nlohmann::json without_version(nlohmann::json j) {
  j.erase("version");
  return j;
}

}  // namespace

TEST_CASE("check") {
  CHECK(ray_cmd({"check", corpus("forwarder")}).code == kExitOk);
  Result bad = ray_cmd({"check", write_temp("bad.ray", "let x = y in x")});
  CHECK(bad.code == kExitProgramError);
  CHECK(bad.err.find("bad.ray:1:9:") != std::string::npos);
  Result syntax = ray_cmd({"check", write_temp("syntax.ray", "let x = in x")});
  CHECK(syntax.code == kExitProgramError);
  Result json = ray_cmd({"check", "--json", write_temp("bad.ray", "let x = y in x")});
  nlohmann::json j = nlohmann::json::parse(json.out);
  CHECK(j.at("ok") == false);
  CHECK(j.at("errors").at(0).at("kind") == "UnboundVariable");
  CHECK(ray_cmd({"check", "--strict-syntax", corpus("counter")}).code == kExitProgramError);
  CHECK(ray_cmd({"check", "--strict-syntax", corpus("forwarder")}).code == kExitOk);
}

TEST_CASE("usage errors") {
  CHECK(ray_cmd({"run", "missing.ray"}).code == kExitUsage);
  CHECK(ray_cmd({}).code == kExitUsage);
  CHECK(ray_cmd({"frobnicate"}).code == kExitUsage);
  CHECK(ray_cmd({"run", corpus("forwarder"), "--policy", "sideways"}).code == kExitUsage);
  CHECK(ray_cmd({"gen"}).code == kExitUsage);
  CHECK(ray_cmd({"--help"}).code == kExitOk);
}

TEST_CASE("run") {
  Result r = ray_cmd({"run", corpus("forwarder")});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("outcome: Finished") != std::string::npos);
  CHECK(r.out.find("sink: [1, 2, 3] done") != std::string::npos);
  Result j = ray_cmd({"run", corpus("two_producers"), "--policy", "random", "--seed", "3", "--json", "--check"});
  CHECK(j.code == kExitOk);
  nlohmann::json doc = nlohmann::json::parse(j.out);
  CHECK(doc.at("outcome") == "Finished");
  CHECK(doc.at("violations").empty());
  Result s = ray_cmd({"run", corpus("two_producers"), "--policy", "script", "--script", "0,1,1,0"});
  CHECK(s.code == kExitOk);
}

TEST_CASE("await after done with and without strict await") {
  Result d = ray_cmd({"run", corpus("await_after_done"), "--json"});
  CHECK(d.code == kExitOk);
  CHECK(nlohmann::json::parse(d.out).at("outcome") == "Finished");
  Result s = ray_cmd({"run", corpus("await_after_done"), "--json", "--strict-await"});
  CHECK(s.code == kExitOk);
  CHECK(nlohmann::json::parse(s.out).at("outcome") == "Deadlock");
}

TEST_CASE("a stuck run is a program error") {
  const std::string path = write_temp("stuck.ray",
                                      "class C { var f: Int } class D { var c: C } let n = null in "
                                      "let d = new D(n) in let c = d.c in c.f");
  CHECK(ray_cmd({"run", path}).code == kExitProgramError);
}

TEST_CASE("trace lines follow the schema") {
  const std::string path = temp_path("trace.jsonl");
  CHECK(ray_cmd({"run", corpus("forwarder"), "--trace", path}).code == kExitOk);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    for (const char* k : {"step", "rule", "stack", "choice", "heapDelta", "note"}) CHECK(j.contains(k));
    ++lines;
  }
  CHECK(lines > 10);
}

TEST_CASE("json output is deterministic apart from the version") {
  for (std::vector<std::string> args :
       {std::vector<std::string>{"run", corpus("two_producers"), "--policy", "random", "--seed", "9", "--json"},
        std::vector<std::string>{"explore", corpus("two_producers")},
        std::vector<std::string>{"verify", corpus("forwarder"), "--seeds", "5"}}) {
    Result a = ray_cmd(args);
    Result b = ray_cmd(args);
    nlohmann::json ja = nlohmann::json::parse(a.out);
    CHECK(ja.at("version") == kVersion);
    CHECK(without_version(ja) == without_version(nlohmann::json::parse(b.out)));
  }
}

TEST_CASE("explore") {
  Result r = ray_cmd({"explore", corpus("two_producers")});
  CHECK(r.code == kExitOk);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("sequences").at("c").size() == 3);
  Result lim = ray_cmd({"explore", corpus("forwarder"), "--max-states", "5"});
  CHECK(lim.code == kExitOk);
  CHECK(!lim.err.empty());
  CHECK(nlohmann::json::parse(lim.out).at("stateLimitHit") == true);
  CHECK(ray_cmd({"explore", corpus("forwarder"), "--no-reduce"}).code == kExitOk);
}

TEST_CASE("verify") {
  Result r = ray_cmd({"verify", corpus("forwarder"), "--seeds", "20"});
  CHECK(r.code == kExitOk);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.at("ok") == true);
  CHECK(j.at("summary").at("runs") == 21);
  CHECK(j.at("summary").at("violations") == 0);
  CHECK(j.at("summary").at("ruleCounts").contains("E-Yield"));
  CHECK(ray_cmd({"verify", corpus("forwarder"), "--strict-evolution"}).code == kExitViolation);
  CHECK(ray_cmd({"verify", corpus("forwarder"), "--mutate", "yield-keeps-waiters"}).code == kExitViolation);
  CHECK(ray_cmd({"verify", "--generated", "5", "--seeds", "2"}).code == kExitOk);
}

TEST_CASE("gen") {
  Result a = ray_cmd({"gen", "--seed", "4"});
  Result b = ray_cmd({"gen", "--seed", "4"});
  CHECK(a.code == kExitOk);
  CHECK(a.out == b.out);
  CHECK(typecheck_program(normalize_anf(parse_program(a.out))).ok());
  const std::string path = temp_path("gen.ray");
  CHECK(ray_cmd({"gen", "--seed", "4", "--out", path}).code == kExitOk);
  CHECK(testing::read_text(path) == a.out);
  CHECK(ray_cmd({"check", path}).code == kExitOk);
  Result strict = ray_cmd({"gen", "--seed", "4", "--strict-syntax"});
  CHECK(ray_cmd({"check", "--strict-syntax", write_temp("strict.ray", strict.out)}).code == kExitOk);
}

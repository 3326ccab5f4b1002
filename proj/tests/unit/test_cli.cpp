#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "vsched/cli.hpp"

namespace fs = std::filesystem;
using vsched::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Every file of `a` exists in `b` with identical bytes, and vice versa.
void check_same_tree(const fs::path& a, const fs::path& b) {
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const fs::path other = b / e.path().filename();
    REQUIRE_MESSAGE(fs::exists(other), other.string());
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), e.path().filename().string());
    ++files;
  }
  CHECK(files == static_cast<std::size_t>(std::distance(fs::directory_iterator(b), fs::directory_iterator{})));
}

}  // namespace

TEST_CASE("usage errors map to exit code 2") {
  CHECK(call({}).code == vsched::cli::kExitUsage);
  CHECK(call({"no-such-command"}).code == vsched::cli::kExitUsage);
  vsched::testing::TempDir dir("cli_usage");
  const std::string sc = (dir.path() / "gen").string();
  REQUIRE(call({"generate", "--preset", "reference", "--seed", "1", "--out", sc}).code == 0);
  const Result r = call({"schedule", "--scenario", sc + "/scenario.json", "--algo", "ga", "--variant", "v9", "--out",
                         (dir.path() / "s").string()});
  CHECK(r.code == vsched::cli::kExitUsage);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("help lists every command") {
  const Result r = call({"--help"});
  CHECK(r.code == 0);
  for (const char* cmd : {"generate", "schedule", "compare", "bilevel", "prompt-evolve", "registry", "plot", "rerun"}) {
    CHECK_MESSAGE(r.out.find(cmd) != std::string::npos, cmd);
  }
  CHECK(r.out.find(vsched::cli::kOutDirEnv) != std::string::npos);
}

TEST_CASE("malformed inputs map to exit code 3") {
  vsched::testing::TempDir dir("cli_bad");
  const fs::path bad = dir.path() / "bad.json";
  std::ofstream(bad) << "{\n  \"classes\": []\n}\n";
  const Result r = call({"schedule", "--scenario", bad.string(), "--out", (dir.path() / "o").string()});
  CHECK(r.code == vsched::cli::kExitValidation);
  CHECK(r.err.find("/horizon") != std::string::npos);
}

TEST_CASE("a missing input file is a usage error") {
  vsched::testing::TempDir dir("cli_missing");
  const Result r = call({"schedule", "--scenario", (dir.path() / "nope.json").string(), "--out",
                         (dir.path() / "o").string()});
  CHECK(r.code == vsched::cli::kExitUsage);
}

TEST_CASE("numeric failures map to exit code 4") {
  // Every scenario overloads its only pad, so no validation scenario is feasible.
  vsched::testing::TempDir dir("cli_infeasible");
  const fs::path suite = dir.path() / "suite";
  fs::create_directories(suite);
  for (int k = 0; k < 3; ++k) {
    std::vector<vsched::testing::RequestSpec> reqs(20, {1, 0, 300});
    const auto s = vsched::testing::make_scenario(600, {vsched::PadConfig{1, 1, 0}}, reqs);
    vsched::save_scenario(s, (suite / ("s" + std::to_string(k) + ".json")).string());
  }
  const Result r = call({"bilevel", "--scenarios", suite.string(), "--out", (dir.path() / "o").string()});
  CHECK(r.code == vsched::cli::kExitRuntime);
}

TEST_CASE("listing an empty registry succeeds") {
  vsched::testing::TempDir dir("cli_empty_reg");
  const Result r = call({"registry", "list", "--dir", (dir.path() / "reg").string(), "--out", (dir.path() / "o").string()});
  CHECK(r.code == 0);
}

TEST_CASE("schedule reruns byte-identically from its manifest") {
  vsched::testing::TempDir dir("cli_rerun");
  const std::string gen = (dir.path() / "gen").string();
  REQUIRE(call({"generate", "--preset", "reference", "--seed", "3", "--out", gen}).code == 0);
  const fs::path first = dir.path() / "ga";
  REQUIRE(call({"schedule", "--scenario", gen + "/scenario.json", "--algo", "ga", "--variant", "v5", "--seed", "2",
                "--out", first.string()})
              .code == 0);
  const auto manifest = nlohmann::json::parse(slurp(first / "manifest.json"));
  CHECK(manifest.at("command") == "schedule");
  CHECK(manifest.at("seeds").at("seed") == 2);

  const fs::path second = dir.path() / "ga_again";
  const Result r = call({"rerun", "--manifest", (first / "manifest.json").string(), "--out", second.string()});
  CHECK(r.code == 0);
  check_same_tree(first, second);

  // Changing an input after the fact is detected.
  std::ofstream(gen + "/scenario.json", std::ios::app) << "\n";
  CHECK(call({"rerun", "--manifest", (first / "manifest.json").string(), "--out", (dir.path() / "x").string()}).code ==
        vsched::cli::kExitValidation);
}

TEST_CASE("output directory falls back to the environment") {
  vsched::testing::TempDir dir("cli_env");
  const fs::path target = dir.path() / "from_env";
  ::setenv(vsched::cli::kOutDirEnv, target.c_str(), 1);
  const Result r = call({"generate", "--preset", "planted", "--seed", "0", "--requests", "5"});
  ::unsetenv(vsched::cli::kOutDirEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(target / "manifest.json"));
}

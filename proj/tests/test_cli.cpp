#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mslab/config.hpp"
#include "mslab/errors.hpp"
#include "mslab/runner.hpp"

using namespace mslab;
namespace fs = std::filesystem;

namespace {

const char* kStatic = R"(
curve:
  family: static_circle
  params: {R: 1.0}
model:
  nonlinearity: stefan
  params: {a: 1, b: 1, rho: 1}
  noise: {coupling: multiplicative, gamma0: 0.3}
discretization: {N: 32, M: 10, n: 6, K: 3, paths: 10, master_seed: 5}
suite: [condition_checks]
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mslab_cli_" + name);
  fs::remove_all(p);
  return p;
}

struct Shell {
  int status;
  std::string out;
};

Shell shell(const std::string& cmd) {
  Shell s{0, ""};
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (fgets(buf, sizeof buf, pipe)) s.out += buf;
  const int raw = pclose(pipe);
  s.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return s;
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config_string(kStatic);
  CHECK(c.curve.family == "static_circle");
  CHECK(c.curve.params.at("R") == 1.0);
  CHECK(c.model.noise.coupling == "multiplicative");
  CHECK(c.discretization.n == 6);
  CHECK(c.discretization.master_seed == 5);
  REQUIRE(c.suites.size() == 1);
  CHECK(c.suites[0] == "condition_checks");
  CHECK(build_model(c.model, 3).noise().K() == 3);
  CHECK(initial_coordinates(c.model, 6).size() == 6);
}

TEST_CASE("config validation messages") {
  CHECK(config_error("discretization: {N: 4, n: 8, K: 1}\nsuite: spectrum\n").find("n exceeds resolvable modes") !=
        std::string::npos);
  CHECK(config_error("discretization: {N: 64, n: 4, K: 5}\nsuite: spectrum\n").find("K must not exceed n") !=
        std::string::npos);
  CHECK(config_error("discretization: {paths: 0}\nsuite: spectrum\n").find("at least 1") != std::string::npos);

  const std::string unknown = config_error("discretization: {N: 64}\nsuite:\n  - spectrum\n  - teleport\n");
  CHECK(unknown.find("unknown suite 'teleport'") != std::string::npos);
  CHECK(unknown.find("line 4") != std::string::npos);

  const std::string typo = config_error("suite: spectrum\ncurve:\n  famly: static_circle\n");
  CHECK(typo.find("curve.famly") != std::string::npos);
  CHECK(typo.find("line 3") != std::string::npos);

  CHECK(config_error("suite: spectrum\ndiscretization: {N: many}\n").find("discretization.N") != std::string::npos);
  CHECK(config_error("suite: spectrum\nmodel: {nonlinearity: ice}\n").find("unknown nonlinearity") !=
        std::string::npos);
  CHECK(config_error("curve: {family: static_circle}\n").find("suite") != std::string::npos);
  CHECK(config_error("suite: [spectrum\n").find("line") != std::string::npos);
  CHECK_THROWS_AS(parse_config_file("/nonexistent/mslab.yaml"), ConfigError);
}

TEST_CASE("suite substreams") {
  CHECK(suite_seed(1, "moments") != suite_seed(1, "ito_residual"));
  CHECK(suite_seed(1, "moments") == suite_seed(1, "moments"));
  CHECK((suite_seed(1, "moments") ^ suite_seed(2, "moments")) == 3u);
}

TEST_CASE("static circle condition checks pass and reports are deterministic") {
  const ExperimentConfig c = parse_config_string(kStatic);
  const fs::path a = scratch("a"), b = scratch("b");
  const RunResult ra = run(c, {1, a.string()});
  const RunResult rb = run(c, {2, b.string()});
  REQUIRE(ra.suites.size() == 1);
  CHECK(ra.suites[0].pass);
  CHECK(ra.exit_code() == 0);
  CHECK(rb.exit_code() == 0);
  CHECK(slurp(a / "condition_checks.json") == slurp(b / "condition_checks.json"));
  CHECK(slurp(a / "condition_checks.csv") == slurp(b / "condition_checks.csv"));

  const auto j = nlohmann::json::parse(slurp(a / "condition_checks.json"));
  CHECK(j["schema_version"] == report_schema_version());
  CHECK(j["pass"] == true);
  bool h2 = false;
  for (const auto& chk : j["checks"]) {
    CHECK(chk["pass"] == true);
    h2 = h2 || chk["check"] == "H2";
  }
  CHECK(h2);
  const auto meta = nlohmann::json::parse(slurp(a / "metadata.json"));
  CHECK(meta.contains("started"));
  CHECK(meta["schema_version"] == report_schema_version());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("runtime failures are isolated per suite") {
  // n = 1 is a valid config but the moments suite needs two dimensions
  ExperimentConfig c = parse_config_string(kStatic);
  c.discretization.n = 1;
  c.discretization.K = 1;
  c.suites = {"moments", "spectrum"};
  const fs::path dir = scratch("iso");
  const RunResult r = run(c, {1, dir.string()});
  REQUIRE(r.suites.size() == 2);
  CHECK_FALSE(r.suites[0].pass);
  CHECK(r.suites[0].error.find("n ≥ 2") != std::string::npos);
  CHECK(r.suites[1].pass);
  CHECK(r.exit_code() != 0);
  const auto j = nlohmann::json::parse(slurp(dir / "moments.json"));
  CHECK(j["pass"] == false);
  CHECK(j.contains("error"));
  fs::remove_all(dir);
}

TEST_CASE("plot data and environment override") {
  ExperimentConfig c = parse_config_string(kStatic);
  c.suites = {"spectrum"};
  c.plot_data = true;
  const fs::path dir = scratch("env");
  setenv("MSLAB_OUTPUT_DIR", dir.string().c_str(), 1);
  CHECK(resolve_output_dir(c, {}) == dir.string());
  CHECK(resolve_output_dir(c, {1, "/x"}) == "/x");
  const RunResult r = run(c);
  unsetenv("MSLAB_OUTPUT_DIR");
  CHECK(r.output_dir == dir.string());
  std::ifstream plot(dir / "spectrum_plot.csv");
  std::string header;
  std::getline(plot, header);
  CHECK(header == "x,y,series");
  fs::remove_all(dir);
}

TEST_CASE("command line") {
  const char* exe = std::getenv("MSLAB_CLI");
  if (!exe) {
    MESSAGE("MSLAB_CLI not set; skipping executable checks");
    return;
  }
  const std::string cli = exe;
  const Shell v = shell(cli + " version");
  CHECK(v.status == 0);
  CHECK(v.out == report_schema_version() + "\n");

  const Shell l = shell(cli + " list-suites");
  CHECK(l.status == 0);
  for (const auto& s : suite_names()) CHECK(l.out.find(s) != std::string::npos);

  const fs::path dir = scratch("exe");
  fs::create_directories(dir);
  std::ofstream(dir / "good.yaml") << kStatic;
  std::ofstream(dir / "bad.yaml") << "discretization: {N: 4, n: 8}\nsuite: spectrum\n";
  const Shell ok = shell(cli + " validate " + (dir / "good.yaml").string());
  CHECK(ok.status == 0);
  const Shell bad = shell(cli + " validate " + (dir / "bad.yaml").string());
  CHECK(bad.status != 0);
  CHECK(bad.out.find("n exceeds resolvable modes") != std::string::npos);

  const Shell r = shell("MSLAB_OUTPUT_DIR=" + (dir / "out").string() + " " + cli + " run --threads 2 " +
                        (dir / "good.yaml").string());
  CHECK(r.status == 0);
  CHECK(r.out.find("PASS condition_checks") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "condition_checks.json"));
  CHECK(shell(cli + " frobnicate").status != 0);
  fs::remove_all(dir);
}

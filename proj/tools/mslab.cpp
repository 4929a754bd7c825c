#include <iostream>

#include "CLI11.hpp"
#include "mslab/config.hpp"
#include "mslab/errors.hpp"
#include "mslab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mslab: numerical checks for SPDEs on moving domains"};
  app.require_subcommand(1);

  std::string run_config, validate_config, output_dir;
  int threads = 1;
  auto* run = app.add_subcommand("run", "Run the suites of a config and write reports");
  run->add_option("config", run_config, "YAML experiment config")->required();
  run->add_option("--threads", threads, "Path-level worker threads inside suites")->check(CLI::PositiveNumber);
  run->add_option("--output-dir", output_dir, "Overrides MSLAB_OUTPUT_DIR and the config output_dir");

  auto* list = app.add_subcommand("list-suites", "Print the available suite names");
  auto* validate = app.add_subcommand("validate", "Parse and validate a config without running it");
  validate->add_option("config", validate_config, "YAML experiment config")->required();
  auto* version = app.add_subcommand("version", "Print the report schema version");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& s : mslab::suite_names()) std::cout << s << '\n';
      return 0;
    }
    if (*version) {
      std::cout << mslab::report_schema_version() << '\n';
      return 0;
    }
    if (*validate) {
      const mslab::ExperimentConfig cfg = mslab::parse_config_file(validate_config);
      std::cout << "config ok: " << cfg.suites.size() << " suite(s)\n";
      return 0;
    }
    if (*run) {
      const mslab::ExperimentConfig cfg = mslab::parse_config_file(run_config);
      const mslab::RunResult r = mslab::run(cfg, {threads, output_dir});
      for (const auto& s : r.suites) {
        std::cout << (s.pass ? "PASS " : "FAIL ") << s.suite;
        if (!s.error.empty()) std::cout << "  (" << s.error << ")";
        std::cout << '\n';
      }
      std::cout << "reports in " << r.output_dir << '\n';
      return r.exit_code();
    }
  } catch (const mslab::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mslab/config.hpp"

namespace mslab {

/// Version string embedded in every JSON report.
std::string report_schema_version();

/// Independent RNG substream of a suite: master_seed XOR FNV-1a(name).
std::uint64_t suite_seed(std::uint64_t master_seed, const std::string& suite);

struct RunOptions {
  int threads = 1;
  std::string output_dir;  // overrides MSLAB_OUTPUT_DIR and the config when set
};

struct SuiteOutcome {
  std::string suite;
  bool pass = false;
  std::string error;  // runtime failure message, empty when the suite ran to completion
  std::string report_file;
};

struct RunResult {
  std::string output_dir;
  std::vector<SuiteOutcome> suites;
  bool all_pass() const;
  int exit_code() const { return all_pass() ? 0 : 1; }
};

/// Output directory: options, then the MSLAB_OUTPUT_DIR environment variable, then the config.
std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& opt);

/// Runs the configured suites in order. Writes <suite>.json and CSV data per
/// suite plus metadata.json with timestamps. A suite that throws is recorded
/// as failed and the remaining suites still run.
RunResult run(const ExperimentConfig& cfg, const RunOptions& opt = {});

}  // namespace mslab

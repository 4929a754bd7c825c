#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mslab/operators.hpp"
#include "mslab/pullback.hpp"

namespace mslab {

struct CurveSpec {
  std::string family = "dilating_circle";  // dilating_circle | oscillating_ellipse | static_circle
  std::map<std::string, double> params;
  std::string profile = "linear";          // dilating_circle radius profile: linear | exponential
  double horizon = 1.0;
};

struct DomainMapSpec {
  std::string family = "dilation";  // dilation | bump | identity
  std::map<std::string, double> params;
  double horizon = 0.1;
};

struct NoiseSpec {
  std::string coupling = "additive";  // additive | multiplicative
  double gamma0 = 0.5;
  double decay = 1.0;
  double f_bound = 1.0;
};

struct ModelSpec {
  std::string nonlinearity = "stefan";  // stefan | porous_media | linear_heat
  std::map<std::string, double> params;
  NoiseSpec noise;
  double initial_amplitude = 1.0;  // x0_i = amplitude · k_i^{−initial_decay}
  double initial_decay = 2.0;
};

struct Discretization {
  int N = 64;
  int M = 100;
  int n = 16;
  int K = 4;
  int paths = 100;
  std::uint64_t master_seed = 1;
};

struct ExperimentConfig {
  CurveSpec curve;
  DomainMapSpec domain_map;
  ModelSpec model;
  Discretization discretization;
  std::vector<std::string> suites;
  std::string output_dir = "mslab_out";
  bool plot_data = false;
};

/// Suite names accepted in configs, in canonical order.
const std::vector<std::string>& suite_names();

/// Parses a YAML config. Errors carry the line and field name.
ExperimentConfig parse_config_string(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Throws ConfigError on the first violated rule.
void validate_config(const ExperimentConfig& cfg);

MovingCurve build_curve(const CurveSpec& spec, int N);
StefanModel build_model(const ModelSpec& spec, int K);
DomainMap build_domain_map(const DomainMapSpec& spec);
/// Initial Galerkin coordinates of length n for the Fourier seed ordering.
Vec initial_coordinates(const ModelSpec& spec, int n);

}  // namespace mslab

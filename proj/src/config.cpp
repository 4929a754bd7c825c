#include "mslab/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mslab/errors.hpp"

namespace mslab {

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{
      "spectrum",       "transport_formula",    "condition_checks", "frame_equivalence",
      "pullback_equivalence", "galerkin_convergence", "ito_residual", "stochastic_transport",
      "moments"};
  return names;
}

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& what) {
  std::ostringstream os;
  os << "config";
  if (node.IsDefined() && node.Mark().line >= 0) os << " line " << node.Mark().line + 1;
  os << ", field '" << field << "': " << what;
  throw ConfigError(os.str());
}

template <class T>
void read(const YAML::Node& parent, const char* key, const std::string& path, T& out) {
  const YAML::Node node = parent[key];
  if (!node) return;
  try {
    out = node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, path + key, "has the wrong type");
  }
}

void read_params(const YAML::Node& parent, const std::string& path, std::map<std::string, double>& out) {
  const YAML::Node node = parent["params"];
  if (!node) return;
  if (!node.IsMap()) fail(node, path + "params", "must be a mapping");
  for (const auto& kv : node) {
    const std::string key = kv.first.as<std::string>();
    try {
      out[key] = kv.second.as<double>();
    } catch (const YAML::Exception&) {
      fail(kv.second, path + "params." + key, "must be a number");
    }
  }
}

void check_known(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> keys) {
  if (!node.IsMap()) fail(node, path.empty() ? "<root>" : path, "must be a mapping");
  for (const auto& kv : node) {
    const std::string k = kv.first.as<std::string>();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      fail(kv.first, path + k, "unknown key");
  }
}

}  // namespace

ExperimentConfig parse_config_string(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw ConfigError("config is empty");
  check_known(root, "", {"curve", "domain_map", "model", "discretization", "suite", "output_dir", "plot_data"});
  ExperimentConfig cfg;

  if (const YAML::Node c = root["curve"]) {
    check_known(c, "curve.", {"family", "params", "profile", "horizon"});
    read(c, "family", "curve.", cfg.curve.family);
    read(c, "profile", "curve.", cfg.curve.profile);
    read(c, "horizon", "curve.", cfg.curve.horizon);
    read_params(c, "curve.", cfg.curve.params);
    if (cfg.curve.family != "dilating_circle" && cfg.curve.family != "oscillating_ellipse" &&
        cfg.curve.family != "static_circle")
      fail(c["family"], "curve.family", "unknown curve family '" + cfg.curve.family + "'");
    if (cfg.curve.profile != "linear" && cfg.curve.profile != "exponential")
      fail(c["profile"], "curve.profile", "must be linear or exponential");
  }
  if (const YAML::Node d = root["domain_map"]) {
    check_known(d, "domain_map.", {"family", "params", "horizon"});
    read(d, "family", "domain_map.", cfg.domain_map.family);
    read(d, "horizon", "domain_map.", cfg.domain_map.horizon);
    read_params(d, "domain_map.", cfg.domain_map.params);
    if (cfg.domain_map.family != "dilation" && cfg.domain_map.family != "bump" &&
        cfg.domain_map.family != "identity")
      fail(d["family"], "domain_map.family", "unknown domain map family '" + cfg.domain_map.family + "'");
  }
  if (const YAML::Node m = root["model"]) {
    check_known(m, "model.", {"nonlinearity", "params", "noise", "initial"});
    read(m, "nonlinearity", "model.", cfg.model.nonlinearity);
    read_params(m, "model.", cfg.model.params);
    if (cfg.model.nonlinearity != "stefan" && cfg.model.nonlinearity != "porous_media" &&
        cfg.model.nonlinearity != "linear_heat")
      fail(m["nonlinearity"], "model.nonlinearity", "unknown nonlinearity '" + cfg.model.nonlinearity + "'");
    if (const YAML::Node nz = m["noise"]) {
      check_known(nz, "model.noise.", {"coupling", "gamma0", "decay", "f_bound"});
      read(nz, "coupling", "model.noise.", cfg.model.noise.coupling);
      read(nz, "gamma0", "model.noise.", cfg.model.noise.gamma0);
      read(nz, "decay", "model.noise.", cfg.model.noise.decay);
      read(nz, "f_bound", "model.noise.", cfg.model.noise.f_bound);
      if (cfg.model.noise.coupling != "additive" && cfg.model.noise.coupling != "multiplicative")
        fail(nz["coupling"], "model.noise.coupling", "must be additive or multiplicative");
    }
    if (const YAML::Node in = m["initial"]) {
      check_known(in, "model.initial.", {"amplitude", "decay"});
      read(in, "amplitude", "model.initial.", cfg.model.initial_amplitude);
      read(in, "decay", "model.initial.", cfg.model.initial_decay);
    }
  }
  if (const YAML::Node d = root["discretization"]) {
    check_known(d, "discretization.", {"N", "M", "n", "K", "paths", "master_seed"});
    read(d, "N", "discretization.", cfg.discretization.N);
    read(d, "M", "discretization.", cfg.discretization.M);
    read(d, "n", "discretization.", cfg.discretization.n);
    read(d, "K", "discretization.", cfg.discretization.K);
    read(d, "paths", "discretization.", cfg.discretization.paths);
    read(d, "master_seed", "discretization.", cfg.discretization.master_seed);
  }
  if (const YAML::Node s = root["suite"]) {
    if (s.IsScalar()) cfg.suites.push_back(s.as<std::string>());
    else if (s.IsSequence())
      for (const auto& e : s) cfg.suites.push_back(e.as<std::string>());
    else fail(s, "suite", "must be a name or a list of names");
    for (std::size_t i = 0; i < cfg.suites.size(); ++i) {
      const auto& names = suite_names();
      if (std::find(names.begin(), names.end(), cfg.suites[i]) == names.end())
        fail(s.IsSequence() ? s[i] : s, "suite", "unknown suite '" + cfg.suites[i] + "'");
    }
  } else {
    throw ConfigError("config, field 'suite': missing");
  }
  read(root, "output_dir", "", cfg.output_dir);
  read(root, "plot_data", "", cfg.plot_data);
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str());
}

void validate_config(const ExperimentConfig& cfg) {
  const Discretization& d = cfg.discretization;
  if (d.N < 1 || d.M < 1 || d.n < 1 || d.K < 1 || d.paths < 1)
    throw ConfigError("discretization: N, M, n, K and paths must all be at least 1");
  if (d.n > d.N / 2) throw ConfigError("discretization: n exceeds resolvable modes (n ≤ N/2)");
  if (d.K > d.n) throw ConfigError("discretization: K must not exceed n");
  if (!(cfg.curve.horizon > 0)) throw ConfigError("curve.horizon must be positive");
  if (!(cfg.domain_map.horizon > 0)) throw ConfigError("domain_map.horizon must be positive");
  if (cfg.suites.empty()) throw ConfigError("suite: at least one suite is required");
  for (const auto& s : cfg.suites)
    if (std::find(suite_names().begin(), suite_names().end(), s) == suite_names().end())
      throw ConfigError("suite: unknown suite '" + s + "'");
}

namespace {

double param(const std::map<std::string, double>& p, const char* key, double fallback) {
  const auto it = p.find(key);
  return it == p.end() ? fallback : it->second;
}

}  // namespace

MovingCurve build_curve(const CurveSpec& spec, int N) {
  const auto& p = spec.params;
  if (spec.family == "static_circle") return dilating_circle(param(p, "R", 1.0), 0.0, spec.horizon, N);
  if (spec.family == "dilating_circle")
    return dilating_circle(param(p, "R0", 1.0), param(p, "rate", 0.5), spec.horizon, N,
                           spec.profile == "exponential" ? RadiusProfile::Exponential : RadiusProfile::Linear);
  if (spec.family == "oscillating_ellipse")
    return oscillating_ellipse(param(p, "a0", 1.3), param(p, "b0", 0.8), param(p, "amplitude", 0.2),
                               param(p, "frequency", 0.7), spec.horizon, N);
  throw ConfigError("unknown curve family '" + spec.family + "'");
}

StefanModel build_model(const ModelSpec& spec, int K) {
  const NoiseModel noise = NoiseModel::spectrum(
      spec.noise.coupling == "multiplicative" ? NoiseCoupling::LinearMultiplicative : NoiseCoupling::Additive,
      spec.noise.gamma0, spec.noise.decay, K, spec.noise.f_bound);
  const auto& p = spec.params;
  if (spec.nonlinearity == "stefan")
    return StefanModel::stefan({param(p, "a", 1.0), param(p, "b", 1.0), param(p, "rho", 1.0)}, noise);
  if (spec.nonlinearity == "porous_media") return StefanModel::porous_media(param(p, "p", 3.0), noise);
  if (spec.nonlinearity == "linear_heat") return StefanModel::linear_heat(noise);
  throw ConfigError("unknown nonlinearity '" + spec.nonlinearity + "'");
}

DomainMap build_domain_map(const DomainMapSpec& spec) {
  return DomainMap::by_name(spec.family, spec.params, spec.horizon);
}

Vec initial_coordinates(const ModelSpec& spec, int n) {
  Vec x(n);
  for (int i = 0; i < n; ++i) {
    const double k = i / 2 + 1;
    x[i] = spec.initial_amplitude * std::pow(k, -spec.initial_decay) * (i % 2 == 0 ? 1.0 : -0.5);
  }
  return x;
}

}  // namespace mslab

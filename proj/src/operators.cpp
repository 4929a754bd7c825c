#include "mslab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "mslab/errors.hpp"

namespace mslab {

double beta_eval(const StefanParams& p, double r) {
  if (r < 0) return p.a * r;
  if (r <= p.rho) return 0.0;
  return p.b * (r - p.rho);
}

NoiseModel NoiseModel::spectrum(NoiseCoupling coupling, double gamma0, double decay, int K,
                                double f_bound) {
  if (K < 0) throw DimensionError("noise needs K ≥ 0");
  if (gamma0 < 0) throw DimensionError("noise amplitude must be nonnegative");
  NoiseModel n;
  n.coupling = coupling;
  n.f_bound = f_bound;
  for (int k = 1; k <= K; ++k) n.gamma.push_back(gamma0 * std::pow(double(k), -decay));
  return n;
}

double NoiseModel::gamma_sq_sum() const {
  double s = 0;
  for (double g : gamma) s += g * g;
  return s;
}

StefanModel StefanModel::stefan(StefanParams params, NoiseModel noise) {
  if (!(params.a > 0 && params.b > 0 && params.rho > 0))
    throw DimensionError("Stefan parameters a, b, rho must be positive");
  StefanModel m;
  m.kind_ = NonlinearityKind::Stefan;
  m.stefan_ = params;
  m.p_ = 2;
  m.noise_ = std::move(noise);
  return m;
}

StefanModel StefanModel::porous_media(double p, NoiseModel noise) {
  if (!(p >= 1)) throw DimensionError("porous-media exponent must be at least 1");
  StefanModel m;
  m.kind_ = NonlinearityKind::PorousMedia;
  m.p_ = p;
  m.noise_ = std::move(noise);
  return m;
}

StefanModel StefanModel::linear_heat(NoiseModel noise) {
  StefanModel m;
  m.kind_ = NonlinearityKind::LinearHeat;
  m.p_ = 2;
  m.noise_ = std::move(noise);
  return m;
}

StefanModel StefanModel::custom(std::function<double(double)> psi, double p_growth,
                                NoiseModel noise) {
  StefanModel m;
  m.kind_ = NonlinearityKind::Custom;
  m.custom_ = std::move(psi);
  m.p_ = p_growth;
  m.noise_ = std::move(noise);
  return m;
}

double StefanModel::p_growth() const {
  return (kind_ == NonlinearityKind::Stefan || kind_ == NonlinearityKind::LinearHeat) ? 2.0 : p_;
}

StefanModel StefanModel::with_noise(NoiseModel noise) const {
  StefanModel m = *this;
  m.noise_ = std::move(noise);
  return m;
}

std::string StefanModel::name() const {
  std::ostringstream os;
  switch (kind_) {
    case NonlinearityKind::Stefan:
      os << "stefan(a=" << stefan_.a << ",b=" << stefan_.b << ",rho=" << stefan_.rho << ")";
      break;
    case NonlinearityKind::PorousMedia: os << "porous_media(p=" << p_ << ")"; break;
    case NonlinearityKind::LinearHeat: os << "linear_heat"; break;
    case NonlinearityKind::Custom: os << "custom(p=" << p_ << ")"; break;
  }
  return os.str();
}

double StefanModel::psi(double s) const {
  switch (kind_) {
    case NonlinearityKind::Stefan: return beta_eval(stefan_, s);
    case NonlinearityKind::PorousMedia:
      if (s == 0) return 0.0;
      return std::pow(std::abs(s), p_ - 2) * s;
    case NonlinearityKind::LinearHeat: return s;
    case NonlinearityKind::Custom: return custom_(s);
  }
  return 0.0;
}

double psi_eval(const StefanModel& model, double s) { return model.psi(s); }

PsiReport check_psi_conditions(const std::function<double(double)>& psi, double p,
                               int sample_count, std::vector<double> extra_points) {
  PsiReport r;
  std::vector<double> s{0.0};
  const int half = std::max(sample_count / 2, 10);
  for (int i = 0; i < half; ++i) {
    const double mag = std::pow(10.0, -4.0 + 8.0 * i / (half - 1));
    s.push_back(mag);
    s.push_back(-mag);
  }
  for (double e : extra_points) s.push_back(e);
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = psi(s[i]);

  // (Ψ1) continuity: symmetric increments over a relative step of 1e-9
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double d = 1e-9 * std::max(1.0, std::abs(s[i]));
    const double jump = std::abs(psi(s[i] + d) - psi(s[i] - d)) / (1 + std::abs(v[i]));
    if (jump > r.max_jump) r.max_jump = jump;
    if (jump > 1e-6 && r.psi1) {
      r.psi1 = false;
      r.witness_s = s[i];
      r.failure += "Psi1 jump at s=" + std::to_string(s[i]) + "; ";
    }
  }
  // (Ψ2) monotonicity over all pairs
  r.min_increment = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    r.min_increment = std::min(r.min_increment, (v[i + 1] - v[i]) / (s[i + 1] - s[i]));
  for (std::size_t i = 0; i < s.size() && r.psi2; ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if ((v[j] - v[i]) * (s[j] - s[i]) < 0) {
        r.psi2 = false;
        r.witness_r = s[j];
        r.witness_s = s[i];
        r.failure += "Psi2 fails for r=" + std::to_string(s[j]) + ", s=" + std::to_string(s[i]) + "; ";
        break;
      }
  // (Ψ3) s Ψ(s) ≥ a |s|^p − c4: a from the tail, halved when a deficit remains
  double a = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s[i]) >= 1e3) a = std::min(a, s[i] * v[i] / std::pow(std::abs(s[i]), p));
  auto deficit = [&](double aa) {
    double c = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      c = std::max(c, aa * std::pow(std::abs(s[i]), p) - s[i] * v[i]);
    return c;
  };
  double c4 = deficit(a);
  if (c4 > 0) {
    a *= 0.5;
    c4 = deficit(a);
  }
  r.a = a;
  r.c4 = c4;
  if (!(a > 0) || !std::isfinite(c4)) {
    r.psi3 = false;
    r.failure += "Psi3 has no positive coercivity constant; ";
  }
  // (Ψ4) |Ψ(s)| ≤ c5 |s|^{p−1} + c6
  double c5 = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (std::abs(s[i]) >= 1e3) c5 = std::max(c5, std::abs(v[i]) / std::pow(std::abs(s[i]), p - 1));
  double c6 = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    c6 = std::max(c6, std::abs(v[i]) - c5 * std::pow(std::abs(s[i]), p - 1));
  r.c5 = c5;
  r.c6 = c6;
  if (!std::isfinite(c5) || !std::isfinite(c6)) {
    r.psi4 = false;
    r.failure += "Psi4 growth constants are not finite; ";
  }
  return r;
}

PsiReport check_psi_conditions(const StefanModel& model, int sample_count) {
  std::vector<double> extra;
  if (model.kind() == NonlinearityKind::Stefan) {
    const double rho = model.stefan_params().rho;
    extra = {rho, 0.5 * rho, rho * (1 + 1e-12), -1e-12};
  }
  return check_psi_conditions([&](double s) { return model.psi(s); }, model.p_growth(),
                              sample_count, extra);
}

namespace {

Vec rn_at(const GramPath& gram, double t) {
  const int m = gram.node_index(t);
  if (m >= 0) return gram.grid(m).rn_derivative;
  return build_grid(gram.curve(), t).rn_derivative;
}

}  // namespace

Vec drift_density(const GramPath& gram, const StefanModel& model, double t, const Vec& u) {
  if (u.size() != gram.N()) throw DimensionError("drift: grid function has the wrong length");
  const Vec rn = rn_at(gram, t);
  Vec out(u.size());
  for (int j = 0; j < u.size(); ++j) out[j] = model.psi(u[j] / rn[j]);
  return out;
}

double drift_pairing(const GramPath& gram, const StefanModel& model, double t, const Vec& u,
                     const Vec& v) {
  return -drift_density(gram, model, t, u).dot(gram.mass0().cwiseProduct(v));
}

double drift_pairing_moved(const GramPath& gram, const StefanModel& model, double t,
                           const Vec& u, const Vec& v) {
  const int m = gram.node_index(t);
  const SurfaceGrid g = m >= 0 ? gram.grid(m) : build_grid(gram.curve(), t);
  const Vec X = u.cwiseQuotient(g.rn_derivative);
  Vec psiX(X.size());
  for (int j = 0; j < X.size(); ++j) psiX[j] = model.psi(X[j]);
  return -surface_integral(g, psiX.cwiseProduct(v.cwiseQuotient(g.rn_derivative)));
}

Vec drift_tilde(const GramPath& gram, const StefanModel& model, double t, const Vec& u) {
  const Vec psi = drift_density(gram, model, t, u);
  return gram.project_zero_mean(-(gram.node(0)->S * psi).cwiseQuotient(gram.mass0()));
}

Vec drift_A(const GramPath& gram, const StefanModel& model, double t, const Vec& u) {
  const Vec psi = drift_density(gram, model, t, u);
  return gram.project_zero_mean(-(gram.at(t)->S * psi).cwiseQuotient(gram.mass0()));
}

std::vector<Vec> noise_B(const GramPath& gram, const StefanModel& model, const Mat& seed,
                         double t, const Vec& u) {
  const NoiseModel& nm = model.noise();
  if (seed.cols() < nm.K()) throw DimensionError("noise needs at least K seed directions");
  std::vector<Vec> out;
  out.reserve(nm.K());
  for (int k = 0; k < nm.K(); ++k) {
    const Vec phi = seed.col(k);
    if (nm.coupling == NoiseCoupling::Additive) {
      out.push_back(nm.gamma[k] * phi);
    } else {
      const double num = hminus_inner(gram, t, u, phi);
      const double den = hminus_inner(gram, t, phi, phi);
      out.push_back((nm.gamma[k] * num / den) * phi);
    }
  }
  return out;
}

std::string to_string(HCondition h) {
  switch (h) {
    case HCondition::H1: return "H1";
    case HCondition::H2: return "H2";
    case HCondition::H3: return "H3";
    case HCondition::H4: return "H4";
    case HCondition::H5: return "H5";
  }
  return "H?";
}

namespace {

std::vector<Vec> dictionary(const GramPath& gram, double p) {
  const int N = gram.N();
  std::vector<Vec> dict;
  const double h = 2 * std::numbers::pi / N;
  const int kmax = std::min(16, N / 2 - 1);
  for (int k = 1; k <= kmax; ++k) {
    Vec c(N), s(N);
    for (int j = 0; j < N; ++j) {
      c[j] = std::cos(k * j * h);
      s[j] = std::sin(k * j * h);
    }
    dict.push_back(gram.project_zero_mean(c));
    dict.push_back(gram.project_zero_mean(s));
  }
  std::mt19937_64 rng(64);
  while (dict.size() < 64) dict.push_back(random_smooth_field(gram, rng, kmax));
  for (Vec& w : dict) w /= lp_norm0(gram, w, p);
  return dict;
}

double noise_energy(const GramPath& gram, const std::vector<Vec>& sig, double t) {
  double s = 0;
  for (const Vec& v : sig) s += hminus_inner(gram, t, v, v);
  return s;
}

std::vector<int> sample_nodes(const GramPath& gram, const HOptions& opt) {
  if (!opt.nodes.empty()) return opt.nodes;
  std::vector<int> n;
  for (int i = 0; i < 5; ++i) n.push_back(int(std::lround(gram.M() * i / 4.0)));
  n.erase(std::unique(n.begin(), n.end()), n.end());
  return n;
}

}  // namespace

double dual_norm_lower_bound(const GramPath& gram, const StefanModel& model, double t,
                             const Vec& u) {
  const Vec dens = drift_density(gram, model, t, u).cwiseProduct(gram.mass0());
  double best = 0;
  for (const Vec& w : dictionary(gram, model.p_growth())) best = std::max(best, std::abs(dens.dot(w)));
  return best;
}

HReport verify_H(const GramPath& gram, const StefanModel& model, const Mat& seed, HCondition which,
                 const HOptions& opt) {
  HReport r;
  r.which = which;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ud(std::log10(opt.min_amplitude),
                                            std::log10(opt.max_amplitude));
  auto sample = [&]() {
    const double amp = std::pow(10.0, ud(rng));
    return Vec(amp * random_smooth_field(gram, rng, opt.kmax));
  };
  const double f = model.noise().f_bound;
  const double p = model.p_growth();
  const Vec& m0 = gram.mass0();
  std::vector<Vec> dict;
  if (which == HCondition::H4) dict = dictionary(gram, p);

  switch (which) {
    case HCondition::H1: {
      r.per_level.assign(3, 0.0);
      const int triples = std::max(3, opt.samples / 10);
      for (int node : sample_nodes(gram, opt)) {
        const double t = gram.time(node);
        for (int i = 0; i < triples; ++i) {
          const Vec u = sample(), v = sample(), x = sample();
          for (int level = 0; level < 3; ++level) {
            const int pts = 16 * (1 << level) + 1;
            double prev = drift_pairing(gram, model, t, u - v, x);
            for (int k = 1; k < pts; ++k) {
              const double lam = -1.0 + 2.0 * k / (pts - 1);
              const double cur = drift_pairing(gram, model, t, u + lam * v, x);
              r.per_level[level] = std::max(r.per_level[level], std::abs(cur - prev));
              prev = cur;
            }
          }
        }
      }
      r.measured = r.per_level.back();
      r.pass = r.per_level[1] < r.per_level[0] && r.per_level[2] < r.per_level[1] &&
               r.per_level[2] <= 0.5 * r.per_level[0];
      if (!r.pass) r.witness = "lambda-grid jumps do not shrink under refinement";
      break;
    }
    case HCondition::H2: {
      r.monotone_max = -std::numeric_limits<double>::infinity();
      r.measured = -std::numeric_limits<double>::infinity();
      for (int node : sample_nodes(gram, opt)) {
        const double t = gram.time(node);
        const Vec& rn = gram.grid(node).rn_derivative;
        double worst_here = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < opt.samples; ++i) {
          const Vec u = sample(), v = sample();
          double mono = 0;
          for (int j = 0; j < u.size(); ++j)
            mono += (model.psi(u[j] / rn[j]) - model.psi(v[j] / rn[j])) * (u[j] - v[j]) * m0[j];
          mono *= -2.0;
          const std::vector<Vec> su = noise_B(gram, model, seed, t, u);
          const std::vector<Vec> sv = noise_B(gram, model, seed, t, v);
          double lip = 0;
          for (std::size_t k = 0; k < su.size(); ++k) {
            const Vec d = su[k] - sv[k];
            lip += hminus_inner(gram, t, d, d);
          }
          const double gap = hminus_inner(gram, t, u - v, u - v);
          const double excess = (mono + lip - f * gap) / gap;
          r.monotone_max = std::max(r.monotone_max, mono);
          worst_here = std::max(worst_here, excess);
          if ((mono > 1e-12 || excess > 1e-12) && r.pass) {
            r.pass = false;
            r.witness = "t=" + std::to_string(t) + " monotone=" + std::to_string(mono) +
                        " excess=" + std::to_string(excess);
          }
        }
        r.per_node.push_back(worst_here);
        r.measured = std::max(r.measured, worst_here);
      }
      break;
    }
    case HCondition::H3: {
      r.measured = std::numeric_limits<double>::infinity();
      for (int node : sample_nodes(gram, opt)) {
        const double t = gram.time(node);
        double cmin = std::numeric_limits<double>::infinity();
        for (int i = 0; i < opt.samples; ++i) {
          const Vec u = sample();
          const double lhs = 2 * drift_pairing(gram, model, t, u, u) +
                             noise_energy(gram, noise_B(gram, model, seed, t, u), t);
          const double c = (f * (1 + hminus_inner(gram, t, u, u)) - lhs) / std::pow(lp_norm0(gram, u, p), p);
          cmin = std::min(cmin, c);
        }
        r.per_node.push_back(cmin);
        r.measured = std::min(r.measured, cmin);
        if (!(cmin > 0) && r.pass) {
          r.pass = false;
          r.witness = "no positive coercivity constant at t=" + std::to_string(t);
        }
      }
      break;
    }
    case HCondition::H4: {
      const double q = p / (p - 1);
      r.measured = 0;
      for (int node : sample_nodes(gram, opt)) {
        const double t = gram.time(node);
        double cmax = 0;
        for (int i = 0; i < opt.samples; ++i) {
          const Vec u = sample();
          const Vec dens = drift_density(gram, model, t, u).cwiseProduct(m0);
          double dual = 0;
          for (const Vec& w : dict) dual = std::max(dual, std::abs(dens.dot(w)));
          cmax = std::max(cmax, (std::pow(dual, q) - f) / std::pow(lp_norm0(gram, u, p), p));
        }
        r.per_node.push_back(cmax);
        r.measured = std::max(r.measured, cmax);
      }
      r.pass = std::isfinite(r.measured);
      if (!r.pass) r.witness = "growth constant is not finite";
      break;
    }
    case HCondition::H5: {
      r.measured = 0;
      for (int node : sample_nodes(gram, opt)) {
        const double t = gram.time(node);
        double worst = 0;
        for (int i = 0; i < opt.samples; ++i) {
          const Vec u = sample();
          const double ratio = noise_energy(gram, noise_B(gram, model, seed, t, u), t) /
                               (f * (1 + hminus_inner(gram, t, u, u)));
          worst = std::max(worst, ratio);
        }
        r.per_node.push_back(worst);
        r.measured = std::max(r.measured, worst);
      }
      r.pass = r.measured <= 1.0;
      if (!r.pass) r.witness = "noise energy exceeds f (1 + |u|_t^2)";
      break;
    }
  }
  return r;
}

}  // namespace mslab

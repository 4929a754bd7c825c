#include "mslab/pullback.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "json.hpp"
#include "mslab/errors.hpp"

namespace mslab {

DomainMap::DomainMap(std::string name, Fn r, Fn r_t, Fn r_y, Fn r_yy, double horizon, Fn r_bar)
    : name_(std::move(name)),
      r_(std::move(r)),
      r_t_(std::move(r_t)),
      r_y_(std::move(r_y)),
      r_yy_(std::move(r_yy)),
      r_bar_(std::move(r_bar)),
      horizon_(horizon) {
  if (!(horizon_ > 0)) throw DimensionError("domain map horizon must be positive");
}

DomainMap DomainMap::dilation(double rate, double horizon) {
  if (!(1 + rate * horizon > 0)) throw DiffeomorphismError("dilation collapses the interval");
  return DomainMap(
      "dilation", [rate](double t, double y) { return (1 + rate * t) * y; },
      [rate](double, double y) { return rate * y; }, [rate](double t, double) { return 1 + rate * t; },
      [](double, double) { return 0.0; }, horizon,
      [rate](double t, double x) { return x / (1 + rate * t); });
}

DomainMap DomainMap::bump(double amplitude, double horizon) {
  if (!(std::abs(amplitude) * horizon < 1))
    throw DiffeomorphismError("bump amplitude times horizon must stay below 1");
  return DomainMap(
      "bump", [amplitude](double t, double y) { return y + amplitude * t * y * (1 - y); },
      [amplitude](double, double y) { return amplitude * y * (1 - y); },
      [amplitude](double t, double y) { return 1 + amplitude * t * (1 - 2 * y); },
      [amplitude](double t, double) { return -2 * amplitude * t; }, horizon,
      [amplitude](double t, double x) {
        // c y² − (1 + c) y + x = 0, root in [0, 1] written without dividing by c
        const double c = amplitude * t;
        return 2 * x / ((1 + c) + std::sqrt((1 + c) * (1 + c) - 4 * c * x));
      });
}

DomainMap DomainMap::identity(double horizon) {
  DomainMap m = dilation(0.0, horizon);
  m.name_ = "identity";
  return m;
}

DomainMap DomainMap::by_name(const std::string& family, const std::map<std::string, double>& params,
                             double horizon) {
  auto get = [&](const char* key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  };
  if (family == "dilation") return dilation(get("rate", 1.0), horizon);
  if (family == "bump") return bump(get("amplitude", 0.3), horizon);
  if (family == "identity") return identity(horizon);
  throw ConfigError("unknown domain map family: " + family);
}

double DomainMap::r_bar(double t, double x) const {
  if (r_bar_) return r_bar_(t, x);
  // Newton on r(t, y) = x with bisection safeguard on [0, 1]
  double lo = 0, hi = 1, y = std::clamp(x, 0.0, 1.0);
  for (int it = 0; it < 100; ++it) {
    const double f = r_(t, y) - x;
    if (std::abs(f) < 1e-15) break;
    if (f > 0) hi = y;
    else lo = y;
    double next = y - f / r_y_(t, y);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    y = next;
  }
  return y;
}

void DomainMap::check_invariants(int samples) const {
  for (int i = 0; i < samples; ++i) {
    const double y = double(i) / (samples - 1);
    if (std::abs(r_(0.0, y) - y) > 1e-12) throw DiffeomorphismError(name_ + ": r(0, ·) is not the identity");
    for (int k = 0; k < samples; ++k) {
      const double t = horizon_ * k / (samples - 1);
      if (!(r_y_(t, y) > 0)) throw DiffeomorphismError(name_ + ": ∂_y r is not positive");
      if (std::abs(r_bar(t, r_(t, y)) - y) > 1e-10)
        throw DiffeomorphismError(name_ + ": r̄ does not invert r");
    }
  }
}

TransformedCoefficients transformed_coefficients(const DomainMap& map, double t, double y) {
  const double ry = map.r_y(t, y);
  if (!(ry > 0)) throw DiffeomorphismError("degenerate Jacobian of the domain map");
  const double ryy = map.r_yy(t, y);
  TransformedCoefficients c;
  // r̄_x = 1/r_y, r̄_xx = −r_yy/r_y³, ∂_t r̄ = −r_t/r_y, ∂_y a11 = −2 r_yy/r_y³
  c.a11 = 1 / (ry * ry);
  c.b1 = 2 * ryy / (ry * ry * ry) - ryy / (ry * ry * ry);
  c.b2 = -map.r_t(t, y) / ry;
  return c;
}

Vec Tridiag::apply(const Vec& v) const {
  const int n = size();
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    double s = diag[i] * v[i];
    if (i > 0) s += lower[i] * v[i - 1];
    if (i + 1 < n) s += upper[i] * v[i + 1];
    out[i] = s;
  }
  return out;
}

Mat Tridiag::dense() const {
  const int n = size();
  Mat A = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = diag[i];
    if (i > 0) A(i, i - 1) = lower[i];
    if (i + 1 < n) A(i, i + 1) = upper[i];
  }
  return A;
}

Vec solve_shifted(const Vec& D, double c, const Tridiag& A, const Vec& rhs) {
  const int n = A.size();
  Vec cp(n), dp(n);
  double denom = D[0] - c * A.diag[0];
  if (std::abs(denom) < 1e-300) throw NumericError("tridiagonal solve hit a zero pivot");
  cp[0] = n > 1 ? -c * A.upper[0] / denom : 0;
  dp[0] = rhs[0] / denom;
  for (int i = 1; i < n; ++i) {
    const double l = -c * A.lower[i];
    denom = D[i] - c * A.diag[i] - l * cp[i - 1];
    if (std::abs(denom) < 1e-300) throw NumericError("tridiagonal solve hit a zero pivot");
    cp[i] = i + 1 < n ? -c * A.upper[i] / denom : 0;
    dp[i] = (rhs[i] - l * dp[i - 1]) / denom;
  }
  Vec x(n);
  x[n - 1] = dp[n - 1];
  for (int i = n - 2; i >= 0; --i) x[i] = dp[i] - cp[i] * x[i + 1];
  if (!x.allFinite()) throw NumericError("tridiagonal solve produced non-finite values");
  return x;
}

namespace {

Tridiag zeros(int n) { return {Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)}; }

}  // namespace

PullbackOperators assemble_A1_A2(const DomainMap& map, double t, int cells) {
  if (cells < 2) throw DimensionError("pullback mesh needs at least 2 cells");
  const int n = cells - 1;
  const double h = 1.0 / cells;
  PullbackOperators op{zeros(n), zeros(n), zeros(n)};
  for (int i = 0; i < n; ++i) {
    const double y = (i + 1) * h;
    const double am = transformed_coefficients(map, t, y - 0.5 * h).a11;
    const double ap = transformed_coefficients(map, t, y + 0.5 * h).a11;
    const TransformedCoefficients c = transformed_coefficients(map, t, y);
    op.diffusion.lower[i] = am / (h * h);
    op.diffusion.upper[i] = ap / (h * h);
    op.diffusion.diag[i] = -(am + ap) / (h * h);
    op.A1.lower[i] = op.diffusion.lower[i] - c.b1 / (2 * h);
    op.A1.upper[i] = op.diffusion.upper[i] + c.b1 / (2 * h);
    op.A1.diag[i] = op.diffusion.diag[i];
    op.A2.lower[i] = -c.b2 / (2 * h);
    op.A2.upper[i] = c.b2 / (2 * h);
  }
  return op;
}

Vec flat_iota_star(const DomainMap& map, double t, int cells) {
  Vec d(cells - 1);
  for (int i = 0; i < cells - 1; ++i) d[i] = std::abs(map.r_y(t, (i + 1.0) / cells));
  return d;
}

Vec mesh_function(int cells, const std::function<double(double)>& f) {
  Vec v(cells + 1);
  for (int i = 0; i <= cells; ++i) v[i] = f(double(i) / cells);
  v[0] = v[cells] = 0;
  return v;
}

namespace {

Trajectory start_trajectory(int cells, const Vec& v0, double T, double dt, int& steps) {
  if (v0.size() != cells + 1) throw DimensionError("initial data must have cells + 1 values");
  if (std::abs(v0[0]) > 1e-14 || std::abs(v0[cells]) > 1e-14)
    throw DimensionError("initial data must vanish at the ends");
  if (!(dt > 0) || !(T > 0)) throw DimensionError("dt and T must be positive");
  steps = static_cast<int>(std::lround(T / dt));
  if (steps < 1 || std::abs(steps * dt - T) > 1e-9 * T) throw DimensionError("T must be a multiple of dt");
  Trajectory tr;
  tr.y.resize(cells + 1);
  for (int i = 0; i <= cells; ++i) tr.y[i] = double(i) / cells;
  tr.values = Mat::Zero(steps + 1, cells + 1);
  tr.values.row(0) = v0.transpose();
  tr.times.push_back(0.0);
  return tr;
}

}  // namespace

Trajectory solve_fixed_domain(const DomainMap& map, int cells, double dt, const Vec& v0, double T) {
  int steps = 0;
  Trajectory tr = start_trajectory(cells, v0, T, dt, steps);
  const int n = cells - 1;
  const double h = 1.0 / cells;
  Vec v = v0.segment(1, n);
  const Vec ones = Vec::Ones(n);
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const PullbackOperators now = assemble_A1_A2(map, t, cells);
    double bmax = 0;
    for (int i = 0; i < n; ++i)
      bmax = std::max(bmax, std::abs(transformed_coefficients(map, t, (i + 1) * h).b2));
    if (bmax * dt > h) throw NumericError("CFL guard violated: dt > h / max|b2|");
    const PullbackOperators next = assemble_A1_A2(map, t + dt, cells);
    v = solve_shifted(ones, dt, next.A1, v - dt * now.A2.apply(v));
    tr.values.row(k + 1).segment(1, n) = v.transpose();
    tr.times.push_back(t + dt);
  }
  return tr;
}

namespace {

Vec lumped_mass(const DomainMap& map, double t, int cells) {
  Vec m(cells - 1);
  for (int i = 1; i < cells; ++i)
    m[i - 1] = 0.5 * (map.r(t, (i + 1.0) / cells) - map.r(t, (i - 1.0) / cells));
  return m;
}

Tridiag stiffness(const DomainMap& map, double t, int cells) {
  const int n = cells - 1;
  Tridiag K = zeros(n);
  for (int i = 1; i < cells; ++i) {
    const double lm = map.r(t, double(i) / cells) - map.r(t, (i - 1.0) / cells);
    const double lp = map.r(t, (i + 1.0) / cells) - map.r(t, double(i) / cells);
    K.lower[i - 1] = -1 / lm;
    K.upper[i - 1] = -1 / lp;
    K.diag[i - 1] = 1 / lm + 1 / lp;
  }
  return K;
}

}  // namespace

Trajectory solve_moving_reference(const DomainMap& map, int cells, double dt, const Vec& u0, double T) {
  int steps = 0;
  Trajectory tr = start_trajectory(cells, u0, T, dt, steps);
  const int n = cells - 1;
  Vec u = u0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    // C U_i = (w_{i+1} u_{i+1} − w_{i−1} u_{i−1}) / 2 with the mesh velocity w = ∂_t r
    Vec rhs = lumped_mass(map, t, cells).cwiseProduct(u.segment(1, n));
    for (int i = 1; i < cells; ++i) {
      const double wp = map.r_t(t, (i + 1.0) / cells), wm = map.r_t(t, (i - 1.0) / cells);
      rhs[i - 1] += dt * 0.5 * (wp * u[i + 1] - wm * u[i - 1]);
    }
    Tridiag negK = stiffness(map, t + dt, cells);
    negK.lower = -negK.lower;
    negK.diag = -negK.diag;
    negK.upper = -negK.upper;
    u.segment(1, n) = solve_shifted(lumped_mass(map, t + dt, cells), dt, negK, rhs);
    tr.values.row(k + 1) = u.transpose();
    tr.times.push_back(t + dt);
  }
  return tr;
}

double physical_l2_sq(const DomainMap& map, double t, const Vec& u) {
  const int cells = static_cast<int>(u.size()) - 1;
  const Vec m = lumped_mass(map, t, cells);
  return m.dot(u.segment(1, cells - 1).cwiseAbs2());
}

void Trajectory::write_csv(const std::string& file, const DomainMap& map) const {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file);
  out << "t,y,x,value\n" << std::setprecision(17);
  for (std::size_t k = 0; k < times.size(); ++k)
    for (int i = 0; i < y.size(); ++i)
      out << times[k] << ',' << y[i] << ',' << map.r(times[k], y[i]) << ',' << values(k, i) << '\n';
}

std::vector<EquivalenceRow> pullback_equivalence(const DomainMap& map,
                                                 const std::function<double(double)>& u0,
                                                 const std::vector<int>& cells, double dt_factor,
                                                 double T) {
  std::vector<EquivalenceRow> rows;
  for (int c : cells) {
    EquivalenceRow row;
    row.h = 1.0 / c;
    const int steps = std::max(1, static_cast<int>(std::ceil(T / (dt_factor * row.h * row.h))));
    row.dt = T / steps;
    const Vec v0 = mesh_function(c, u0);
    const Trajectory a = solve_fixed_domain(map, c, row.dt, v0, T);
    const Trajectory b = solve_moving_reference(map, c, row.dt, v0, T);
    row.sup_error = (a.values.bottomRows(1) - b.values.bottomRows(1)).cwiseAbs().maxCoeff();
    if (!rows.empty()) row.rate = std::log2(rows.back().sup_error / row.sup_error) /
                                  std::log2(rows.back().h / row.h);
    rows.push_back(row);
  }
  return rows;
}

std::string equivalence_json(const std::vector<EquivalenceRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows)
    j.push_back({{"h", r.h}, {"dt", r.dt}, {"sup_error", r.sup_error}, {"rate", r.rate}});
  return j.dump(2);
}

}  // namespace mslab

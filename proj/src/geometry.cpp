#include "mslab/geometry.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

#include "mslab/errors.hpp"

namespace mslab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double time_slack(double horizon) { return 1e-12 * std::max(1.0, horizon); }

}  // namespace

MovingCurve::MovingCurve(std::string family, ChartFn reference, JetFn flow, double horizon,
                         int n_grid, bool analytic_time, double dt_geom)
    : family_(std::move(family)),
      reference_(std::move(reference)),
      flow_(std::move(flow)),
      horizon_(horizon),
      n_grid_(n_grid),
      analytic_time_(analytic_time),
      dt_geom_(dt_geom) {
  if (!(horizon_ > 0)) throw DimensionError("curve horizon must be positive");
  if (n_grid_ < 8) throw DimensionError("curve grid needs at least 8 nodes");
  if (!(dt_geom_ > 0)) throw DimensionError("dt_geom must be positive");
}

CurveJet MovingCurve::jet(double t, double theta) const {
  CurveJet j = flow_(t, theta);
  if (!analytic_time_) {
    const double d = dt_geom_;
    const CurveJet p = flow_(t + d, theta);
    const CurveJet m = flow_(t - d, theta);
    j.x_t = (p.x - m.x) / (2 * d);
    j.x_tth = (p.x_th - m.x_th) / (2 * d);
  }
  return j;
}

MovingCurve MovingCurve::with_grid(int n_grid) const {
  MovingCurve c = *this;
  if (n_grid < 8) throw DimensionError("curve grid needs at least 8 nodes");
  c.n_grid_ = n_grid;
  return c;
}

MovingCurve MovingCurve::with_horizon(double horizon) const {
  MovingCurve c = *this;
  if (!(horizon > 0)) throw DimensionError("curve horizon must be positive");
  c.horizon_ = horizon;
  return c;
}

MovingCurve MovingCurve::snapshot(double t) const {
  auto flow = flow_;
  auto frozen = [flow, t](double, double theta) {
    CurveJet j = flow(t, theta);
    j.x_t.setZero();
    j.x_tth.setZero();
    return j;
  };
  auto chart = [flow, t](double theta) { return flow(t, theta).x; };
  return MovingCurve(family_ + "@snapshot", chart, frozen, horizon_, n_grid_, true, dt_geom_);
}

void MovingCurve::check_invariants(int time_samples) const {
  const int N = n_grid_;
  const double h = kTwoPi / N;
  for (int j = 0; j < N; ++j) {
    const double th = j * h;
    if ((flow_(0.0, th).x - reference_(th)).norm() > 1e-12)
      throw NumericError("flow map at t = 0 does not reproduce the reference chart at node " +
                         std::to_string(j));
  }
  const int samples = std::max(time_samples, 2);
  for (int s = 0; s < samples; ++s) {
    const double t = horizon_ * s / (samples - 1);
    for (int j = 0; j < N; ++j) {
      if (jet(t, j * h).x_th.squaredNorm() < kDegenerateMetric)
        throw GeometryDegenerateError(
            "immersion fails at node " + std::to_string(j) + ", t = " + std::to_string(t), j);
    }
    const CurveJet a = jet(t, 0.0);
    const CurveJet b = jet(t, kTwoPi);
    if ((a.x - b.x).norm() > 1e-10 || (a.x_th - b.x_th).norm() > 1e-10)
      throw NumericError("flow map is not 2π-periodic at t = " + std::to_string(t));
  }
}

MovingCurve dilating_circle(double R0, double rate, double horizon, int n_grid,
                            RadiusProfile profile) {
  if (!(R0 > 0)) throw DimensionError("dilating_circle needs R0 > 0");
  auto radius = [=](double t) {
    if (profile == RadiusProfile::Exponential) {
      const double r = R0 * std::exp(rate * t);
      return std::pair{r, rate * r};
    }
    return std::pair{R0 * (1 + rate * t), R0 * rate};
  };
  auto chart = [R0](double th) { return Vec2(R0 * std::cos(th), R0 * std::sin(th)); };
  auto flow = [radius](double t, double th) {
    const auto [r, rdot] = radius(t);
    const Vec2 e(std::cos(th), std::sin(th));
    const Vec2 e_th(-std::sin(th), std::cos(th));
    CurveJet j;
    j.x = r * e;
    j.x_th = r * e_th;
    j.x_thth = -r * e;
    j.x_t = rdot * e;
    j.x_tth = rdot * e_th;
    return j;
  };
  return MovingCurve("dilating_circle", chart, flow, horizon, n_grid);
}

MovingCurve oscillating_ellipse(double a0, double b0, double amplitude, double frequency,
                                double horizon, int n_grid) {
  if (!(a0 > 0 && b0 > 0)) throw DimensionError("oscillating_ellipse needs positive semi-axes");
  if (!(std::abs(amplitude) < 1)) throw DimensionError("oscillating_ellipse needs |amplitude| < 1");
  const double w = kTwoPi * frequency;
  auto chart = [=](double th) { return Vec2(a0 * std::cos(th), b0 * std::sin(th)); };
  auto flow = [=](double t, double th) {
    const double s = amplitude * std::sin(w * t);
    const double sd = amplitude * w * std::cos(w * t);
    const double a = a0 * (1 + s), b = b0 * (1 - s);
    const double ad = a0 * sd, bd = -b0 * sd;
    const double c = std::cos(th), sn = std::sin(th);
    CurveJet j;
    j.x = Vec2(a * c, b * sn);
    j.x_th = Vec2(-a * sn, b * c);
    j.x_thth = Vec2(-a * c, -b * sn);
    j.x_t = Vec2(ad * c, bd * sn);
    j.x_tth = Vec2(-ad * sn, bd * c);
    return j;
  };
  return MovingCurve("oscillating_ellipse", chart, flow, horizon, n_grid);
}

MovingCurve custom_fourier(std::vector<FourierTerm> terms, double horizon, int n_grid) {
  if (terms.empty()) throw DimensionError("custom_fourier needs at least one term");
  for (const auto& r : terms)
    if ((r.component != 0 && r.component != 1) || r.k < 0)
      throw DimensionError("custom_fourier term has an invalid component or wavenumber");
  auto flow = [terms](double t, double th) {
    CurveJet j;
    for (const auto& r : terms) {
      const double c = std::cos(r.k * th), s = std::sin(r.k * th);
      const double cc = r.c0 + r.c1 * t, ss = r.s0 + r.s1 * t;
      const double k = r.k;
      j.x[r.component] += cc * c + ss * s;
      j.x_th[r.component] += k * (-cc * s + ss * c);
      j.x_thth[r.component] += -k * k * (cc * c + ss * s);
      j.x_t[r.component] += r.c1 * c + r.s1 * s;
      j.x_tth[r.component] += k * (-r.c1 * s + r.s1 * c);
    }
    return j;
  };
  auto chart = [flow](double th) { return flow(0.0, th).x; };
  return MovingCurve("custom_fourier", chart, flow, horizon, n_grid);
}

double SurfaceGrid::h() const { return kTwoPi / N; }

SurfaceGrid build_grid(const MovingCurve& curve, double t) {
  const double T = curve.horizon();
  if (t < -time_slack(T) || t > T + time_slack(T))
    throw DimensionError("build_grid: t = " + std::to_string(t) + " outside [0, horizon]");
  const int N = curve.n_grid();
  SurfaceGrid g;
  g.t = t;
  g.N = N;
  g.theta.resize(N);
  g.x.resize(N, 2);
  g.x_th.resize(N, 2);
  g.x_tth.resize(N, 2);
  g.velocity.resize(N, 2);
  g.g11.resize(N);
  g.sqrt_g.resize(N);
  g.rn_derivative.resize(N);
  for (int j = 0; j < N; ++j) {
    const double th = kTwoPi * j / N;
    const CurveJet jt = curve.jet(t, th);
    const double g11 = jt.x_th.squaredNorm();
    if (!(g11 >= kDegenerateMetric))
      throw GeometryDegenerateError("degenerate metric g11 = " + std::to_string(g11) +
                                        " at node " + std::to_string(j),
                                    j);
    const double g0 = curve.jet(0.0, th).x_th.squaredNorm();
    if (!(g0 >= kDegenerateMetric))
      throw GeometryDegenerateError("degenerate reference metric at node " + std::to_string(j), j);
    g.theta[j] = th;
    g.x.row(j) = jt.x.transpose();
    g.x_th.row(j) = jt.x_th.transpose();
    g.x_tth.row(j) = jt.x_tth.transpose();
    g.velocity.row(j) = jt.x_t.transpose();
    g.g11[j] = g11;
    g.sqrt_g[j] = std::sqrt(g11);
    g.rn_derivative[j] = std::sqrt(g11 / g0);
  }
  return g;
}

void write_grid_csv(const SurfaceGrid& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.precision(17);
  out << "theta,g11,sqrt_g,rn_derivative,vx,vy\n";
  for (int j = 0; j < grid.N; ++j)
    out << grid.theta[j] << ',' << grid.g11[j] << ',' << grid.sqrt_g[j] << ','
        << grid.rn_derivative[j] << ',' << grid.velocity(j, 0) << ',' << grid.velocity(j, 1)
        << '\n';
}

const Mat& spectral_diff_matrix(int N) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Mat>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[N];
  if (!slot) {
    const double h = kTwoPi / N;
    auto D = std::make_unique<Mat>(Mat::Zero(N, N));
    for (int j = 0; j < N; ++j)
      for (int k = 0; k < N; ++k) {
        if (j == k) continue;
        const int d = j - k;
        const double sign = (d % 2 == 0) ? 1.0 : -1.0;
        const double half = 0.5 * d * h;
        (*D)(j, k) = (N % 2 == 0) ? 0.5 * sign / std::tan(half) : 0.5 * sign / std::sin(half);
      }
    slot = std::move(D);
  }
  return *slot;
}

Vec spectral_derivative(const Vec& f) { return spectral_diff_matrix(f.size()) * f; }

double surface_integral(const SurfaceGrid& grid, const Vec& f) {
  if (f.size() != grid.N)
    throw DimensionError("surface_integral: expected " + std::to_string(grid.N) + " values, got " +
                         std::to_string(f.size()));
  return grid.h() * f.dot(grid.sqrt_g);
}

Field2 tangential_gradient(const SurfaceGrid& grid, const Vec& f) {
  if (f.size() != grid.N) throw DimensionError("tangential_gradient: size mismatch");
  const Vec scale = spectral_derivative(f).cwiseQuotient(grid.g11);
  Field2 out(grid.N, 2);
  out.col(0) = scale.cwiseProduct(grid.x_th.col(0));
  out.col(1) = scale.cwiseProduct(grid.x_th.col(1));
  return out;
}

Vec tangential_divergence(const SurfaceGrid& grid, const Field2& w) {
  if (w.rows() != grid.N) throw DimensionError("tangential_divergence: size mismatch");
  return tangential_gradient(grid, w.col(0)).col(0) + tangential_gradient(grid, w.col(1)).col(1);
}

Mat weighted_stiffness(const Vec& w) {
  const int N = w.size();
  const double h = kTwoPi / N;
  const Mat& D = spectral_diff_matrix(N);
  Mat S = h * D.transpose() * w.asDiagonal() * D;
  if (N % 2 == 0) {
    Vec nu(N);
    for (int j = 0; j < N; ++j) nu[j] = (j % 2 == 0) ? 1.0 : -1.0;
    const double q = 0.5 * N;
    S += (h * q * q * w.mean() / N) * nu * nu.transpose();
  }
  return 0.5 * (S + S.transpose());
}

Mat laplace_beltrami_matrix(const SurfaceGrid& grid) {
  return weighted_stiffness(grid.sqrt_g.cwiseInverse());
}

Vec mass_diagonal(const SurfaceGrid& grid) { return grid.h() * grid.sqrt_g; }

Vec stiffness_weight_rate(const SurfaceGrid& grid) {
  Vec r(grid.N);
  for (int j = 0; j < grid.N; ++j)
    r[j] = -grid.x_th.row(j).dot(grid.x_tth.row(j)) / (grid.g11[j] * grid.sqrt_g[j]);
  return r;
}

Vec laplace_spectrum(const SurfaceGrid& grid) {
  const Vec m = mass_diagonal(grid).cwiseSqrt().cwiseInverse();
  const Mat A = m.asDiagonal() * laplace_beltrami_matrix(grid) * m.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("generalized eigenproblem did not converge");
  return es.eigenvalues();
}

double poincare_constant(const SurfaceGrid& grid) {
  const Vec ev = laplace_spectrum(grid);
  const double lam1 = ev[1];
  if (!(lam1 > 1e-10 * std::max(1.0, ev[ev.size() - 1])))
    throw NumericError("first nonzero eigenvalue is not separated from the constant kernel");
  return 1.0 / std::sqrt(lam1);
}

Vec sample_field(const MovingCurve& curve, const AmbientField& f, double t) {
  const int N = curve.n_grid();
  Vec out(N);
  for (int j = 0; j < N; ++j) out[j] = f.value(t, curve.position(t, kTwoPi * j / N));
  return out;
}

Vec material_derivative(const MovingCurve& curve, const AmbientField& f, double t) {
  const int N = curve.n_grid();
  Vec out(N);
  if (f.dt && f.grad) {
    for (int j = 0; j < N; ++j) {
      const CurveJet jt = curve.jet(t, kTwoPi * j / N);
      out[j] = f.dt(t, jt.x) + jt.x_t.dot(f.grad(t, jt.x));
    }
    return out;
  }
  const double d = curve.dt_geom();
  for (int j = 0; j < N; ++j) {
    const double th = kTwoPi * j / N;
    out[j] = (f.value(t + d, curve.position(t + d, th)) - f.value(t - d, curve.position(t - d, th))) /
             (2 * d);
  }
  return out;
}

TransportResult transport_residual(const MovingCurve& curve, const AmbientField& f, double t,
                                   double dt_fd) {
  if (!(dt_fd > 0)) throw DimensionError("transport_residual needs dt_fd > 0");
  const double T = curve.horizon();
  auto integral = [&](double s) { return surface_integral(build_grid(curve, s), sample_field(curve, f, s)); };
  TransportResult r;
  if (t - dt_fd >= -time_slack(T) && t + dt_fd <= T + time_slack(T)) {
    r.lhs = (integral(t + dt_fd) - integral(t - dt_fd)) / (2 * dt_fd);
  } else if (t + dt_fd <= T + time_slack(T)) {
    r.one_sided = true;
    r.lhs = (integral(t + dt_fd) - integral(t)) / dt_fd;
  } else {
    r.one_sided = true;
    r.lhs = (integral(t) - integral(t - dt_fd)) / dt_fd;
  }
  const SurfaceGrid g = build_grid(curve, t);
  const Vec fv = sample_field(curve, f, t);
  const Vec div_v = tangential_divergence(g, g.velocity);
  r.rhs = surface_integral(g, material_derivative(curve, f, t) + fv.cwiseProduct(div_v));
  r.residual = std::abs(r.lhs - r.rhs);
  return r;
}

}  // namespace mslab

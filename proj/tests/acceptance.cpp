// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mslab/energy.hpp"
#include "mslab/galerkin.hpp"
#include "mslab/pullback.hpp"
#include "mslab/spaces.hpp"

using namespace mslab;

namespace {

constexpr double pi = std::numbers::pi;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

AmbientField field(std::function<double(double, const Vec2&)> f) {
  AmbientField a;
  a.value = std::move(f);
  return a;
}

MovingCurve exp_dilation(int N, double T = 1.0) {
  return dilating_circle(1.0, 0.7, T, N, RadiusProfile::Exponential);
}

StefanModel inert() { return StefanModel::custom([](double) { return 0.0; }, 2.0); }

// transport formula on R(t) = 1 + t/2
void transport_formula(Verdict& v) {
  const MovingCurve c = dilating_circle(1.0, 0.5, 1.0, 256);
  const TransportResult r = transport_residual(c, field([](double, const Vec2&) { return 1.0; }), 0.5, 1e-4);
  v.detail << "f=1 residual " << r.residual << " (lhs " << r.lhs << ", rhs " << r.rhs << ", exact π); ";
  v.require(r.residual < 1e-6, "residual < 1e-6");
  const std::vector<std::pair<const char*, AmbientField>> fields{
      {"one", field([](double, const Vec2&) { return 1.0; })},
      {"quadratic", field([](double t, const Vec2& x) { return x[0] * x[0] + t * x[1]; })},
      {"damped_wave", field([](double t, const Vec2& x) { return std::exp(-t) * std::cos(2 * x[1]); })}};
  for (const auto& [name, f] : fields) {
    std::vector<double> res;
    for (double h : {4e-2, 2e-2, 1e-2, 5e-3}) res.push_back(transport_residual(c, f, 0.5, h).residual);
    v.detail << name << " rates";
    for (std::size_t i = 1; i < res.size(); ++i) {
      if (res[i - 1] <= 1e-10) {
        v.detail << " exact";
        v.require(res[i] <= 1e-10, std::string(name) + " stays exact");
        continue;
      }
      const double rate = std::log2(res[i - 1] / res[i]);
      v.detail << ' ' << rate;
      v.require(rate >= 1.0, std::string(name) + " rate ≥ 1");
    }
    v.detail << "; ";
  }
}

// spectrum of the circle and its Poincaré constant
void laplace_spectrum_check(Verdict& v) {
  for (double R : {1.0, 1.5}) {
    const SurfaceGrid g = build_grid(dilating_circle(R, 0.0, 1.0, 256), 0.0);
    const Vec ev = laplace_spectrum(g);
    double worst = 0;
    for (int k = 1; k <= 4; ++k)
      for (int j : {2 * k - 1, 2 * k}) worst = std::max(worst, std::abs(ev[j] * R * R / (k * k) - 1));
    const double pc = std::abs(poincare_constant(g) / R - 1);
    v.detail << "R=" << R << " eig rel " << worst << " poincare rel " << pc << "; ";
    v.require(worst <= 1e-6, "eigenvalues k²/R²");
    v.require(pc <= 1e-6, "Poincaré constant R");
  }
}

// H^-1 norms of cos kθ on the unit circle
void hminus_norms(Verdict& v) {
  const SurfaceGrid g = build_grid(dilating_circle(1.0, 0.0, 1.0, 512), 0.0);
  double worst = 0;
  for (int k = 1; k <= 5; ++k) {
    const Vec f = (k * g.theta.array()).cos().matrix();
    worst = std::max(worst, std::abs(std::sqrt(hminus_norm_sq_on_grid(g, f)) * k / std::sqrt(pi) - 1));
  }
  v.detail << "max rel error " << worst;
  v.require(worst <= 1e-6, "√π/k within 1e-6");
}

// (C1)–(C4) on the dilation family
void conditions_C(Verdict& v) {
  const int N = 32;
  const GramPath g100(exp_dilation(N), 100), g200(exp_dilation(N), 200);
  const C1Report c1 = check_C1(g100, 200);
  v.detail << "c1 " << c1.c1 << " at t=" << c1.t_worst << "; ";
  v.require(std::isfinite(c1.c1) && c1.c1 >= 1, "c1 finite");

  const double r1 = check_C2(g100).max_residual, r2 = check_C2(g200).max_residual;
  v.detail << "C2 ratio " << r1 / r2 << "; ";
  v.require(r1 / r2 >= 3.5 && r1 / r2 <= 4.5, "C2 ratio in [3.5, 4.5]");

  const Mat H = inner0_matrix(g100);
  std::mt19937_64 rng(9);
  double sa = 0;
  for (int i = 0; i < 40; ++i) {
    const Mat Phi = phi_operator(g100, g100.time(i % 5 * 25));
    const Vec f = random_smooth_field(g100, rng, 12), h = random_smooth_field(g100, rng, 12);
    const double a = f.dot(H * (Phi * h));
    sa = std::max(sa, std::abs(a - (Phi * f).dot(H * h)) / std::max(1.0, std::abs(a)));
  }
  v.detail << "Φ self-adjoint " << sa << "; ";
  v.require(sa <= 1e-9, "Φ self-adjoint ≤ 1e-9");

  const C3C4Report c34 = check_C3_C4(GramPath(exp_dilation(N), 10), 2.0, 50);
  v.detail << "c2 " << c34.c2 << " c3 " << c34.c3 << " inverse pair " << c34.inverse_pair_residual << "; ";
  v.require(std::isfinite(c34.c2) && std::isfinite(c34.c3), "C3/C4 constants finite");
  v.require(c34.inverse_pair_residual <= 1e-9, "inverse pair ≤ 1e-9");

  const double a = inverse_identity_residual(GramPath(exp_dilation(N), 40), 1.0);
  const double b = inverse_identity_residual(GramPath(exp_dilation(N), 80), 1.0);
  v.detail << "inverse-map identity ratio " << a / b;
  v.require(a / b >= 3.5 && a / b <= 4.5, "inverse-map identity order 2");
}

// H^-1 norm on the moved curve against the reference frame
void frame_equivalence(Verdict& v) {
  const int N = 64;
  double worst = 0;
  for (const MovingCurve& c : {exp_dilation(N), oscillating_ellipse(1.4, 0.7, 0.3, 1.0, 1.0, N)}) {
    const GramPath g(c, 4);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int m = 0; m <= 4; ++m) {
      const double t = g.time(m);
      const SurfaceGrid moved = build_grid(c.snapshot(t), 0.0);
      const Vec Mt = mass_diagonal(moved);
      for (int i = 0; i < 20; ++i) {
        Vec f = Vec::Zero(N);
        for (int k = 1; k < 10; ++k)
          f += (nd(rng) / k) * (k * moved.theta.array()).cos().matrix() +
               (nd(rng) / k) * (k * moved.theta.array()).sin().matrix();
        f.array() -= Mt.dot(f) / Mt.sum();
        const double on_moved = hminus_norm_sq_on_grid(moved, f);
        const Vec ft = pull_back_density(g.grid(m), f);
        worst = std::max(worst, std::abs(on_moved - hminus_inner(g, t, ft, ft)) / std::max(1.0, on_moved));
      }
    }
  }
  v.detail << "max rel difference " << worst << " over 2 curves × 5 times × 20 fields";
  v.require(worst <= 1e-8, "≤ 1e-8");
}

// (Ψ1)–(Ψ4) and (H1)–(H5)
void conditions_H(Verdict& v) {
  const GramPath g(dilating_circle(1.0, 0.5, 1.0, 64), 20);
  const Mat seed = fourier_seed_basis(g, 4);
  const NoiseModel noise = NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.3, 1.0, 4);
  const std::vector<std::pair<std::string, StefanModel>> models{
      {"stefan", StefanModel::stefan({1, 1, 1}, noise)},
      {"pm2", StefanModel::porous_media(2, noise)},
      {"pm3", StefanModel::porous_media(3, noise)},
      {"pm4", StefanModel::porous_media(4, noise)}};
  for (const auto& [name, model] : models) {
    const PsiReport psi = check_psi_conditions(model);
    v.require(psi.all(), name + " Ψ: " + psi.failure);
    double mono = -1e300, c_min = 1e300;
    for (HCondition h : {HCondition::H1, HCondition::H2, HCondition::H3, HCondition::H4, HCondition::H5}) {
      HOptions opt;
      opt.samples = h == HCondition::H2 ? 500 : 100;
      const HReport r = verify_H(g, model, seed, h, opt);
      if (!r.pass) v.require(false, name + " " + to_string(h) + " " + r.witness);
      if (h == HCondition::H2) mono = r.monotone_max;
      if (h == HCondition::H3)
        for (double c : r.per_node) c_min = std::min(c_min, c);
    }
    v.detail << name << ": H2 max pairing " << mono << ", H3 min c " << c_min << "; ";
    v.require(mono <= 1e-12, name + " H2 pairing ≤ 1e-12");
    v.require(c_min > 0, name + " H3 c > 0");
  }
}

// pullback heat equation in the two frames
void pullback(Verdict& v) {
  const auto u0 = [](double y) { return std::sin(pi * y); };
  const auto rows = pullback_equivalence(DomainMap::dilation(1.0, 0.1), u0, {32, 64, 128}, 0.5, 0.1);
  v.detail << "errors";
  for (const auto& r : rows) v.detail << ' ' << r.sup_error << " (C " << r.sup_error / (r.h * r.h + r.dt) << ')';
  v.detail << " rates " << rows[1].rate << ' ' << rows[2].rate << "; ";
  v.require(rows[1].rate >= 1.8 && rows[2].rate >= 1.8, "spatial rate ≥ 1.8");

  const int cells = 128;
  const Trajectory id = solve_fixed_domain(DomainMap::identity(0.1), cells, 1e-4, mesh_function(cells, u0), 0.1);
  double err = 0;
  for (int i = 0; i <= cells; ++i)
    err = std::max(err, std::abs(id.values(id.values.rows() - 1, i) - std::exp(-pi * pi * 0.1) * u0(id.y[i])));
  v.detail << "identity decay error " << err;
  v.require(err <= 1e-3, "e^{-π²t} within 1e-3");
}

Vec start(int n, double amplitude) {
  Vec x = Vec::Zero(n);
  for (int i = 0; i < n; ++i) x[i] = amplitude * std::pow(i / 2 + 1.0, -2.0) * (i % 2 ? -0.5 : 1.0);
  return x;
}

// Itô identity for |X_t|_t²
void ito_identity(Verdict& v) {
  std::vector<double> quad;
  for (int M : {20, 40, 80}) {
    const GramPath g(exp_dilation(32), M);
    const TimeBasis tb(g, 6);
    quad.push_back(std::abs(ito_residual(simulate_path(tb, inert(), start(6, 1.0), 1), tb, inert()).residual.back()));
  }
  v.detail << "quadrature ratios " << quad[0] / quad[1] << ' ' << quad[1] / quad[2] << "; ";
  v.require(quad[0] / quad[1] >= 3.5 && quad[0] / quad[1] <= 4.5 && quad[1] / quad[2] >= 3.5 &&
                quad[1] / quad[2] <= 4.5,
            "drift-free order 2");

  const MovingCurve curve = dilating_circle(1.0, 0.5, 0.2, 64);
  const StefanModel st = StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::Additive, 0.05, 1.0, 4));
  std::vector<double> mean;
  for (int M : {100, 200}) {
    const GramPath g(curve, M);
    const TimeBasis tb(g, 16);
    const EnsembleResidual e = ito_ensemble(tb, st, start(16, 3.0), 200, 2024);
    v.require(e.failed == 0, "no blow-up");
    mean.push_back(e.mean_abs_residual);
  }
  v.detail << "Stefan mean |res(T)| " << mean[0] << " -> " << mean[1] << ", ratio " << mean[0] / mean[1];
  v.require(mean[0] / mean[1] >= 1.6 && mean[0] / mean[1] <= 2.6, "ensemble ratio in [1.6, 2.6]");
}

// Galerkin Cauchy distances, uniqueness and zero mean
void galerkin(Verdict& v) {
  const GramPath g(dilating_circle(1.0, 0.5, 0.2, 128), 200);
  const TimeBasis tb(g, 64);
  const StefanModel st = StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::Additive, 0.5, 1.0, 4));
  Vec x0(64);
  for (int i = 0; i < 64; ++i) x0[i] = std::pow(0.5, i / 2) * (i % 2 ? -1.0 : 1.0);
  const auto rows = galerkin_convergence(tb, st, x0, {4, 8, 16, 32}, 50, 99);
  v.detail << "d(n)";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    v.detail << ' ' << rows[i].d;
    v.require(rows[i].failed == 0, "no blow-up");
    if (i > 0) v.require(rows[i].d < rows[i - 1].d, "d strictly decreasing");
  }
  const UniquenessReport u = pathwise_uniqueness_check(tb, st, x0, x0, 7);
  v.detail << "; uniqueness " << u.max_deviation;
  v.require(u.max_deviation <= 1e-12, "uniqueness ≤ 1e-12");
  double drift = 0;
  for (int i = 0; i < 20; ++i) drift = std::max(drift, simulate_path(tb, st, x0, path_seed(99, i)).max_mean_drift);
  v.detail << "; max mean " << drift;
  v.require(drift <= 1e-9, "zero mean ≤ 1e-9");
}

// energy equality with the deformation tensor
void stochastic_transport(Verdict& v) {
  double worst = 0;
  int pairs = 0;
  for (const MovingCurve& c : {exp_dilation(64), oscillating_ellipse(1.3, 0.8, 0.2, 0.7, 1.0, 64)}) {
    const GramPath g(c, 20);
    const TimeBasis tb(g, 12);
    const StefanModel st =
        StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.4, 1.0, 4));
    for (int p = 0; p < 2; ++p) {
      const TransportLedger L = stochastic_transport_residual(simulate_path(tb, st, start(12, 2.0), 31 + p), tb, st);
      for (int m : {1, 5, 10, 15, 19}) {
        worst = std::max(worst, std::abs(L.phi_abstract[m] - L.phi_tensor[m]) / (1 + std::abs(L.phi_abstract[m])));
        ++pairs;
      }
    }
  }
  v.detail << "Φ vs tensor " << worst << " over " << pairs << " pairs; ";
  v.require(worst <= 1e-8, "deformation term within 1e-8");

  const StefanModel quiet = StefanModel::stefan({1, 1, 1});
  std::vector<double> res;
  for (int M : {40, 80, 160}) {
    const GramPath s(dilating_circle(1.0, 0.0, 0.5, 32), M);
    const TimeBasis tb(s, 8);
    res.push_back(std::abs(stochastic_transport_residual(simulate_path(tb, quiet, start(8, 3.0), 2), tb, quiet)
                               .residual.back()));
  }
  const double order = std::log2(res[0] / res[2]) / 2;
  v.detail << "static order " << order << "; ";
  v.require(order >= 0.8 && order <= 1.2, "static order 1");

  const double alpha = 0.7;
  const SurfaceGrid g = build_grid(exp_dilation(64), 0.0);
  const auto B = deformation_tensor(g);
  double tw = 0;
  for (int j = 0; j < g.N; ++j) {
    const double nx = std::cos(g.theta[j]), ny = std::sin(g.theta[j]);
    const Tensor2 want{alpha * (2 * nx * nx - 1), alpha * 2 * nx * ny, alpha * 2 * nx * ny, alpha * (2 * ny * ny - 1)};
    for (int k = 0; k < 4; ++k) tw = std::max(tw, std::abs(B[j][k] - want[k]));
  }
  v.detail << "αx tensor " << tw;
  v.require(tw <= 1e-9, "closed-form tensor within 1e-9");
}

// moments uniform in n
void moments(Verdict& v) {
  const GramPath g(dilating_circle(1.0, 0.5, 0.5, 128), 100);
  const TimeBasis tb(g, 32);
  const StefanModel st =
      StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.5, 1.0, 4));
  Vec x0 = Vec::Zero(32);
  x0.head(16) = start(16, 1.0);
  const MomentEstimate a = moment_estimate(tb.truncate(16), st, x0.head(16), 500, 5);
  const MomentEstimate b = moment_estimate(tb, st, x0, 500, 5);
  const double se = std::hypot(a.sup_stderr, b.sup_stderr);
  v.detail << "n=16 " << a.sup_estimate << " ± " << a.sup_stderr << ", n=32 " << b.sup_estimate << " ± "
           << b.sup_stderr << ", gap/se " << std::abs(a.sup_estimate - b.sup_estimate) / se;
  v.require(a.failed == 0 && b.failed == 0, "no blow-up");
  v.require(std::abs(a.sup_estimate - b.sup_estimate) <= 3 * se, "within 3 combined stderr");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Verdict&)>>> criteria{
      {"transport formula on a dilating circle", transport_formula},
      {"Laplace-Beltrami spectrum and Poincare constant", laplace_spectrum_check},
      {"H^-1 norms of cos k theta", hminus_norms},
      {"C1-C4 on the dilation family", conditions_C},
      {"H^-1 frame equivalence", frame_equivalence},
      {"Psi1-Psi4 and H1-H5 for Stefan and porous media", conditions_H},
      {"pullback heat equation frames", pullback},
      {"Ito identity for the time-dependent norm", ito_identity},
      {"Galerkin Cauchy convergence", galerkin},
      {"stochastic transport energy equality", stochastic_transport},
      {"moment bounds uniform in n", moments}};
  int failed = 0, index = 0;
  for (const auto& [name, fn] : criteria) {
    ++index;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "[exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2d %s (%.1fs): %s\n", v.pass ? "PASS" : "FAIL", index, name, secs, v.detail.str().c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "mslab/energy.hpp"
#include "mslab/errors.hpp"

using namespace mslab;

namespace {

GramPath dilation(int N, int M, double T = 1.0) {
  return GramPath(dilating_circle(1.0, 0.7, T, N, RadiusProfile::Exponential), M);
}

GramPath static_circle(int N, int M, double T = 1.0) {
  return GramPath(dilating_circle(1.0, 0.0, T, N), M);
}

StefanModel inert() {
  return StefanModel::custom([](double) { return 0.0; }, 2.0);
}

Vec start(int n) {
  Vec x = Vec::Zero(n);
  x[0] = 1.2;
  x[1] = -0.4;
  if (n > 3) x[3] = 0.6;
  return x;
}

}  // namespace

TEST_CASE("Ito ledger for a constant path") {
  const GramPath s = static_circle(32, 20);
  const TimeBasis tb(s, 6);
  const PathState p = simulate_path(tb, inert(), start(6), 1);
  const EnergyLedger L = ito_residual(p, tb, inert());
  REQUIRE(L.residual.size() == 21);
  CHECK(L.drift_term[0] == 0.0);
  CHECK(L.phi_term[0] == 0.0);
  CHECK(L.residual[0] == 0.0);
  for (double r : L.residual) CHECK(std::abs(r) <= 1e-12);
}

TEST_CASE("Ito ledger on a moving curve is pure quadrature") {
  std::vector<double> res;
  for (int M : {20, 40, 80}) {
    const GramPath g = dilation(32, M);
    const TimeBasis tb(g, 6);
    const PathState p = simulate_path(tb, inert(), start(6), 1);
    const EnergyLedger L = ito_residual(p, tb, inert());
    CHECK(L.phi_term.back() > 0);
    res.push_back(std::abs(L.residual.back()));
  }
  CHECK(res[0] / res[1] == doctest::Approx(4.0).epsilon(0.1));
  CHECK(res[1] / res[2] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("Ito ledger for the stochastic Stefan model") {
  const GramPath g = dilation(32, 50);
  const TimeBasis tb(g, 8);
  const StefanModel st =
      StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.5, 1, 4));
  const EnsembleResidual e = ito_ensemble(tb, st, start(8), 200, 11);
  CHECK(e.failed == 0);
  CHECK(std::abs(e.martingale_mean) <= 3 * e.martingale_stderr);
  CHECK(e.mean_abs_residual < 0.1);
  CHECK(e.to_json().find("mean_abs_residual") != std::string::npos);

  const PathState p = simulate_path(tb, st, start(8), 3);
  const EnergyLedger L = ito_residual(p, tb, st);
  CHECK(L.martingale_term[0] == 0.0);
  for (std::size_t m = 0; m < L.lhs.size(); ++m)
    CHECK(L.residual[m] == doctest::Approx(L.lhs[m] - L.lhs[0] - L.drift_term[m] - L.ito_correction[m] -
                                           L.phi_term[m] - L.martingale_term[m]));
}

TEST_CASE("Gronwall functional") {
  const GramPath g = dilation(32, 40);
  const TimeBasis tb(g, 8);
  const StefanModel st =
      StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.5, 1, 4));
  const PathState X = simulate_path(tb, st, start(8), 4);
  for (double v : gronwall_functional(X, X, tb, st)) CHECK(v == 0.0);

  const GramPath s = static_circle(32, 40);
  const TimeBasis ts(s, 8);
  const StefanModel heat = StefanModel::linear_heat();
  Vec y0 = start(8);
  y0[2] = 0.9;
  const auto gv = gronwall_functional(simulate_path(ts, heat, start(8), 1), simulate_path(ts, heat, y0, 1),
                                      ts, heat);
  for (std::size_t m = 0; m + 1 < gv.size(); ++m) CHECK(gv[m + 1] <= gv[m]);

  const GronwallTrend tr = gronwall_ensemble(tb, st, start(8), y0, 500, 21);
  CHECK(tr.max_increase_in_stderr <= 3.0);
  CHECK(tr.mean.back() < tr.mean.front());
}

TEST_CASE("deformation tensor") {
  const GramPath s = static_circle(32, 2);
  for (const Tensor2& B : deformation_tensor(s.grid(1)))
    for (double v : B) CHECK(v == 0.0);

  // v = αx on the unit circle: 𝓑 = α(2ννᵀ − I)
  const double alpha = 0.7;
  const SurfaceGrid g = build_grid(dilating_circle(1.0, alpha, 1.0, 64, RadiusProfile::Exponential), 0.0);
  const auto B = deformation_tensor(g);
  double worst = 0;
  for (int j = 0; j < 64; ++j) {
    const double nx = std::cos(g.theta[j]), ny = std::sin(g.theta[j]);
    const Tensor2 want{alpha * (2 * nx * nx - 1), alpha * 2 * nx * ny, alpha * 2 * nx * ny,
                       alpha * (2 * ny * ny - 1)};
    for (int k = 0; k < 4; ++k) worst = std::max(worst, std::abs(B[j][k] - want[k]));
    CHECK(B[j][1] == B[j][2]);
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("deformation term equals the abstract Phi form") {
  for (const MovingCurve& curve : {dilating_circle(1.0, 0.7, 1.0, 64, RadiusProfile::Exponential),
                                   oscillating_ellipse(1.3, 0.8, 0.2, 0.7, 1.0, 64)}) {
    const GramPath g(curve, 20);
    const TimeBasis tb(g, 12);
    const StefanModel st =
        StefanModel::stefan({1, 1, 1}, NoiseModel::spectrum(NoiseCoupling::LinearMultiplicative, 0.4, 1, 4));
    const PathState p = simulate_path(tb, st, start(12), 8);
    const TransportLedger L = stochastic_transport_residual(p, tb, st);
    CHECK(L.max_phi_mismatch <= 1e-8);
    CHECK(L.max_frame_mismatch <= 1e-8);
    REQUIRE(L.phi_abstract.size() == 20);
    CHECK(std::abs(L.phi_abstract[5]) > 1e-3);
  }
}

TEST_CASE("static geometry reduces to the fixed-surface balance") {
  const StefanModel st = StefanModel::stefan({1, 1, 1});
  std::vector<double> res;
  for (int M : {40, 80, 160}) {
    const GramPath s = static_circle(32, M, 0.5);
    const TimeBasis tb(s, 8);
    const PathState p = simulate_path(tb, st, 3.0 * start(8), 2);
    const TransportLedger L = stochastic_transport_residual(p, tb, st);
    for (double d : L.deformation_term) CHECK(d == 0.0);
    res.push_back(std::abs(L.residual.back()));
  }
  const double order = std::log2(res[0] / res[2]) / 2;
  CHECK(order == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("deterministic heat energy balance per step") {
  const GramPath g = dilation(32, 200);
  const TimeBasis tb(g, 8);
  const StefanModel heat = StefanModel::linear_heat();
  const PathState p = simulate_path(tb, heat, start(8), 1);
  const TransportLedger L = stochastic_transport_residual(p, tb, heat);
  double worst = 0;
  for (int m = 0; m < 200; ++m) {
    const double dlhs = (L.lhs[m + 1] - L.lhs[m]) / g.dt();
    const double rhs = (L.drift_term[m + 1] - L.drift_term[m] + L.deformation_term[m + 1] -
                        L.deformation_term[m]) / g.dt();
    worst = std::max(worst, std::abs(dlhs - rhs) / (1 + std::abs(rhs)));
  }
  CHECK(worst < 50 * g.dt());
}

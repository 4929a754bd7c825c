#include "mslab/energy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "json.hpp"
#include "mslab/errors.hpp"
#include "parallel.hpp"

namespace mslab {

namespace {

void open_csv(std::ofstream& out, const std::string& file) {
  out.open(file);
  if (!out) throw Error("cannot open " + file);
  out << std::setprecision(17);
}

}  // namespace

void EnergyLedger::write_csv(const std::string& file) const {
  std::ofstream out;
  open_csv(out, file);
  out << "step,t,lhs,drift_term,ito_correction,phi_term,martingale_term,residual\n";
  for (std::size_t m = 0; m < times.size(); ++m)
    out << m << ',' << times[m] << ',' << lhs[m] << ',' << drift_term[m] << ',' << ito_correction[m]
        << ',' << phi_term[m] << ',' << martingale_term[m] << ',' << residual[m] << '\n';
}

EnergyLedger ito_residual(const PathState& path, const TimeBasis& basis, const StefanModel& model) {
  const GramPath& gram = basis.gram();
  const int M = static_cast<int>(path.coords.rows()) - 1;
  if (M != gram.M()) throw DimensionError("path length does not match the time grid");
  const double dt = gram.dt();
  EnergyLedger L;
  double drift = 0, ito = 0, phi = 0, mart = 0;
  Vec x = path.coords.row(0).transpose();
  const double lhs0 = x.dot(basis.G(0) * x);
  for (int m = 0; m <= M; ++m) {
    x = path.coords.row(m).transpose();
    const double lhs = x.dot(basis.G(m) * x);
    L.times.push_back(gram.time(m));
    L.lhs.push_back(lhs);
    L.drift_term.push_back(drift);
    L.ito_correction.push_back(ito);
    L.phi_term.push_back(phi);
    L.martingale_term.push_back(mart);
    L.residual.push_back(lhs - lhs0 - (drift + ito + phi + mart));
    if (m == M) break;
    const SdeCoefficients c = sde_coefficients(basis, model, m, x);
    const Vec Gx = basis.G(m) * x;
    drift += 2 * c.a.dot(Gx) * dt;
    ito += (c.b.transpose() * basis.G(m) * c.b).trace() * dt;
    phi += 0.5 * x.dot((basis.Gdot(m) + basis.Gdot(m + 1)) * x) * dt;
    if (c.b.cols() > 0) mart += 2 * Gx.dot(c.b * path.increments.row(m).transpose());
  }
  return L;
}

std::string EnsembleResidual::to_json() const {
  return nlohmann::json{{"paths", paths},
                        {"failed", failed},
                        {"mean_abs_residual", mean_abs_residual},
                        {"stderr_abs_residual", stderr_abs_residual},
                        {"martingale_mean", martingale_mean},
                        {"martingale_stderr", martingale_stderr}}
      .dump(2);
}

EnsembleResidual ito_ensemble(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                              int paths, std::uint64_t master_seed, int threads) {
  std::vector<double> res(paths, 0), mart(paths, 0);
  std::vector<char> ok(paths, 1);
  detail::parallel_for(paths, threads, [&](int i) {
    try {
      const PathState p = simulate_path(basis, model, x0, path_seed(master_seed, i));
      const EnergyLedger L = ito_residual(p, basis, model);
      res[i] = std::abs(L.residual.back());
      mart[i] = L.martingale_term.back();
    } catch (const BlowUpError&) {
      ok[i] = 0;
    }
  });
  EnsembleResidual r;
  r.paths = paths;
  std::vector<double> a, b;
  for (int i = 0; i < paths; ++i) {
    if (!ok[i]) {
      ++r.failed;
      continue;
    }
    a.push_back(res[i]);
    b.push_back(mart[i]);
  }
  const auto ma = detail::mean_stderr(a), mb = detail::mean_stderr(b);
  r.mean_abs_residual = ma.mean;
  r.stderr_abs_residual = ma.stderr;
  r.martingale_mean = mb.mean;
  r.martingale_stderr = mb.stderr;
  return r;
}

std::vector<double> gronwall_functional(const PathState& X, const PathState& Y,
                                        const TimeBasis& basis, const StefanModel& model) {
  if (X.coords.rows() != Y.coords.rows() || X.coords.cols() != Y.coords.cols())
    throw DimensionError("coupled paths must have the same shape");
  const GramPath& gram = basis.gram();
  const double f = model.noise().f_bound;
  const double c1 = basis.c1_sq();
  std::vector<double> out;
  double psi = 0;
  double rate_prev = f + c1 * basis.phi_norm(0);
  for (int m = 0; m < X.coords.rows(); ++m) {
    if (m > 0) {
      const double rate = f + c1 * basis.phi_norm(m);
      psi += 0.5 * gram.dt() * (rate_prev + rate);
      rate_prev = rate;
    }
    const Vec d = (X.coords.row(m) - Y.coords.row(m)).transpose();
    out.push_back(std::exp(-psi) * d.dot(basis.G(m) * d));
  }
  return out;
}

GronwallTrend gronwall_ensemble(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                                const Vec& y0, int paths, std::uint64_t master_seed, int threads) {
  const GramPath& gram = basis.gram();
  const int M = gram.M();
  std::vector<std::vector<double>> values(paths);
  detail::parallel_for(paths, threads, [&](int i) {
    const std::uint64_t seed = path_seed(master_seed, i);
    const Mat dB = brownian_increments(seed, M, model.noise().K(), gram.dt());
    try {
      values[i] = gronwall_functional(simulate_path(basis, model, x0, dB, seed),
                                      simulate_path(basis, model, y0, dB, seed), basis, model);
    } catch (const BlowUpError&) {
      values[i].clear();
    }
  });
  GronwallTrend g;
  for (int m = 0; m <= M; ++m) {
    std::vector<double> v;
    for (const auto& row : values)
      if (!row.empty()) v.push_back(row[m]);
    const auto me = detail::mean_stderr(v);
    g.mean.push_back(me.mean);
    g.stderr.push_back(me.stderr);
  }
  g.max_increase_in_stderr = -std::numeric_limits<double>::infinity();
  for (int m = 0; m < M; ++m) {
    const double se = std::hypot(g.stderr[m], g.stderr[m + 1]);
    const double inc = g.mean[m + 1] - g.mean[m];
    g.max_increase_in_stderr =
        std::max(g.max_increase_in_stderr, se > 0 ? inc / se : (inc > 0 ? inc * 1e300 : inc));
  }
  return g;
}

std::vector<Tensor2> deformation_tensor(const SurfaceGrid& grid) {
  const Field2 gx = tangential_gradient(grid, grid.velocity.col(0));
  const Field2 gy = tangential_gradient(grid, grid.velocity.col(1));
  std::vector<Tensor2> out(grid.N);
  for (int j = 0; j < grid.N; ++j) {
    // grad(i, k) = (∇_Γ)_i v_k
    const double g00 = gx(j, 0), g01 = gy(j, 0), g10 = gx(j, 1), g11 = gy(j, 1);
    const double div = g00 + g11;
    const double d01 = 0.5 * (g01 + g10);
    out[j] = {div - 2 * g00, -2 * d01, -2 * d01, div - 2 * g11};
  }
  return out;
}

double deformation_integral(const SurfaceGrid& grid, const Vec& w) {
  const std::vector<Tensor2> B = deformation_tensor(grid);
  const Field2 gw = tangential_gradient(grid, w);
  Vec dens(grid.N);
  for (int j = 0; j < grid.N; ++j) {
    const double a = gw(j, 0), b = gw(j, 1);
    const Tensor2& T = B[j];
    dens[j] = a * (T[0] * a + T[1] * b) + b * (T[2] * a + T[3] * b);
  }
  return surface_integral(grid, dens);
}

void TransportLedger::write_csv(const std::string& file) const {
  std::ofstream out;
  open_csv(out, file);
  out << "step,t,lhs,drift_term,noise_term,martingale_term,deformation_term,residual,phi_abstract,"
         "phi_tensor\n";
  for (std::size_t m = 0; m < times.size(); ++m) {
    out << m << ',' << times[m] << ',' << lhs[m] << ',' << drift_term[m] << ',' << noise_term[m]
        << ',' << martingale_term[m] << ',' << deformation_term[m] << ',' << residual[m] << ',';
    if (m < phi_abstract.size()) out << phi_abstract[m] << ',' << phi_tensor[m];
    else out << ',';
    out << '\n';
  }
}

TransportLedger stochastic_transport_residual(const PathState& path, const TimeBasis& basis,
                                              const StefanModel& model) {
  const GramPath& gram = basis.gram();
  const int M = static_cast<int>(path.coords.rows()) - 1;
  if (M != gram.M()) throw DimensionError("path length does not match the time grid");
  const double dt = gram.dt();
  const Mat& E = basis.seed();
  const Vec& m0 = gram.mass0();
  TransportLedger L;
  double drift = 0, noise = 0, mart = 0, deform = 0, lhs0 = 0;
  auto rel = [](double a, double b) { return std::abs(a - b) / (1 + std::abs(b)); };
  for (int m = 0; m <= M; ++m) {
    const SurfaceGrid& g = gram.grid(m);
    const Vec x = path.coords.row(m).transpose();
    const Vec Y = E * x;
    const Vec X = Y.cwiseQuotient(g.rn_derivative);
    // Ḣ⁻¹(Γ_s) inner product through the native stiffness of Γ_s
    const Vec ms = mass_diagonal(g);
    const Mat Kg = bordered_pseudo_inverse(laplace_beltrami_matrix(g), ms);
    auto inner = [&](const Vec& a, const Vec& b) {
      return ms.cwiseProduct(a).dot(Kg * ms.cwiseProduct(b));
    };
    const double lhs = inner(X, X);
    if (m == 0) lhs0 = lhs;
    L.max_frame_mismatch = std::max(L.max_frame_mismatch, rel(lhs, x.dot(basis.G(m) * x)));
    L.times.push_back(gram.time(m));
    L.lhs.push_back(lhs);
    L.drift_term.push_back(drift);
    L.noise_term.push_back(noise);
    L.martingale_term.push_back(mart);
    L.deformation_term.push_back(deform);
    L.residual.push_back(lhs - lhs0 - (drift + noise + mart + deform));
    if (m == M) break;

    Vec psiX(X.size());
    for (int j = 0; j < X.size(); ++j) psiX[j] = model.psi(X[j]);
    const double drift_s = -2 * surface_integral(g, psiX.cwiseProduct(X));
    const double drift_0 = -2 * drift_density(gram, model, gram.time(m), Y).dot(m0.cwiseProduct(Y));
    L.max_frame_mismatch = std::max(L.max_frame_mismatch, rel(drift_s, drift_0));
    drift += drift_s * dt;

    const SdeCoefficients c = sde_coefficients(basis, model, m, x);
    double qv = 0;
    Vec dW = Vec::Zero(Y.size());
    for (int k = 0; k < c.b.cols(); ++k) {
      const Vec sk = (E * c.b.col(k)).cwiseQuotient(g.rn_derivative);
      qv += inner(sk, sk);
      dW += sk * path.increments(m, k);
    }
    L.max_frame_mismatch =
        std::max(L.max_frame_mismatch, rel(qv, (c.b.transpose() * basis.G(m) * c.b).trace()));
    noise += qv * dt;
    mart += 2 * inner(X, dW);

    const Vec w = gram.node(m)->K * m0.cwiseProduct(Y);
    const double tensor = -deformation_integral(g, w);
    const double abstract = Y.dot(phi_form(gram, gram.time(m)) * Y);
    L.phi_tensor.push_back(tensor);
    L.phi_abstract.push_back(abstract);
    L.max_phi_mismatch = std::max(L.max_phi_mismatch, rel(tensor, abstract));
    deform += tensor * dt;
  }
  return L;
}

}  // namespace mslab

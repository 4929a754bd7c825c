#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mslab/galerkin.hpp"

namespace mslab {

/// Discrete Itô ledger for |X_t|_t² along one Euler–Maruyama path. Terms are
/// cumulative sums over steps 0..m−1, evaluated at the left endpoint with the
/// stored increments; the Φ term uses the trapezoid of Ġ at the left state.
struct EnergyLedger {
  std::vector<double> times;
  std::vector<double> lhs;              // |X_{t_m}|²_{t_m}
  std::vector<double> drift_term;       // Σ 2 (A, X)_t Δt
  std::vector<double> ito_correction;   // Σ Σ_k |σ_k|_t² Δt
  std::vector<double> phi_term;         // Σ (X, Φ X)_0 Δt
  std::vector<double> martingale_term;  // Σ 2 (X, σ ΔB)_t
  std::vector<double> residual;
  void write_csv(const std::string& file) const;
};

EnergyLedger ito_residual(const PathState& path, const TimeBasis& basis, const StefanModel& model);

struct EnsembleResidual {
  int paths = 0;
  int failed = 0;
  double mean_abs_residual = 0;  // E|residual(T)|
  double stderr_abs_residual = 0;
  double martingale_mean = 0;    // E[martingale_term(T)]
  double martingale_stderr = 0;
  std::string to_json() const;
};

EnsembleResidual ito_ensemble(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                              int paths, std::uint64_t master_seed, int threads = 1);

/// e^{−Ψ(t_m)} |X_{t_m} − Y_{t_m}|²_{t_m} with Ψ(t) = ∫_0^t (f + c₁² ‖Φ(s)‖) ds by
/// the trapezoid rule over the nodes.
std::vector<double> gronwall_functional(const PathState& X, const PathState& Y,
                                        const TimeBasis& basis, const StefanModel& model);

struct GronwallTrend {
  std::vector<double> mean;
  std::vector<double> stderr;
  double max_increase_in_stderr = 0;  // max_m (mean_{m+1} − mean_m) / combined stderr
};

/// Ensemble of coupled pairs (same increments) started from x0 and y0.
GronwallTrend gronwall_ensemble(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                                const Vec& y0, int paths, std::uint64_t master_seed,
                                int threads = 1);

using Tensor2 = std::array<double, 4>;  // row-major 2×2

/// 𝓑 = (∇_Γ·v) I − 2 D, D the symmetrized tangential gradient of the velocity.
std::vector<Tensor2> deformation_tensor(const SurfaceGrid& grid);

/// ∫_{Γ} 𝓑 ∇w · ∇w dvol on the grid.
double deformation_integral(const SurfaceGrid& grid, const Vec& w);

/// Energy balance evaluated on the moving curve Γ_s. Cumulative terms use
/// left-endpoint evaluation; X_s = Y_s / rn is the density on Γ_s.
struct TransportLedger {
  std::vector<double> times;
  std::vector<double> lhs;          // ‖X_t‖²_{Ḣ⁻¹(Γ_t)}
  std::vector<double> drift_term;   // −2 Σ ∫_{Γ_s} Ψ(X) X dvol Δs
  std::vector<double> noise_term;   // Σ Σ_k ‖σ_k‖²_{Ḣ⁻¹(Γ_s)} Δs
  std::vector<double> martingale_term;
  std::vector<double> deformation_term;  // −Σ ∫_{Γ_s} 𝓑 ∇w·∇w dvol Δs
  std::vector<double> residual;
  std::vector<double> phi_abstract;  // (Φ(s) Y, Y)_0 per step
  std::vector<double> phi_tensor;    // −∫ 𝓑 ∇w·∇w per step
  double max_phi_mismatch = 0;       // max |abstract − tensor| / (1 + |abstract|)
  double max_frame_mismatch = 0;     // Γ_s terms against their Γ_0 pullbacks
  void write_csv(const std::string& file) const;
};

TransportLedger stochastic_transport_residual(const PathState& path, const TimeBasis& basis,
                                              const StefanModel& model);

}  // namespace mslab

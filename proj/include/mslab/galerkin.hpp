#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mslab/operators.hpp"

namespace mslab {

/// Upper-triangular T with Tᵀ G T = I from classical Gram–Schmidt (two passes)
/// in the inner product with Gram matrix G. Throws RankDeficiencyError when a
/// pivot falls below 1e-12 of the leading norm.
Mat gram_schmidt_coefficients(const Mat& G);

/// e_i(t) for the columns of `seed`, orthonormalized in (·,·)_t.
Mat gram_schmidt(const GramPath& gram, const Mat& seed, double t);

/// Galerkin tables at every time node. Coordinates x refer to the seed basis E,
/// so the field is u = E x and |u|_t² = xᵀ G(t) x.
class TimeBasis {
 public:
  TimeBasis(const GramPath& gram, Mat seed);
  /// Default seed: the (·,·)_0-orthonormal Fourier basis of size n.
  TimeBasis(const GramPath& gram, int n);

  const GramPath& gram() const { return *gram_; }
  int n() const { return static_cast<int>(seed_.cols()); }
  int steps() const { return static_cast<int>(G_.size()) - 1; }
  const Mat& seed() const { return seed_; }

  /// (e_i, e_j)_{t_m} for the seed vectors.
  const Mat& G(int m) const { return G_.at(m); }
  const Mat& Ginv(int m) const { return Ginv_.at(m); }
  /// d/dt (e_i, e_j)_t at t_m, equal to (e_i, Φ(t_m) e_j)_0.
  const Mat& Gdot(int m) const { return Gdot_.at(m); }
  /// Gram–Schmidt coefficients: e_i(t_m) = Σ_k E_k T(m)_{ki}.
  const Mat& T(int m) const { return T_.at(m); }
  /// e_i(t_m) as grid functions.
  Mat node_basis(int m) const { return seed_ * T_.at(m); }

  /// ‖Φ(t_m)‖ restricted to the seed span, in (·,·)_0.
  double phi_norm(int m) const;
  /// max_m max(λmax G(t_m), 1/λmin G(t_m)), a c₁² estimate on the span.
  double c1_sq() const;

  /// Leading n' seed vectors with G, Ġ blocks reused and inverses recomputed.
  TimeBasis truncate(int n_new) const;

 private:
  TimeBasis() = default;
  const GramPath* gram_ = nullptr;
  Mat seed_;
  std::vector<Mat> G_, Ginv_, Gdot_, T_;
};

/// Σ_i (u, e_i(t))_t e_i(t); for non-node t the tables are computed on the fly.
Vec projection_Pn(const TimeBasis& basis, double t, const Vec& u);

struct SdeCoefficients {
  Vec a;  // drift, length n
  Mat b;  // diffusion, n × K
};

/// Coefficients of dx = a dt + b dB in seed coordinates at node m:
///   G a = [⟨Ã(t, Ex), e_j⟩]_j, G b_{·k} = [(σ_k(t, Ex), e_j)_t]_j.
/// Noise is truncated to the span: columns k ≥ n of b vanish.
SdeCoefficients sde_coefficients(const TimeBasis& basis, const StefanModel& model, int m,
                                 const Vec& x);

/// Blow-up guard on |x|.
inline constexpr double kBlowUp = 1e8;

struct PathState {
  Mat coords;      // (steps + 1) × n
  Mat increments;  // steps × K, N(0, Δt) entries
  std::uint64_t rng_seed = 0;
  double max_mean_drift = 0;  // max_m |Γ_0-mean of E x_m|
};

/// steps × K independent N(0, dt) increments from the given seed.
Mat brownian_increments(std::uint64_t seed, int steps, int K, double dt);

/// Explicit Euler–Maruyama. Throws BlowUpError with the step index on
/// non-finite or oversized state.
PathState simulate_path(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                        std::uint64_t rng_seed);
PathState simulate_path(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                        const Mat& increments, std::uint64_t rng_seed = 0);

/// Seed of path i derived from a master seed (splitmix64).
std::uint64_t path_seed(std::uint64_t master, std::uint64_t index);

/// Trajectory CSV with columns step, t, x_1..x_n, norm_t.
void write_trajectory_csv(const TimeBasis& basis, const PathState& path, const std::string& file);

struct MomentEstimate {
  int n = 0;
  int steps = 0;
  int paths = 0;
  int failed = 0;
  double moment_p = 2;
  double sup_estimate = 0;   // E[sup_t |X_t|_t^p]
  double sup_stderr = 0;
  double v_estimate = 0;     // E[(∫ ‖X_t‖_{L^α}^α dt)^{p/2}]
  double v_stderr = 0;
  double max_mean_drift = 0;
  std::string to_json() const;
};

/// Runs `paths` independent paths (seeds path_seed(master, i)) and reduces in
/// path order. threads > 1 simulates paths concurrently.
MomentEstimate moment_estimate(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                               int paths, std::uint64_t master_seed, double p = 2,
                               int threads = 1);

struct CauchyRow {
  int n = 0;
  double d = 0;       // E[sup_m |X^{2n} − X^n|²_{t_m}]^{1/2}
  double stderr = 0;  // of the mean inside the square root
  int failed = 0;
};

/// Coupled-noise Cauchy distances. `basis` must hold at least 2 max(n_list)
/// vectors; x0 is given in its coordinates and truncated for each n.
std::vector<CauchyRow> galerkin_convergence(const TimeBasis& basis, const StefanModel& model,
                                            const Vec& x0, const std::vector<int>& n_list,
                                            int paths, std::uint64_t master_seed,
                                            int threads = 1);

struct UniquenessReport {
  double max_deviation = 0;  // max_m |X_{t_m} − Y_{t_m}|_{t_m}
  double initial_gap_sq = 0;
  std::vector<double> gap_sq;  // |X_{t_m} − Y_{t_m}|²_{t_m}
};

/// Runs the two inputs through independently assembled tables (a fresh
/// GramPath and TimeBasis for y) with the same noise increments.
UniquenessReport pathwise_uniqueness_check(const TimeBasis& basis, const StefanModel& model,
                                           const Vec& x0, const Vec& y0, std::uint64_t rng_seed);

}  // namespace mslab

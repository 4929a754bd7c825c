#pragma once

#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <random>
#include <unordered_map>

#include "mslab/geometry.hpp"

namespace mslab {

/// Stiffness S(t), its rate Ṡ(t) and the constrained pseudo-inverse K(t) at one time.
/// K is the leading block of the inverse of the bordered matrix
/// [[S, M0·1], [(M0·1)ᵀ, 0]], so u = K M0 f is the Γ_0-mean-zero solution of S u = M0 f.
struct NodeOperators {
  double t = 0;
  Mat S;
  Mat Sdot;
  Mat K;
};

/// Leading block of the inverse of [[S, m], [mᵀ, 0]], symmetrized.
Mat bordered_pseudo_inverse(const Mat& S, const Vec& m);

NodeOperators assemble_node(const SurfaceGrid& grid, const Vec& mass0);

/// Time tables realizing (·,·)_t on the discrete pivot space of zero-mean grid
/// functions. A grid function f stands for the functional v ↦ fᵀ M0 v.
/// Per-node grids are stored; the dense N×N operators are built on demand and
/// kept in a bounded cache, so long horizons do not need M·N² memory.
class GramPath {
 public:
  GramPath(MovingCurve curve, int M, std::size_t cache_bytes = std::size_t{256} << 20);

  const MovingCurve& curve() const { return curve_; }
  int N() const { return curve_.n_grid(); }
  int M() const { return M_; }
  double T() const { return curve_.horizon(); }
  double dt() const { return T() / M_; }
  double time(int m) const { return T() * m / M_; }

  const SurfaceGrid& grid(int m) const { return grids_.at(m); }
  const Vec& mass0() const { return mass0_; }
  double volume0() const { return mass0_.sum(); }

  std::shared_ptr<const NodeOperators> node(int m) const;
  /// Node operators at an arbitrary time (cached only when t is a node).
  std::shared_ptr<const NodeOperators> at(double t) const;
  /// Index of the node equal to t, or −1.
  int node_index(double t) const;

  double mean0(const Vec& f) const;
  Vec project_zero_mean(const Vec& f) const;
  Mat zero_mean_projector() const;
  /// Throws ZeroMeanViolation when the Γ_0-mean of f exceeds 1e-10 (scaled by ‖f‖∞).
  void require_zero_mean(const Vec& f) const;

 private:
  MovingCurve curve_;
  int M_;
  std::vector<SurfaceGrid> grids_;
  Vec mass0_;
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::list<int> lru_;
  mutable std::unordered_map<int, std::pair<std::shared_ptr<const NodeOperators>,
                                            std::list<int>::iterator>>
      cache_;
};

double hminus_inner(const GramPath& gram, double t, const Vec& f, const Vec& g);
Vec riesz_solve(const GramPath& gram, double t, const Vec& f);
/// ι*_t f = M0⁻¹ S(0) K(t) M0 f.
Vec iota_star(const GramPath& gram, double t, const Vec& f);
/// ι*_{−t} f = M0⁻¹ S(t) K(0) M0 f, the inverse of ι*_t on zero-mean functions.
Vec iota_star_inverse(const GramPath& gram, double t, const Vec& f);
/// Matrix of Φ(t) = −M0⁻¹ S(0) K(t) Ṡ(t) K(t) M0.
Mat phi_operator(const GramPath& gram, double t);
/// Symmetric matrix B(t) with (f, Φ(t) g)_0 = fᵀ B g, i.e. −M0 K Ṡ K M0,
/// explicitly symmetrized.
Mat phi_form(const GramPath& gram, double t);
/// Matrix of the (·,·)_0 inner product, M0 K(0) M0.
Mat inner0_matrix(const GramPath& gram);
/// Operator norm in (·,·)_0 of a linear map on zero-mean grid functions.
double operator_norm0(const GramPath& gram, const Mat& L);

/// Ḣ⁻¹ norm squared of a zero-mean density f on a static grid, solved on that grid.
double hminus_norm_sq_on_grid(const SurfaceGrid& grid, const Vec& f);
/// f̃^{t,*}: the reference-frame representative of a density on Γ_t.
Vec pull_back_density(const SurfaceGrid& grid_t, const Vec& f_t);

/// Zero-mean smooth random field: Fourier modes up to kmax with N(0, k^{-decay})
/// coefficients, projected to Γ_0-mean zero.
Vec random_smooth_field(const GramPath& gram, std::mt19937_64& rng, int kmax, double decay = 1.0);

/// First n Fourier modes cos θ, sin θ, cos 2θ, … made Γ_0-mean-zero and
/// Gram–Schmidt orthonormalized in (·,·)_0. Bases are nested in n.
Mat fourier_seed_basis(const GramPath& gram, int n);

struct C1Report {
  double c1 = 1;
  double t_worst = 0;
};
C1Report check_C1(const GramPath& gram, int samples = 200, std::uint64_t seed = 1);

struct C2Report {
  double max_residual = 0;
  Vec per_node;  // max over samples at each node
};
C2Report check_C2(const GramPath& gram, int samples = 20, std::uint64_t seed = 2);

struct C3C4Report {
  double c2 = 1;  // sup ‖ι*_t f‖_{L^p} / ‖f‖_{L^p}
  double c3 = 1;  // sup ‖ι*_{−t} f‖_{L^p} / ‖f‖_{L^p}
  double inverse_pair_residual = 0;  // sup ‖ι*_{−t} ι*_t f − f‖_0 / ‖f‖_0
};
C3C4Report check_C3_C4(const GramPath& gram, double p, int samples = 50, std::uint64_t seed = 3);

double lp_norm0(const GramPath& gram, const Vec& f, double p);

/// max over random x, y of |(ι*_{−t}x, y)_0 − (x, y)_0 + ∫_0^t (ι*_{−s}Φ(s)ι*_{−s}x, y)_0 ds|,
/// trapezoid in s over the nodes up to t (which must be a node).
double inverse_identity_residual(const GramPath& gram, double t, int samples = 10,
                                 std::uint64_t seed = 4);

}  // namespace mslab

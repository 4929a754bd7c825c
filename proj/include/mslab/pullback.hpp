#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mslab/geometry.hpp"

namespace mslab {

/// Forward map r(t, ·) of the reference interval (0, 1) with analytic
/// derivatives. The inverse uses the analytic formula when given and a
/// safeguarded Newton iteration otherwise.
class DomainMap {
 public:
  using Fn = std::function<double(double, double)>;
  DomainMap(std::string name, Fn r, Fn r_t, Fn r_y, Fn r_yy, double horizon, Fn r_bar = nullptr);

  /// r(t, y) = (1 + rate t) y.
  static DomainMap dilation(double rate, double horizon);
  /// r(t, y) = y + amplitude t y (1 − y); requires amplitude · horizon < 1.
  static DomainMap bump(double amplitude, double horizon);
  static DomainMap identity(double horizon);
  /// Family by name ("dilation" {rate}, "bump" {amplitude}, "identity").
  static DomainMap by_name(const std::string& family, const std::map<std::string, double>& params,
                           double horizon);

  const std::string& name() const { return name_; }
  double horizon() const { return horizon_; }
  double r(double t, double y) const { return r_(t, y); }
  double r_t(double t, double y) const { return r_t_(t, y); }
  double r_y(double t, double y) const { return r_y_(t, y); }
  double r_yy(double t, double y) const { return r_yy_(t, y); }
  double r_bar(double t, double x) const;

  /// Throws DiffeomorphismError unless r(0,·) = id, ∂_y r > 0 and r̄ inverts r
  /// on a sample grid.
  void check_invariants(int samples = 33) const;

 private:
  std::string name_;
  Fn r_, r_t_, r_y_, r_yy_, r_bar_;
  double horizon_;
};

struct TransformedCoefficients {
  double a11 = 1;  // (∂_x r̄)²
  double b1 = 0;   // −∂_y a11 + ∂²_x r̄
  double b2 = 0;   // ∂_t r̄
};

/// All three evaluated at x = r(t, y). Throws DiffeomorphismError when ∂_y r ≤ 0.
TransformedCoefficients transformed_coefficients(const DomainMap& map, double t, double y);

/// Tridiagonal matrix on the interior nodes 1..n−1 of a uniform mesh.
struct Tridiag {
  Vec lower, diag, upper;  // lower[0] and upper[last] unused
  int size() const { return static_cast<int>(diag.size()); }
  Vec apply(const Vec& v) const;
  Mat dense() const;
};

/// Solves (I − c A) x = rhs, or more generally (D − c A) x = rhs with D diagonal, by the
/// Thomas algorithm. Throws NumericError on a vanishing pivot.
Vec solve_shifted(const Vec& D, double c, const Tridiag& A, const Vec& rhs);

struct PullbackOperators {
  Tridiag diffusion;  // v ↦ (a11 v_y)_y, symmetric
  Tridiag A1;         // diffusion + b¹ ∂_y (centered)
  Tridiag A2;         // b² ∂_y (centered)
};

/// Mesh: `cells` uniform cells on (0, 1), homogeneous Dirichlet ends.
PullbackOperators assemble_A1_A2(const DomainMap& map, double t, int cells);

/// ι*_t of the flat example: multiplication by |∂_y r(t, ·)| at the interior nodes.
Vec flat_iota_star(const DomainMap& map, double t, int cells);

struct Trajectory {
  std::vector<double> times;
  Vec y;       // reference nodes 0..cells
  Mat values;  // (steps + 1) × (cells + 1), boundary values included
  /// Long-format CSV: t, y, x, value.
  void write_csv(const std::string& file, const DomainMap& map) const;
};

/// Semi-implicit stepping of dv = A₁v − A₂v: implicit diffusion, explicit
/// advection. The minus sign follows the chain rule for v = u∘r. Enforces the
/// CFL guard dt ≤ h / max|b²|.
Trajectory solve_fixed_domain(const DomainMap& map, int cells, double dt, const Vec& v0, double T);

/// Lumped-mass P1 ALE scheme on the grid x_i = r(t, y_i) moving with the map:
/// M^{n+1}U^{n+1} − M^n U^n = dt (−K^{n+1}U^{n+1} + C^n U^n).
Trajectory solve_moving_reference(const DomainMap& map, int cells, double dt, const Vec& u0, double T);

/// Samples f at the mesh nodes, zeroing the ends.
Vec mesh_function(int cells, const std::function<double(double)>& f);

/// ‖u‖²_{L²(O_t)} with the lumped physical mass at time t.
double physical_l2_sq(const DomainMap& map, double t, const Vec& u);

struct EquivalenceRow {
  double h = 0;
  double dt = 0;
  double sup_error = 0;
  double rate = 0;  // log2 of the error ratio to the previous row; 0 on the first row
};

/// Pulled-back moving-grid solution against the fixed-domain solution at T,
/// refining with dt = dt_factor · h².
std::vector<EquivalenceRow> pullback_equivalence(const DomainMap& map,
                                                 const std::function<double(double)>& u0,
                                                 const std::vector<int>& cells, double dt_factor,
                                                 double T);
std::string equivalence_json(const std::vector<EquivalenceRow>& rows);

}  // namespace mslab

#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace mslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Field2 = Eigen::MatrixX2d;  // per-node planar vectors, one row per node

/// Position of Γ_t in the chart together with the derivatives the calculus needs.
struct CurveJet {
  Vec2 x = Vec2::Zero();
  Vec2 x_th = Vec2::Zero();
  Vec2 x_thth = Vec2::Zero();
  Vec2 x_t = Vec2::Zero();
  Vec2 x_tth = Vec2::Zero();
};

/// Closed curve Γ_t = G(t, Γ_0) carried by a prescribed flow over a periodic chart.
class MovingCurve {
 public:
  using ChartFn = std::function<Vec2(double theta)>;
  /// Evaluates X^t(θ) = G(t, X(θ)) and its derivatives. When `analytic_time` is
  /// false only x, x_th and x_thth are trusted and time derivatives are
  /// replaced by central differences with step dt_geom.
  using JetFn = std::function<CurveJet(double t, double theta)>;

  MovingCurve(std::string family, ChartFn reference, JetFn flow, double horizon, int n_grid,
              bool analytic_time = true, double dt_geom = 1e-5);

  const std::string& family() const { return family_; }
  double horizon() const { return horizon_; }
  int n_grid() const { return n_grid_; }
  double dt_geom() const { return dt_geom_; }
  bool analytic_time() const { return analytic_time_; }

  Vec2 reference(double theta) const { return reference_(theta); }
  CurveJet jet(double t, double theta) const;
  Vec2 position(double t, double theta) const { return flow_(t, theta).x; }

  /// Copy with a different grid size or horizon.
  MovingCurve with_grid(int n_grid) const;
  MovingCurve with_horizon(double horizon) const;
  /// Frozen copy of Γ_t used as a static reference curve (zero velocity).
  MovingCurve snapshot(double t) const;

  /// Checks G(0,·) = chart, immersion at `time_samples` times and periodicity.
  /// Throws GeometryDegenerateError or NumericError.
  void check_invariants(int time_samples = 5) const;

 private:
  std::string family_;
  ChartFn reference_;
  JetFn flow_;
  double horizon_;
  int n_grid_;
  bool analytic_time_;
  double dt_geom_;
};

enum class RadiusProfile { Linear, Exponential };

/// R(t) = R0 (1 + rate t) or R0 e^{rate t}; rate = 0 gives a static circle.
MovingCurve dilating_circle(double R0, double rate, double horizon, int n_grid,
                            RadiusProfile profile = RadiusProfile::Linear);
/// a(t) = a0 (1 + A sin 2πft), b(t) = b0 (1 − A sin 2πft).
MovingCurve oscillating_ellipse(double a0, double b0, double amplitude, double frequency,
                                double horizon, int n_grid);

/// One row of a Fourier flow table: component (0 = x, 1 = y) gains
/// (c0 + c1 t) cos kθ + (s0 + s1 t) sin kθ.
struct FourierTerm {
  int component = 0;
  int k = 0;
  double c0 = 0, s0 = 0, c1 = 0, s1 = 0;
};
MovingCurve custom_fourier(std::vector<FourierTerm> terms, double horizon, int n_grid);

struct SurfaceGrid {
  double t = 0;
  int N = 0;
  Vec theta;
  Field2 x;        // X^t(θ_j)
  Field2 x_th;     // ∂_θ X^t
  Field2 x_tth;    // ∂_t ∂_θ X^t
  Vec g11;         // |∂_θ X^t|²
  Vec sqrt_g;
  Vec rn_derivative;  // √(g^t / g^0)
  Field2 velocity;    // ∂_t G composed with the chart
  double h() const;
};

constexpr double kDegenerateMetric = 1e-10;

SurfaceGrid build_grid(const MovingCurve& curve, double t);

/// Writes theta, g11, sqrt_g, rn_derivative, vx, vy.
void write_grid_csv(const SurfaceGrid& grid, const std::string& path);

/// Dense Fourier differentiation matrix on N uniform periodic nodes (cached).
const Mat& spectral_diff_matrix(int N);
Vec spectral_derivative(const Vec& f);

double surface_integral(const SurfaceGrid& grid, const Vec& f);
Field2 tangential_gradient(const SurfaceGrid& grid, const Vec& f);
Vec tangential_divergence(const SurfaceGrid& grid, const Field2& w);

/// h Dᵀ diag(w) D plus the Nyquist energy h (N/2)² mean(w)/N ννᵀ with ν_j = (−1)^j,
/// so that the kernel is exactly the constants for even N.
Mat weighted_stiffness(const Vec& w);
/// Weak Laplace–Beltrami stiffness with weight g^{-1}√g = g^{-1/2}.
Mat laplace_beltrami_matrix(const SurfaceGrid& grid);
/// Diagonal of the lumped (exact for the trapezoid rule) mass matrix h√g.
Vec mass_diagonal(const SurfaceGrid& grid);
/// ∂_t of the stiffness weight, −g^{-3/2} (X_θ · X_θt).
Vec stiffness_weight_rate(const SurfaceGrid& grid);

/// Generalized eigenvalues of (S, M) in ascending order.
Vec laplace_spectrum(const SurfaceGrid& grid);
double poincare_constant(const SurfaceGrid& grid);

/// Ambient scalar field f(t, x). Derivatives are optional; missing ones are
/// replaced by differences along the flow.
struct AmbientField {
  std::function<double(double, const Vec2&)> value;
  std::function<double(double, const Vec2&)> dt;
  std::function<Vec2(double, const Vec2&)> grad;
};

Vec sample_field(const MovingCurve& curve, const AmbientField& f, double t);
Vec material_derivative(const MovingCurve& curve, const AmbientField& f, double t);

struct TransportResult {
  double residual = 0;
  double lhs = 0;  // d/dt ∫_{Γ_t} f by finite differences
  double rhs = 0;  // ∫_{Γ_t} (∂•f + f ∇_Γ·v)
  bool one_sided = false;  // central difference did not fit in [0, T]
};

TransportResult transport_residual(const MovingCurve& curve, const AmbientField& f, double t,
                                   double dt_fd);

}  // namespace mslab

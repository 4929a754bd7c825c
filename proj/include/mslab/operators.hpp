#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mslab/spaces.hpp"

namespace mslab {

struct StefanParams {
  double a = 1;
  double b = 1;
  double rho = 1;
};

/// β(r) = a r for r < 0, 0 on [0, ρ], b (r − ρ) for r > ρ.
double beta_eval(const StefanParams& p, double r);

enum class NoiseCoupling { Additive, LinearMultiplicative };

/// Truncated noise family σ_k, k = 1..K, diagonal in the seed basis φ_k:
///   additive:       σ_k(t, u) = γ_k φ_k
///   multiplicative: σ_k(t, u) = γ_k (u, φ_k)_t φ_k / |φ_k|_t²
/// The multiplicative family is Lipschitz in |·|_t with constant Σγ_k².
struct NoiseModel {
  NoiseCoupling coupling = NoiseCoupling::Additive;
  std::vector<double> gamma;
  double f_bound = 1;

  /// γ_k = γ0 k^{−decay}, k = 1..K.
  static NoiseModel spectrum(NoiseCoupling coupling, double gamma0, double decay, int K,
                             double f_bound = 1);
  int K() const { return static_cast<int>(gamma.size()); }
  double gamma_sq_sum() const;
};

enum class NonlinearityKind { Stefan, PorousMedia, LinearHeat, Custom };

class StefanModel {
 public:
  static StefanModel stefan(StefanParams params, NoiseModel noise = {});
  static StefanModel porous_media(double p, NoiseModel noise = {});
  static StefanModel linear_heat(NoiseModel noise = {});
  /// Arbitrary Ψ with a declared growth exponent; used to exercise failing checks.
  static StefanModel custom(std::function<double(double)> psi, double p_growth,
                            NoiseModel noise = {});

  NonlinearityKind kind() const { return kind_; }
  const StefanParams& stefan_params() const { return stefan_; }
  double exponent() const { return p_; }
  /// Exponent of the growth and coercivity conditions (Stefan and heat: 2).
  double p_growth() const;
  const NoiseModel& noise() const { return noise_; }
  StefanModel with_noise(NoiseModel noise) const;
  std::string name() const;

  double psi(double s) const;

 private:
  NonlinearityKind kind_ = NonlinearityKind::LinearHeat;
  StefanParams stefan_;
  double p_ = 2;
  std::function<double(double)> custom_;
  NoiseModel noise_;
};

double psi_eval(const StefanModel& model, double s);

struct PsiReport {
  bool psi1 = true, psi2 = true, psi3 = true, psi4 = true;
  double max_jump = 0;        // largest |Ψ(s+δ) − Ψ(s−δ)| relative to 1 + |Ψ(s)|
  double min_increment = 0;   // min (Ψ(r) − Ψ(s)) / (r − s) over adjacent samples
  double a = 0, c4 = 0;       // s Ψ(s) ≥ a |s|^p − c4
  double c5 = 0, c6 = 0;      // |Ψ(s)| ≤ c5 |s|^{p−1} + c6
  double witness_r = 0, witness_s = 0;  // a violating pair or point when a check fails
  std::string failure;
  bool all() const { return psi1 && psi2 && psi3 && psi4; }
};

/// Samples s on a log-spaced grid in [−1e4, 1e4] (plus 0 and the kinks).
PsiReport check_psi_conditions(const std::function<double(double)>& psi, double p,
                               int sample_count = 400, std::vector<double> extra_points = {});
PsiReport check_psi_conditions(const StefanModel& model, int sample_count = 400);

/// Ψ(u / rn_t), the L² density of −Ã(t, u) against dvol_{Γ_0}.
Vec drift_density(const GramPath& gram, const StefanModel& model, double t, const Vec& u);
/// ⟨Ã(t, u), v⟩ = −∫_{Γ_0} Ψ(u dvol_g/dvol_{g^t}) v dvol_{Γ_0}.
double drift_pairing(const GramPath& gram, const StefanModel& model, double t, const Vec& u,
                     const Vec& v);
/// The same pairing evaluated on Γ_t: −∫_{Γ_t} Ψ(u/rn)(v/rn) dvol_{g^t}.
double drift_pairing_moved(const GramPath& gram, const StefanModel& model, double t,
                           const Vec& u, const Vec& v);
/// H-representative of Ã(t, u): −M0⁻¹ S(0) Ψ(u/rn).
Vec drift_tilde(const GramPath& gram, const StefanModel& model, double t, const Vec& u);
/// A(t, u) = ι*_{−t} Ã(t, u) = −M0⁻¹ S(t) Ψ(u/rn).
Vec drift_A(const GramPath& gram, const StefanModel& model, double t, const Vec& u);

/// σ_k(t, u) for k = 1..K, with φ_k the columns of `seed`.
std::vector<Vec> noise_B(const GramPath& gram, const StefanModel& model, const Mat& seed,
                         double t, const Vec& u);

enum class HCondition { H1, H2, H3, H4, H5 };
std::string to_string(HCondition h);

struct HOptions {
  int samples = 100;
  std::vector<int> nodes;  // time nodes to sample; empty = 5 evenly spaced
  int kmax = 8;            // band limit of sampled fields
  double min_amplitude = 1e-1;
  double max_amplitude = 1e2;
  std::uint64_t seed = 42;
};

struct HReport {
  HCondition which = HCondition::H1;
  bool pass = true;
  double measured = 0;       // the fitted constant or the worst residual
  double monotone_max = 0;   // H2: largest 2⟨Ã(u) − Ã(v), u − v⟩
  std::vector<double> per_level;  // H1: max jump per λ-grid level
  std::vector<double> per_node;   // measured value at each sampled node
  std::string witness;
};

/// `seed` supplies the noise directions φ_k (at least K columns).
HReport verify_H(const GramPath& gram, const StefanModel& model, const Mat& seed, HCondition which,
                 const HOptions& opt = {});

/// V* norm lower bound: sup over a fixed 64-entry dictionary of unit L^p(Γ_0)
/// functions of |⟨Ã(t, u), w⟩|.
double dual_norm_lower_bound(const GramPath& gram, const StefanModel& model, double t,
                             const Vec& u);

}  // namespace mslab

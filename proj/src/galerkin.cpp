#include "mslab/galerkin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>

#include <Eigen/Eigenvalues>

#include "json.hpp"
#include "mslab/errors.hpp"
#include "parallel.hpp"

namespace mslab {

Mat gram_schmidt_coefficients(const Mat& G) {
  const int n = static_cast<int>(G.rows());
  Mat T = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    Vec v = Vec::Unit(n, i);
    const double lead = std::sqrt(G(i, i));
    for (int pass = 0; pass < 2; ++pass) {
      const Vec Gv = G * v;
      Vec c(i);
      for (int l = 0; l < i; ++l) c[l] = T.col(l).dot(Gv);
      for (int l = 0; l < i; ++l) v -= c[l] * T.col(l);
    }
    const double nv = std::sqrt(std::max(0.0, v.dot(G * v)));
    if (!(nv > 1e-12 * lead)) throw RankDeficiencyError("Gram-Schmidt pivot below 1e-12", i);
    T.col(i) = v / nv;
  }
  return T;
}

namespace {

Mat gram_at(const NodeOperators& op, const Mat& ME) {
  Mat G = ME.transpose() * op.K * ME;
  return 0.5 * (G + G.transpose());
}

Mat gram_rate_at(const NodeOperators& op, const Mat& ME) {
  const Mat Ebar = op.K * ME;
  Mat D = -(Ebar.transpose() * op.Sdot * Ebar);
  return 0.5 * (D + D.transpose());
}

Mat mass_times(const GramPath& gram, const Mat& E) { return gram.mass0().asDiagonal() * E; }

}  // namespace

Mat gram_schmidt(const GramPath& gram, const Mat& seed, double t) {
  for (int i = 0; i < seed.cols(); ++i) gram.require_zero_mean(seed.col(i));
  const Mat G = gram_at(*gram.at(t), mass_times(gram, seed));
  return seed * gram_schmidt_coefficients(G);
}

TimeBasis::TimeBasis(const GramPath& gram, Mat seed) : gram_(&gram), seed_(std::move(seed)) {
  if (seed_.rows() != gram.N() || seed_.cols() < 1)
    throw DimensionError("seed basis must be N × n with n ≥ 1");
  if (seed_.cols() > gram.N() / 2) throw DimensionError("n exceeds resolvable modes");
  for (int i = 0; i < seed_.cols(); ++i) gram.require_zero_mean(seed_.col(i));
  const Mat ME = mass_times(gram, seed_);
  const int M = gram.M();
  G_.resize(M + 1);
  Ginv_.resize(M + 1);
  Gdot_.resize(M + 1);
  T_.resize(M + 1);
  for (int m = 0; m <= M; ++m) {
    const auto op = gram.node(m);
    G_[m] = gram_at(*op, ME);
    Gdot_[m] = gram_rate_at(*op, ME);
    T_[m] = gram_schmidt_coefficients(G_[m]);
    Ginv_[m] = T_[m] * T_[m].transpose();
  }
}

TimeBasis::TimeBasis(const GramPath& gram, int n) : TimeBasis(gram, fourier_seed_basis(gram, n)) {}

double TimeBasis::phi_norm(int m) const {
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(Gdot_.at(m), G_.at(0));
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double TimeBasis::c1_sq() const {
  double c = 1;
  for (const Mat& G : G_) {
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(G, G_.front());
    c = std::max({c, es.eigenvalues().maxCoeff(), 1.0 / es.eigenvalues().minCoeff()});
  }
  return c;
}

TimeBasis TimeBasis::truncate(int n_new) const {
  if (n_new < 1 || n_new > n()) throw DimensionError("truncation size must lie in [1, n]");
  TimeBasis b;
  b.gram_ = gram_;
  b.seed_ = seed_.leftCols(n_new);
  for (std::size_t m = 0; m < G_.size(); ++m) {
    b.G_.push_back(G_[m].topLeftCorner(n_new, n_new));
    b.Gdot_.push_back(Gdot_[m].topLeftCorner(n_new, n_new));
    b.T_.push_back(gram_schmidt_coefficients(b.G_.back()));
    b.Ginv_.push_back(b.T_.back() * b.T_.back().transpose());
  }
  return b;
}

Vec projection_Pn(const TimeBasis& basis, double t, const Vec& u) {
  const GramPath& gram = basis.gram();
  gram.require_zero_mean(u);
  const Mat ME = mass_times(gram, basis.seed());
  const int m = gram.node_index(t);
  const auto op = gram.at(t);
  const Mat Ginv = m >= 0 ? basis.Ginv(m) : Mat(gram_at(*op, ME).inverse());
  const Vec c = ME.transpose() * (op->K * gram.mass0().cwiseProduct(u));
  return basis.seed() * (Ginv * c);
}

SdeCoefficients sde_coefficients(const TimeBasis& basis, const StefanModel& model, int m,
                                 const Vec& x) {
  const GramPath& gram = basis.gram();
  const int n = basis.n();
  if (x.size() != n) throw DimensionError("coordinate vector has the wrong length");
  const NoiseModel& nm = model.noise();
  const double t = gram.time(m);
  SdeCoefficients c;
  const Vec psi = drift_density(gram, model, t, basis.seed() * x);
  c.a = -(basis.Ginv(m) * (basis.seed().transpose() * gram.mass0().cwiseProduct(psi)));
  c.b = Mat::Zero(n, nm.K());
  if (nm.coupling == NoiseCoupling::Additive) {
    for (int k = 0; k < std::min(nm.K(), n); ++k) c.b(k, k) = nm.gamma[k];
  } else {
    const Vec Gx = basis.G(m) * x;
    for (int k = 0; k < std::min(nm.K(), n); ++k) c.b(k, k) = nm.gamma[k] * Gx[k] / basis.G(m)(k, k);
  }
  return c;
}

Mat brownian_increments(std::uint64_t seed, int steps, int K, double dt) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, std::sqrt(dt));
  Mat dB(steps, K);
  for (int m = 0; m < steps; ++m)
    for (int k = 0; k < K; ++k) dB(m, k) = nd(rng);
  return dB;
}

PathState simulate_path(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                        std::uint64_t rng_seed) {
  const GramPath& gram = basis.gram();
  return simulate_path(basis, model, x0,
                       brownian_increments(rng_seed, gram.M(), model.noise().K(), gram.dt()),
                       rng_seed);
}

PathState simulate_path(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                        const Mat& increments, std::uint64_t rng_seed) {
  const GramPath& gram = basis.gram();
  const int M = gram.M();
  const int n = basis.n();
  if (x0.size() != n) throw DimensionError("initial coordinates have the wrong length");
  if (increments.rows() != M || increments.cols() < model.noise().K())
    throw DimensionError("noise increments must be M × K");
  const double dt = gram.dt();
  const Vec w0 = basis.seed().transpose() * gram.mass0();  // Γ_0-mean functional
  PathState p;
  p.rng_seed = rng_seed;
  p.increments = increments.leftCols(model.noise().K());
  p.coords.resize(M + 1, n);
  p.coords.row(0) = x0.transpose();
  Vec x = x0;
  for (int m = 0; m < M; ++m) {
    const SdeCoefficients c = sde_coefficients(basis, model, m, x);
    x += c.a * dt + c.b * p.increments.row(m).transpose();
    const double nx = x.norm();
    if (!std::isfinite(nx) || nx > kBlowUp) throw BlowUpError("path left the blow-up guard", m + 1);
    p.coords.row(m + 1) = x.transpose();
    p.max_mean_drift = std::max(p.max_mean_drift, std::abs(w0.dot(x)) / gram.volume0());
  }
  return p;
}

std::uint64_t path_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void write_trajectory_csv(const TimeBasis& basis, const PathState& path, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw Error("cannot open " + file);
  out << "step,t";
  for (int i = 1; i <= basis.n(); ++i) out << ",x_" << i;
  out << ",norm_t\n" << std::setprecision(17);
  for (int m = 0; m < path.coords.rows(); ++m) {
    const Vec x = path.coords.row(m).transpose();
    out << m << ',' << basis.gram().time(m);
    for (int i = 0; i < x.size(); ++i) out << ',' << x[i];
    out << ',' << std::sqrt(x.dot(basis.G(m) * x)) << '\n';
  }
}

using detail::MeanErr;
using detail::mean_stderr;
using detail::parallel_for;

std::string MomentEstimate::to_json() const {
  nlohmann::json j{{"n", n},
                   {"steps", steps},
                   {"paths", paths},
                   {"failed", failed},
                   {"moment_p", moment_p},
                   {"estimate", sup_estimate},
                   {"stderr", sup_stderr},
                   {"v_estimate", v_estimate},
                   {"v_stderr", v_stderr},
                   {"max_mean_drift", max_mean_drift}};
  return j.dump(2);
}

MomentEstimate moment_estimate(const TimeBasis& basis, const StefanModel& model, const Vec& x0,
                               int paths, std::uint64_t master_seed, double p, int threads) {
  const GramPath& gram = basis.gram();
  const double alpha = model.p_growth();
  std::vector<double> sup(paths, 0), vint(paths, 0), drift(paths, 0);
  std::vector<char> ok(paths, 1);
  parallel_for(paths, threads, [&](int i) {
    try {
      const PathState ps = simulate_path(basis, model, x0, path_seed(master_seed, i));
      double s = 0, v = 0;
      for (int m = 0; m < ps.coords.rows(); ++m) {
        const Vec x = ps.coords.row(m).transpose();
        s = std::max(s, std::pow(x.dot(basis.G(m) * x), p / 2));
        if (m + 1 < ps.coords.rows())
          v += gram.dt() * std::pow(lp_norm0(gram, basis.seed() * x, alpha), alpha);
      }
      sup[i] = s;
      vint[i] = std::pow(v, p / 2);
      drift[i] = ps.max_mean_drift;
    } catch (const BlowUpError&) {
      ok[i] = 0;
    }
  });
  MomentEstimate r;
  r.n = basis.n();
  r.steps = gram.M();
  r.paths = paths;
  r.moment_p = p;
  std::vector<double> s_ok, v_ok;
  for (int i = 0; i < paths; ++i) {
    if (!ok[i]) {
      ++r.failed;
      continue;
    }
    s_ok.push_back(sup[i]);
    v_ok.push_back(vint[i]);
    r.max_mean_drift = std::max(r.max_mean_drift, drift[i]);
  }
  const MeanErr a = mean_stderr(s_ok), b = mean_stderr(v_ok);
  r.sup_estimate = a.mean;
  r.sup_stderr = a.stderr;
  r.v_estimate = b.mean;
  r.v_stderr = b.stderr;
  return r;
}

std::vector<CauchyRow> galerkin_convergence(const TimeBasis& basis, const StefanModel& model,
                                            const Vec& x0, const std::vector<int>& n_list,
                                            int paths, std::uint64_t master_seed, int threads) {
  if (n_list.empty()) return {};
  if (!std::is_sorted(n_list.begin(), n_list.end())) throw DimensionError("n_list must be increasing");
  if (2 * n_list.back() > basis.n())
    throw DimensionError("basis must hold twice the largest Galerkin dimension");
  if (x0.size() != basis.n()) throw DimensionError("initial coordinates have the wrong length");
  std::vector<int> levels;
  for (int n : n_list) {
    levels.push_back(n);
    levels.push_back(2 * n);
  }
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<TimeBasis> bases;
  for (int n : levels) bases.push_back(n == basis.n() ? basis : basis.truncate(n));
  auto level_of = [&](int n) {
    return static_cast<int>(std::lower_bound(levels.begin(), levels.end(), n) - levels.begin());
  };

  const GramPath& gram = basis.gram();
  const int M = gram.M();
  const std::size_t rows = n_list.size();
  std::vector<std::vector<double>> dist(rows, std::vector<double>(paths, 0));
  std::vector<std::vector<char>> ok(rows, std::vector<char>(paths, 1));
  parallel_for(paths, threads, [&](int i) {
    const Mat dB = brownian_increments(path_seed(master_seed, i), M, model.noise().K(), gram.dt());
    std::vector<Mat> X(levels.size());
    std::vector<char> good(levels.size(), 1);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      try {
        X[l] = simulate_path(bases[l], model, x0.head(levels[l]), dB).coords;
      } catch (const BlowUpError&) {
        good[l] = 0;
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const int lo = level_of(n_list[r]), hi = level_of(2 * n_list[r]);
      if (!good[lo] || !good[hi]) {
        ok[r][i] = 0;
        continue;
      }
      double s = 0;
      for (int m = 0; m <= M; ++m) {
        Vec d = X[hi].row(m).transpose();
        d.head(n_list[r]) -= X[lo].row(m).transpose();
        s = std::max(s, d.dot(bases[hi].G(m) * d));
      }
      dist[r][i] = s;
    }
  });
  std::vector<CauchyRow> out;
  for (std::size_t r = 0; r < rows; ++r) {
    CauchyRow row;
    row.n = n_list[r];
    std::vector<double> v;
    for (int i = 0; i < paths; ++i) {
      if (ok[r][i]) v.push_back(dist[r][i]);
      else ++row.failed;
    }
    const MeanErr me = mean_stderr(v);
    row.d = std::sqrt(me.mean);
    row.stderr = me.stderr;
    out.push_back(row);
  }
  return out;
}

UniquenessReport pathwise_uniqueness_check(const TimeBasis& basis, const StefanModel& model,
                                           const Vec& x0, const Vec& y0, std::uint64_t rng_seed) {
  const GramPath& gram = basis.gram();
  const Mat dB = brownian_increments(rng_seed, gram.M(), model.noise().K(), gram.dt());
  const PathState X = simulate_path(basis, model, x0, dB, rng_seed);
  const GramPath fresh(gram.curve(), gram.M());
  const TimeBasis other(fresh, basis.seed());
  const PathState Y = simulate_path(other, model, y0, dB, rng_seed);
  UniquenessReport r;
  for (int m = 0; m < X.coords.rows(); ++m) {
    const Vec d = (X.coords.row(m) - Y.coords.row(m)).transpose();
    const double g = d.dot(basis.G(m) * d);
    r.gap_sq.push_back(g);
    r.max_deviation = std::max(r.max_deviation, std::sqrt(std::max(0.0, g)));
  }
  r.initial_gap_sq = r.gap_sq.front();
  return r;
}

}  // namespace mslab

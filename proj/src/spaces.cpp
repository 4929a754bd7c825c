#include "mslab/spaces.hpp"

#include <cmath>
#include <numbers>

#include "mslab/errors.hpp"

namespace mslab {

Mat bordered_pseudo_inverse(const Mat& S, const Vec& m) {
  const int N = S.rows();
  Mat B = Mat::Zero(N + 1, N + 1);
  B.topLeftCorner(N, N) = S;
  B.col(N).head(N) = m;
  B.row(N).head(N) = m.transpose();
  Mat rhs = Mat::Zero(N + 1, N);
  rhs.topRows(N).setIdentity();
  Eigen::PartialPivLU<Mat> lu(B);
  Mat X = lu.solve(rhs);
  if (!X.allFinite()) throw NumericError("bordered stiffness solve produced non-finite values");
  const double resid = (B * X - rhs).cwiseAbs().maxCoeff();
  if (resid > 1e-8 * std::max(1.0, X.cwiseAbs().maxCoeff()))
    throw NumericError("stiffness is singular beyond the constant kernel");
  Mat K = X.topRows(N);
  return 0.5 * (K + K.transpose());
}

NodeOperators assemble_node(const SurfaceGrid& grid, const Vec& mass0) {
  NodeOperators op;
  op.t = grid.t;
  op.S = laplace_beltrami_matrix(grid);
  op.Sdot = weighted_stiffness(stiffness_weight_rate(grid));
  op.K = bordered_pseudo_inverse(op.S, mass0);
  return op;
}

GramPath::GramPath(MovingCurve curve, int M, std::size_t cache_bytes)
    : curve_(std::move(curve)), M_(M) {
  if (M_ < 1) throw DimensionError("GramPath needs at least one time step");
  grids_.reserve(M_ + 1);
  for (int m = 0; m <= M_; ++m) grids_.push_back(build_grid(curve_, time(m)));
  mass0_ = mass_diagonal(grids_[0]);
  const std::size_t per_node = 3 * sizeof(double) * std::size_t(N()) * std::size_t(N());
  capacity_ = std::max<std::size_t>(2, cache_bytes / std::max<std::size_t>(per_node, 1));
}

std::shared_ptr<const NodeOperators> GramPath::node(int m) const {
  if (m < 0 || m > M_) throw DimensionError("node index out of range");
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(m);
    if (it != cache_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
  }
  auto built = std::make_shared<const NodeOperators>(assemble_node(grids_[m], mass0_));
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(m);
  if (it != cache_.end()) return it->second.first;
  lru_.push_front(m);
  cache_[m] = {built, lru_.begin()};
  while (cache_.size() > capacity_) {
    const int victim = lru_.back();
    lru_.pop_back();
    cache_.erase(victim);
  }
  return built;
}

int GramPath::node_index(double t) const {
  const double x = t / dt();
  const long m = std::lround(x);
  if (m < 0 || m > M_) return -1;
  return std::abs(x - m) <= 1e-9 ? int(m) : -1;
}

std::shared_ptr<const NodeOperators> GramPath::at(double t) const {
  const int m = node_index(t);
  if (m >= 0) return node(m);
  return std::make_shared<const NodeOperators>(assemble_node(build_grid(curve_, t), mass0_));
}

double GramPath::mean0(const Vec& f) const {
  if (f.size() != N()) throw DimensionError("grid function has the wrong length");
  return mass0_.dot(f) / volume0();
}

Vec GramPath::project_zero_mean(const Vec& f) const {
  return f.array() - mean0(f);
}

Mat GramPath::zero_mean_projector() const {
  return Mat::Identity(N(), N()) - Vec::Ones(N()) * (mass0_.transpose() / volume0());
}

void GramPath::require_zero_mean(const Vec& f) const {
  const double mu = mean0(f);
  const double scale = std::max(1.0, f.cwiseAbs().maxCoeff());
  if (std::abs(mu) > 1e-10 * scale)
    throw ZeroMeanViolation("grid function has Γ_0-mean " + std::to_string(mu));
}

double hminus_inner(const GramPath& gram, double t, const Vec& f, const Vec& g) {
  gram.require_zero_mean(f);
  gram.require_zero_mean(g);
  const auto op = gram.at(t);
  const Vec a = gram.mass0().cwiseProduct(f);
  const Vec b = gram.mass0().cwiseProduct(g);
  // averaged so that swapping f and g is bitwise symmetric
  return 0.5 * (a.dot(op->K * b) + b.dot(op->K * a));
}

Vec riesz_solve(const GramPath& gram, double t, const Vec& f) {
  gram.require_zero_mean(f);
  return gram.at(t)->K * gram.mass0().cwiseProduct(f);
}

Vec iota_star(const GramPath& gram, double t, const Vec& f) {
  gram.require_zero_mean(f);
  const Vec u = gram.at(t)->K * gram.mass0().cwiseProduct(f);
  return gram.project_zero_mean((gram.node(0)->S * u).cwiseQuotient(gram.mass0()));
}

Vec iota_star_inverse(const GramPath& gram, double t, const Vec& f) {
  gram.require_zero_mean(f);
  const Vec u = gram.node(0)->K * gram.mass0().cwiseProduct(f);
  return gram.project_zero_mean((gram.at(t)->S * u).cwiseQuotient(gram.mass0()));
}

Mat phi_operator(const GramPath& gram, double t) {
  const auto op = gram.at(t);
  const Vec& m = gram.mass0();
  const Mat KM = op->K * m.asDiagonal();
  Mat P = -(m.cwiseInverse().asDiagonal() * (gram.node(0)->S * (op->K * (op->Sdot * KM))));
  return gram.zero_mean_projector() * P;
}

Mat phi_form(const GramPath& gram, double t) {
  const auto op = gram.at(t);
  const Mat KM = op->K * gram.mass0().asDiagonal();
  const Mat B = -(KM.transpose() * op->Sdot * KM);
  return 0.5 * (B + B.transpose());
}

Mat inner0_matrix(const GramPath& gram) {
  const Vec& m = gram.mass0();
  const Mat H = m.asDiagonal() * gram.node(0)->K * m.asDiagonal();
  return 0.5 * (H + H.transpose());
}

double operator_norm0(const GramPath& gram, const Mat& L) {
  const Mat H = inner0_matrix(gram);
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  if (es.info() != Eigen::Success) throw NumericError("eigen-solver failed on the Gram matrix");
  const int N = gram.N();
  const double top = es.eigenvalues()[N - 1];
  int first = 0;
  while (first < N && es.eigenvalues()[first] <= 1e-12 * top) ++first;
  const Mat V = es.eigenvectors().rightCols(N - first);
  const Vec lam = es.eigenvalues().tail(N - first);
  const Mat W = V * lam.cwiseSqrt().cwiseInverse().asDiagonal();  // |W c|_0 = |c|
  const Mat LW = L * gram.zero_mean_projector() * W;
  const Mat A = LW.transpose() * H * LW;
  Eigen::SelfAdjointEigenSolver<Mat> ea(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, ea.eigenvalues().maxCoeff()));
}

double hminus_norm_sq_on_grid(const SurfaceGrid& grid, const Vec& f) {
  const Vec m = mass_diagonal(grid);
  if (std::abs(m.dot(f)) > 1e-10 * m.sum() * std::max(1.0, f.cwiseAbs().maxCoeff()))
    throw ZeroMeanViolation("density does not have zero mean on its own surface");
  const Mat K = bordered_pseudo_inverse(laplace_beltrami_matrix(grid), m);
  const Vec a = m.cwiseProduct(f);
  return a.dot(K * a);
}

Vec pull_back_density(const SurfaceGrid& grid_t, const Vec& f_t) {
  if (f_t.size() != grid_t.N) throw DimensionError("pull_back_density: size mismatch");
  return f_t.cwiseProduct(grid_t.rn_derivative);
}

Vec random_smooth_field(const GramPath& gram, std::mt19937_64& rng, int kmax, double decay) {
  const int N = gram.N();
  kmax = std::max(1, std::min(kmax, N / 2 - 1));
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec f = Vec::Zero(N);
  const double h = 2 * std::numbers::pi / N;
  for (int k = 1; k <= kmax; ++k) {
    const double s = std::pow(double(k), -decay);
    const double a = s * nd(rng), b = s * nd(rng);
    for (int j = 0; j < N; ++j) f[j] += a * std::cos(k * j * h) + b * std::sin(k * j * h);
  }
  return gram.project_zero_mean(f);
}

Mat fourier_seed_basis(const GramPath& gram, int n) {
  const int N = gram.N();
  if (n < 1 || n > N / 2) throw DimensionError("seed basis size must lie in [1, N/2]");
  const Mat H = inner0_matrix(gram);
  const double h = 2 * std::numbers::pi / N;
  Mat E(N, n);
  for (int i = 0; i < n; ++i) {
    const int k = i / 2 + 1;
    Vec v(N);
    for (int j = 0; j < N; ++j) v[j] = (i % 2 == 0) ? std::cos(k * j * h) : std::sin(k * j * h);
    v = gram.project_zero_mean(v);
    for (int pass = 0; pass < 2; ++pass)
      for (int l = 0; l < i; ++l) v -= E.col(l).dot(H * v) * E.col(l);
    const double nv = std::sqrt(v.dot(H * v));
    if (!(nv > 1e-12)) throw RankDeficiencyError("Fourier seed mode is dependent", i);
    E.col(i) = v / nv;
  }
  return E;
}

C1Report check_C1(const GramPath& gram, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> xs;
  std::vector<Vec> mx;
  xs.reserve(samples);
  for (int i = 0; i < samples; ++i) {
    xs.push_back(random_smooth_field(gram, rng, gram.N() / 4));
    mx.push_back(gram.mass0().cwiseProduct(xs.back()));
  }
  C1Report r;
  const auto op0 = gram.node(0);
  std::vector<double> n0(samples);
  for (int i = 0; i < samples; ++i) n0[i] = mx[i].dot(op0->K * mx[i]);
  for (int m = 0; m <= gram.M(); ++m) {
    const auto op = gram.node(m);
    for (int i = 0; i < samples; ++i) {
      const double nt = mx[i].dot(op->K * mx[i]);
      const double ratio = std::sqrt(std::max(nt / n0[i], n0[i] / nt));
      if (ratio > r.c1) {
        r.c1 = ratio;
        r.t_worst = gram.time(m);
      }
    }
  }
  return r;
}

C2Report check_C2(const GramPath& gram, int samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vec> mx;
  for (int i = 0; i < samples; ++i)
    mx.push_back(gram.mass0().cwiseProduct(random_smooth_field(gram, rng, gram.N() / 4)));
  C2Report r;
  r.per_node = Vec::Zero(gram.M() + 1);
  std::vector<double> n0(samples), integral(samples, 0.0), prev(samples);
  const auto op0 = gram.node(0);
  for (int i = 0; i < samples; ++i) {
    const Vec u = op0->K * mx[i];
    n0[i] = mx[i].dot(u);
    prev[i] = -u.dot(op0->Sdot * u);
  }
  for (int m = 1; m <= gram.M(); ++m) {
    const auto op = gram.node(m);
    for (int i = 0; i < samples; ++i) {
      const Vec u = op->K * mx[i];
      const double phi = -u.dot(op->Sdot * u);
      integral[i] += 0.5 * gram.dt() * (prev[i] + phi);
      prev[i] = phi;
      const double res = std::abs(mx[i].dot(u) - n0[i] - integral[i]);
      r.per_node[m] = std::max(r.per_node[m], res);
    }
  }
  r.max_residual = r.per_node.maxCoeff();
  return r;
}

double lp_norm0(const GramPath& gram, const Vec& f, double p) {
  return std::pow(gram.mass0().dot(f.cwiseAbs().array().pow(p).matrix()), 1.0 / p);
}

C3C4Report check_C3_C4(const GramPath& gram, double p, int samples, std::uint64_t seed) {
  if (!(p >= 2.0 / 3.0)) throw DimensionError("check_C3_C4 needs p ≥ 2/3");
  std::mt19937_64 rng(seed);
  std::vector<Vec> xs;
  for (int i = 0; i < samples; ++i) xs.push_back(random_smooth_field(gram, rng, gram.N() / 4));
  const Mat H = inner0_matrix(gram);
  C3C4Report r;
  for (int m = 0; m <= gram.M(); ++m) {
    const double t = gram.time(m);
    for (const Vec& f : xs) {
      const double nf = lp_norm0(gram, f, p);
      const Vec fw = iota_star(gram, t, f);
      const Vec bw = iota_star_inverse(gram, t, f);
      r.c2 = std::max(r.c2, lp_norm0(gram, fw, p) / nf);
      r.c3 = std::max(r.c3, lp_norm0(gram, bw, p) / nf);
      const Vec e = iota_star_inverse(gram, t, fw) - f;
      r.inverse_pair_residual =
          std::max(r.inverse_pair_residual, std::sqrt(std::abs(e.dot(H * e)) / f.dot(H * f)));
    }
  }
  return r;
}

double inverse_identity_residual(const GramPath& gram, double t, int samples, std::uint64_t seed) {
  const int mt = gram.node_index(t);
  if (mt < 0) throw DimensionError("inverse_identity_residual needs t on the time grid");
  if (mt == 0) return 0.0;
  std::mt19937_64 rng(seed);
  const Mat H = inner0_matrix(gram);
  const Vec& m0 = gram.mass0();
  const Mat& K0 = gram.node(0)->K;
  // ι*_{−s} = M0⁻¹ S(s) K0 M0 and (ι*_{−s}Φι*_{−s}x, y)_0 = (Φ ι*_{−s}x, ι*_{−s}y)_0
  Mat X(gram.N(), samples), Y(gram.N(), samples);
  for (int i = 0; i < samples; ++i) {
    X.col(i) = random_smooth_field(gram, rng, gram.N() / 4);
    Y.col(i) = random_smooth_field(gram, rng, gram.N() / 4);
  }
  auto inv_apply = [&](const Mat& S, const Mat& Z) -> Mat {
    Mat out = m0.cwiseInverse().asDiagonal() * (S * (K0 * (m0.asDiagonal() * Z)));
    return gram.zero_mean_projector() * out;
  };
  auto integrand = [&](int s) -> Mat {
    const auto op = gram.node(s);
    const Mat IX = inv_apply(op->S, X), IY = inv_apply(op->S, Y);
    return IX.transpose() * phi_form(gram, gram.time(s)) * IY;
  };
  Mat integral = Mat::Zero(samples, samples);
  Mat prev = integrand(0);
  for (int s = 1; s <= mt; ++s) {
    const Mat cur = integrand(s);
    integral += 0.5 * gram.dt() * (prev + cur);
    prev = cur;
  }
  const Mat lhs = inv_apply(gram.node(mt)->S, X).transpose() * H * Y;
  const Mat base = X.transpose() * H * Y;
  return (lhs - base + integral).diagonal().cwiseAbs().maxCoeff();
}

}  // namespace mslab

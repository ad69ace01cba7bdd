#include "ipgd/problems.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace ipgd {

using json = nlohmann::json;

double softplus(double x) {
  // log(1 + e^x) = max(x, 0) + log1p(e^{-|x|})
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Eigen::MatrixXd random_orthonormal(Eigen::Index n, Eigen::Index r, Rng& rng) {
  if (r > n) throw std::invalid_argument("random_orthonormal: r > n");
  Eigen::MatrixXd g(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < r; ++j) g(i, j) = rng.gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, r);
}

namespace {

Eigen::MatrixXd sym2(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

void check_sigma(const Eigen::VectorXd& sigma) {
  if (sigma.size() < 1) throw std::invalid_argument("sigma_star must be nonempty");
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!(sigma(i) > 0.0)) throw std::invalid_argument("sigma_star entries must be positive");
    if (i > 0 && sigma(i) > sigma(i - 1)) {
      throw std::invalid_argument("sigma_star must be non-increasing");
    }
  }
}

void check_ranks(int r, int r_prime, Eigen::Index n1, Eigen::Index n2) {
  if (r < 1 || r > r_prime) throw std::invalid_argument("need 1 <= r <= r_prime");
  if (r_prime > std::min(n1, n2)) {
    throw std::invalid_argument("r_prime exceeds min matrix dimension");
  }
}

// Ground-truth factor U diag(sqrt(sigma)) padded with zero columns to width
// r_prime.
Eigen::MatrixXd padded_factor(const Eigen::MatrixXd& u, const Eigen::VectorXd& sigma,
                              int r_prime) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(u.rows(), r_prime);
  out.leftCols(u.cols()) = u * sigma.cwiseSqrt().asDiagonal();
  return out;
}

// Distance from factor X to the orbit { W O^T : O orthonormal columns } of
// the balanced ground-truth factor W, evaluated at the optimal aligner (the
// polar factor of X^T W). Algebraically equal to
// sqrt(||X||_F^2 + sum(sigma) - 2 ||W^T X||_*) but without the cancellation
// that form suffers at small distances.
double aligned_factor_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  Eigen::MatrixXd p = x.transpose() * w;  // r' x r
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(p, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::MatrixXd o = svd.matrixU() * svd.matrixV().transpose();  // r' x r
  return (x - w * o.transpose()).norm();
}

LayoutPtr single_factor_layout(Eigen::Index n, Eigen::Index r_prime) {
  return make_layout({{"X", n, r_prime}});
}

LayoutPtr pair_factor_layout(Eigen::Index n1, Eigen::Index n2, Eigen::Index r_prime) {
  return make_layout({{"X", n1, r_prime}, {"Y", n2, r_prime}});
}

// --------------------------------------------------------------------------
// Matrix sensing, symmetric factors.
// --------------------------------------------------------------------------

class MatrixSensingProblem final : public Problem {
 public:
  explicit MatrixSensingProblem(MatrixSensingData d)
      : Problem(ProblemKind::matrix_sensing,
                single_factor_layout(d.m_star.rows(), d.r_prime),
                LowRankRegion{d.r}),
        d_(std::move(d)) {
    check_sigma(d_.sigma_star);
    check_ranks(d_.r, d_.r_prime, d_.m_star.rows(), d_.m_star.cols());
    set_sigma1(d_.sigma_star(0));
    set_rho_hint(15.0 * std::sqrt(d_.sigma_star(0)));
  }

  const MatrixSensingData& data() const { return d_; }

  double distance_to_solutions(const ParamPoint& x) const override {
    return aligned_factor_distance(x.block(0),
                                   d_.u_star * d_.sigma_star.cwiseSqrt().asDiagonal());
  }

 protected:
  double value_impl(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0);
    const Eigen::VectorXd w = scaled_residual(x);
    return 0.25 * w.squaredNorm();
  }

  ParamPoint gradient_impl(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0);
    const Eigen::MatrixXd r = d_.stack.adjoint(scaled_residual(x));
    ParamPoint g(p.layout);
    g.block(0) = sym2(r) * x;
    return g;
  }

  ParamPoint hessian_apply_impl(const ParamPoint& p, const ParamPoint& zp) const override {
    const Eigen::MatrixXd x = p.block(0);
    const Eigen::MatrixXd z = zp.block(0);
    const Eigen::MatrixXd r = d_.stack.adjoint(scaled_residual(x));
    const Eigen::MatrixXd dr = d_.stack.adjoint(d_.stack.measure(z * x.transpose() + x * z.transpose()));
    ParamPoint h(p.layout);
    h.block(0) = sym2(dr) * x + sym2(r) * z;
    return h;
  }

  // Gram-form assembly: column j of the Hessian equals hessian_apply(x, e_j),
  // but the whole matrix is one rank-N Gram product plus a Kronecker-diagonal
  // term, which is far cheaper than d separate applies.
  Eigen::MatrixXd dense_hessian_impl(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0);
    const Eigen::Index n = x.rows(), rp = x.cols(), d = n * rp;
    const Eigen::Index big_n = d_.stack.count();
    const Eigen::MatrixXd c = sym2(d_.stack.adjoint(scaled_residual(x)));

    Eigen::MatrixXd bmat(big_n, d);
    for (Eigen::Index m = 0; m < big_n; ++m) {
      const Eigen::MatrixXd a = d_.stack.mat(m);
      RowMajorMatrix b = a * x + a.transpose() * x;  // n x r'
      bmat.row(m) = Eigen::Map<const Eigen::VectorXd>(b.data(), d);
    }
    Eigen::MatrixXd h = (bmat.transpose() * bmat) / (2.0 * static_cast<double>(big_n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const double cij = c(i, j);
        for (Eigen::Index k = 0; k < rp; ++k) {
          h(i * rp + k, j * rp + k) += cij;
        }
      }
    }
    return h;
  }

 private:
  // ( <A_i, X X^T> - y_i ) / sqrt(N); y is exact so this is the honest
  // residual, not measure(X X^T - M*) which would re-round M*.
  Eigen::VectorXd scaled_residual(const Eigen::MatrixXd& x) const {
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(d_.stack.count()));
    return inv_sqrt_n * (d_.stack.raw_dots(x * x.transpose()) - d_.y);
  }

  MatrixSensingData d_;
};

// --------------------------------------------------------------------------
// Matrix sensing, asymmetric factors with balance penalty.
// --------------------------------------------------------------------------

class AsymSensingProblem final : public Problem {
 public:
  explicit AsymSensingProblem(AsymSensingData d)
      : Problem(ProblemKind::matrix_sensing_asym,
                pair_factor_layout(d.m_star.rows(), d.m_star.cols(), d.r_prime),
                PairLowRankRegion{d.r}),
        d_(std::move(d)) {
    check_sigma(d_.sigma_star);
    check_ranks(d_.r, d_.r_prime, d_.m_star.rows(), d_.m_star.cols());
    if (d_.lambda_balance < 0.0) throw std::invalid_argument("lambda_balance must be >= 0");
    set_sigma1(d_.sigma_star(0));
  }

  const AsymSensingData& data() const { return d_; }

  double distance_to_solutions(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    return (x * y.transpose() - d_.m_star).norm();
  }

 protected:
  double value_impl(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::VectorXd w = scaled_residual(x, y);
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    return 0.25 * w.squaredNorm() + d_.lambda_balance * b.squaredNorm();
  }

  ParamPoint gradient_impl(const ParamPoint& p) const override {
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd r = d_.stack.adjoint(scaled_residual(x, y));
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    ParamPoint g(p.layout);
    g.block(0) = 0.5 * r * y + 4.0 * d_.lambda_balance * x * b;
    g.block(1) = 0.5 * r.transpose() * x - 4.0 * d_.lambda_balance * y * b;
    return g;
  }

  ParamPoint hessian_apply_impl(const ParamPoint& p, const ParamPoint& zp) const override {
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd zx = zp.block(0), zy = zp.block(1);
    const Eigen::MatrixXd r = d_.stack.adjoint(scaled_residual(x, y));
    const Eigen::MatrixXd dr =
        d_.stack.adjoint(d_.stack.measure(zx * y.transpose() + x * zy.transpose()));
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    const Eigen::MatrixXd db = zx.transpose() * x + x.transpose() * zx -
                               zy.transpose() * y - y.transpose() * zy;
    const double lam = d_.lambda_balance;
    ParamPoint h(p.layout);
    h.block(0) = 0.5 * (dr * y + r * zy) + 4.0 * lam * (zx * b + x * db);
    h.block(1) = 0.5 * (dr.transpose() * x + r.transpose() * zx) - 4.0 * lam * (zy * b + y * db);
    return h;
  }

 private:
  Eigen::VectorXd scaled_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(d_.stack.count()));
    return inv_sqrt_n * (d_.stack.raw_dots(x * y.transpose()) - d_.y);
  }

  AsymSensingData d_;
};

// --------------------------------------------------------------------------
// Matrix completion (symmetric and asymmetric).
// --------------------------------------------------------------------------

class CompletionProblem final : public Problem {
 public:
  explicit CompletionProblem(CompletionData d)
      : Problem(d.symmetric ? ProblemKind::matrix_completion
                            : ProblemKind::matrix_completion_asym,
                d.symmetric
                    ? single_factor_layout(d.m_star.rows(), d.r_prime)
                    : pair_factor_layout(d.m_star.rows(), d.m_star.cols(), d.r_prime),
                d.symmetric ? RegionSpec(LowRankRegion{d.r})
                            : RegionSpec(PairLowRankRegion{d.r})),
        d_(std::move(d)) {
    check_sigma(d_.sigma_star);
    check_ranks(d_.r, d_.r_prime, d_.m_star.rows(), d_.m_star.cols());
    if (d_.symmetric && d_.m_star.rows() != d_.m_star.cols()) {
      throw std::invalid_argument("symmetric completion needs a square target");
    }
    set_sigma1(d_.sigma_star(0));
  }

  const CompletionData& data() const { return d_; }

  double distance_to_solutions(const ParamPoint& p) const override {
    if (d_.symmetric) {
      return aligned_factor_distance(p.block(0),
                                     d_.u_star * d_.sigma_star.cwiseSqrt().asDiagonal());
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    return (x * y.transpose() - d_.m_star).norm();
  }

 protected:
  double value_impl(const ParamPoint& p) const override {
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0);
      return masked(x * x.transpose()).squaredNorm();
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    return masked(x * y.transpose()).squaredNorm() + d_.lambda_balance * b.squaredNorm();
  }

  ParamPoint gradient_impl(const ParamPoint& p) const override {
    ParamPoint g(p.layout);
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0);
      const Eigen::MatrixXd s = masked(x * x.transpose());
      g.block(0) = 2.0 * (s + s.transpose()) * x;
      return g;
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd s = masked(x * y.transpose());
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    const double lam = d_.lambda_balance;
    g.block(0) = 2.0 * s * y + 4.0 * lam * x * b;
    g.block(1) = 2.0 * s.transpose() * x - 4.0 * lam * y * b;
    return g;
  }

  ParamPoint hessian_apply_impl(const ParamPoint& p, const ParamPoint& zp) const override {
    ParamPoint h(p.layout);
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0), z = zp.block(0);
      const Eigen::MatrixXd s = masked(x * x.transpose());
      const Eigen::MatrixXd ds =
          d_.mask.cwiseProduct(z * x.transpose() + x * z.transpose());
      h.block(0) = 2.0 * (ds + ds.transpose()) * x + 2.0 * (s + s.transpose()) * z;
      return h;
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd zx = zp.block(0), zy = zp.block(1);
    const Eigen::MatrixXd s = masked(x * y.transpose());
    const Eigen::MatrixXd ds =
        d_.mask.cwiseProduct(zx * y.transpose() + x * zy.transpose());
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    const Eigen::MatrixXd db = zx.transpose() * x + x.transpose() * zx -
                               zy.transpose() * y - y.transpose() * zy;
    const double lam = d_.lambda_balance;
    h.block(0) = 2.0 * (ds * y + s * zy) + 4.0 * lam * (zx * b + x * db);
    h.block(1) = 2.0 * (ds.transpose() * x + s.transpose() * zx) - 4.0 * lam * (zy * b + y * db);
    return h;
  }

 private:
  Eigen::MatrixXd masked(const Eigen::MatrixXd& m) const {
    return d_.mask.cwiseProduct(m - d_.m_star);
  }

  CompletionData d_;
};

// --------------------------------------------------------------------------
// One-bit observations with logistic link (symmetric and asymmetric).
// --------------------------------------------------------------------------

class OneBitProblem final : public Problem {
 public:
  explicit OneBitProblem(OneBitData d)
      : Problem(d.symmetric ? ProblemKind::one_bit : ProblemKind::one_bit_asym,
                d.symmetric
                    ? single_factor_layout(d.m_star.rows(), d.r_prime)
                    : pair_factor_layout(d.m_star.rows(), d.m_star.cols(), d.r_prime),
                d.symmetric ? RegionSpec(LowRankRegion{d.r})
                            : RegionSpec(PairLowRankRegion{d.r})),
        d_(std::move(d)) {
    check_sigma(d_.sigma_star);
    check_ranks(d_.r, d_.r_prime, d_.m_star.rows(), d_.m_star.cols());
    if ((d_.alpha.array() <= 0.0).any() || (d_.alpha.array() >= 1.0).any()) {
      throw std::invalid_argument("alpha entries must lie strictly inside (0,1)");
    }
    set_sigma1(d_.sigma_star(0));
    // Loss offset making the planted signal the zero of the objective.
    offset_ = raw_link_loss(d_.m_star);
  }

  const OneBitData& data() const { return d_; }

  double distance_to_solutions(const ParamPoint& p) const override {
    if (d_.symmetric) {
      return aligned_factor_distance(p.block(0),
                                     d_.u_star * d_.sigma_star.cwiseSqrt().asDiagonal());
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    return (x * y.transpose() - d_.m_star).norm();
  }

 protected:
  double value_impl(const ParamPoint& p) const override {
    double v;
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0);
      v = raw_link_loss(x * x.transpose()) - offset_;
    } else {
      const Eigen::MatrixXd x = p.block(0), y = p.block(1);
      const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
      v = raw_link_loss(x * y.transpose()) - offset_ + d_.lambda_balance * b.squaredNorm();
    }
    // The shifted loss is nonnegative by convexity; clamp the rounding tail
    // so callers can rely on that.
    return std::max(v, 0.0);
  }

  ParamPoint gradient_impl(const ParamPoint& p) const override {
    ParamPoint g(p.layout);
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0);
      const Eigen::MatrixXd q = link_slope(x * x.transpose());
      g.block(0) = (q + q.transpose()) * x;
      return g;
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd q = link_slope(x * y.transpose());
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    const double lam = d_.lambda_balance;
    g.block(0) = q * y + 4.0 * lam * x * b;
    g.block(1) = q.transpose() * x - 4.0 * lam * y * b;
    return g;
  }

  ParamPoint hessian_apply_impl(const ParamPoint& p, const ParamPoint& zp) const override {
    ParamPoint h(p.layout);
    if (d_.symmetric) {
      const Eigen::MatrixXd x = p.block(0), z = zp.block(0);
      const Eigen::MatrixXd m = x * x.transpose();
      const Eigen::MatrixXd q = link_slope(m);
      const Eigen::MatrixXd dq = link_curvature(m).cwiseProduct(
          z * x.transpose() + x * z.transpose());
      h.block(0) = (dq + dq.transpose()) * x + (q + q.transpose()) * z;
      return h;
    }
    const Eigen::MatrixXd x = p.block(0), y = p.block(1);
    const Eigen::MatrixXd zx = zp.block(0), zy = zp.block(1);
    const Eigen::MatrixXd m = x * y.transpose();
    const Eigen::MatrixXd q = link_slope(m);
    const Eigen::MatrixXd dq =
        link_curvature(m).cwiseProduct(zx * y.transpose() + x * zy.transpose());
    const Eigen::MatrixXd b = x.transpose() * x - y.transpose() * y;
    const Eigen::MatrixXd db = zx.transpose() * x + x.transpose() * zx -
                               zy.transpose() * y - y.transpose() * zy;
    const double lam = d_.lambda_balance;
    h.block(0) = dq * y + q * zy + 4.0 * lam * (zx * b + x * db);
    h.block(1) = dq.transpose() * x + q.transpose() * zx - 4.0 * lam * (zy * b + y * db);
    return h;
  }

 private:
  double raw_link_loss(const Eigen::MatrixXd& m) const {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        s += softplus(m(i, j)) - d_.alpha(i, j) * m(i, j);
      }
    }
    return s;
  }

  Eigen::MatrixXd link_slope(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd q(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        q(i, j) = sigmoid(m(i, j)) - d_.alpha(i, j);
      }
    }
    return q;
  }

  Eigen::MatrixXd link_curvature(const Eigen::MatrixXd& m) const {
    Eigen::MatrixXd c(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double s = sigmoid(m(i, j));
        c(i, j) = s * (1.0 - s);
      }
    }
    return c;
  }

  OneBitData d_;
  double offset_ = 0.0;
};

// --------------------------------------------------------------------------
// Sparse recovery via the Hadamard parameterization theta = u o u - v o v.
// --------------------------------------------------------------------------

class SparseProblem final : public Problem {
 public:
  explicit SparseProblem(SparseData d)
      : Problem(ProblemKind::sparse_recovery,
                make_layout({{"u", d.design.cols(), 1}, {"v", d.design.cols(), 1}}),
                SupportRegion{d.s_plus, d.s_minus}),
        d_(std::move(d)) {
    if (d_.theta_star.size() != d_.design.cols()) {
      throw std::invalid_argument("theta_star length must match design columns");
    }
    if (d_.y.size() != d_.design.rows()) {
      throw std::invalid_argument("y length must match design rows");
    }
  }

  const SparseData& data() const { return d_; }

  double distance_to_solutions(const ParamPoint& p) const override {
    return (theta(p) - d_.theta_star).norm();
  }

 protected:
  double value_impl(const ParamPoint& p) const override {
    return (d_.y - d_.design * theta(p)).squaredNorm();
  }

  ParamPoint gradient_impl(const ParamPoint& p) const override {
    const Eigen::VectorXd u = p.block(0), v = p.block(1);
    const Eigen::VectorXd c = d_.design.transpose() * (d_.y - d_.design * theta(p));
    ParamPoint g(p.layout);
    g.block(0) = (-4.0 * u.array() * c.array()).matrix();
    g.block(1) = (4.0 * v.array() * c.array()).matrix();
    return g;
  }

  ParamPoint hessian_apply_impl(const ParamPoint& p, const ParamPoint& zp) const override {
    const Eigen::VectorXd u = p.block(0), v = p.block(1);
    const Eigen::VectorXd pu = zp.block(0), qv = zp.block(1);
    const Eigen::VectorXd c = d_.design.transpose() * (d_.y - d_.design * theta(p));
    const Eigen::VectorXd dtheta =
        (2.0 * u.array() * pu.array() - 2.0 * v.array() * qv.array()).matrix();
    const Eigen::VectorXd gram_dtheta = d_.design.transpose() * (d_.design * dtheta);
    ParamPoint h(p.layout);
    h.block(0) = (-4.0 * pu.array() * c.array() + 4.0 * u.array() * gram_dtheta.array()).matrix();
    h.block(1) = (4.0 * qv.array() * c.array() - 4.0 * v.array() * gram_dtheta.array()).matrix();
    return h;
  }

 private:
  Eigen::VectorXd theta(const ParamPoint& p) const {
    const Eigen::VectorXd u = p.block(0), v = p.block(1);
    return (u.array().square() - v.array().square()).matrix();
  }

  SparseData d_;
};

}  // namespace

// --------------------------------------------------------------------------
// Generators.
// --------------------------------------------------------------------------

ProblemPtr gen_matrix_sensing(int n, int r, int r_prime, int n_measurements,
                              const Eigen::VectorXd& sigma_star, std::uint64_t seed) {
  check_sigma(sigma_star);
  if (sigma_star.size() != r) throw std::invalid_argument("sigma_star length must equal r");
  check_ranks(r, r_prime, n, n);
  const int count = n_measurements > 0 ? n_measurements : 10 * n * r;
  Rng rng(seed);
  MatrixSensingData d{MeasurementStack::gaussian(n, n, count, rng),
                      Eigen::MatrixXd(), Eigen::MatrixXd(), sigma_star,
                      Eigen::VectorXd(), r, r_prime};
  d.u_star = random_orthonormal(n, r, rng);
  d.m_star = sym2(d.u_star * sigma_star.asDiagonal() * d.u_star.transpose());
  d.y = d.stack.raw_dots(d.m_star);
  return make_matrix_sensing(std::move(d));
}

ProblemPtr gen_matrix_sensing_asym(int n1, int n2, int r, int r_prime,
                                   int n_measurements, double lambda_balance,
                                   const Eigen::VectorXd& sigma_star, std::uint64_t seed) {
  check_sigma(sigma_star);
  if (sigma_star.size() != r) throw std::invalid_argument("sigma_star length must equal r");
  check_ranks(r, r_prime, n1, n2);
  const int count = n_measurements > 0 ? n_measurements : 10 * std::max(n1, n2) * r;
  Rng rng(seed);
  AsymSensingData d{MeasurementStack::gaussian(n1, n2, count, rng),
                    Eigen::MatrixXd(), Eigen::MatrixXd(), Eigen::MatrixXd(),
                    sigma_star, Eigen::VectorXd(), lambda_balance, r, r_prime};
  d.u_star = random_orthonormal(n1, r, rng);
  d.v_star = random_orthonormal(n2, r, rng);
  d.m_star = d.u_star * sigma_star.asDiagonal() * d.v_star.transpose();
  d.y = d.stack.raw_dots(d.m_star);
  return make_matrix_sensing_asym(std::move(d));
}

ProblemPtr gen_matrix_completion(int n1, int n2, int r, int r_prime, double p,
                                 bool symmetric, double lambda_balance,
                                 const Eigen::VectorXd& sigma_star, std::uint64_t seed) {
  check_sigma(sigma_star);
  if (sigma_star.size() != r) throw std::invalid_argument("sigma_star length must equal r");
  check_ranks(r, r_prime, n1, n2);
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
  if (symmetric && n1 != n2) throw std::invalid_argument("symmetric completion needs n1 == n2");
  Rng rng(seed);
  CompletionData d;
  d.sigma_star = sigma_star;
  d.symmetric = symmetric;
  d.p = p;
  d.lambda_balance = lambda_balance;
  d.r = r;
  d.r_prime = r_prime;
  d.u_star = random_orthonormal(n1, r, rng);
  if (symmetric) {
    d.v_star = d.u_star;
    d.m_star = sym2(d.u_star * sigma_star.asDiagonal() * d.u_star.transpose());
  } else {
    d.v_star = random_orthonormal(n2, r, rng);
    d.m_star = d.u_star * sigma_star.asDiagonal() * d.v_star.transpose();
  }
  // Mask entries drawn row-major after the factors; iid Bernoulli(p).
  d.mask.setZero(n1, n2);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) {
      if (rng.uniform01() < p) {
        d.mask(i, j) = 1.0;
        d.mask_idx.emplace_back(i, j);
      }
    }
  }
  return make_matrix_completion(std::move(d));
}

ProblemPtr gen_one_bit(int n1, int n2, int r, int r_prime, bool symmetric,
                       double lambda_balance, const Eigen::VectorXd& sigma_star,
                       std::uint64_t seed) {
  check_sigma(sigma_star);
  if (sigma_star.size() != r) throw std::invalid_argument("sigma_star length must equal r");
  check_ranks(r, r_prime, n1, n2);
  if (symmetric && n1 != n2) throw std::invalid_argument("symmetric one-bit needs n1 == n2");
  Rng rng(seed);
  OneBitData d;
  d.sigma_star = sigma_star;
  d.symmetric = symmetric;
  d.lambda_balance = lambda_balance;
  d.r = r;
  d.r_prime = r_prime;
  d.u_star = random_orthonormal(n1, r, rng);
  if (symmetric) {
    d.v_star = d.u_star;
    d.m_star = sym2(d.u_star * sigma_star.asDiagonal() * d.u_star.transpose());
  } else {
    d.v_star = random_orthonormal(n2, r, rng);
    d.m_star = d.u_star * sigma_star.asDiagonal() * d.v_star.transpose();
  }
  d.alpha.resize(n1, n2);
  for (int i = 0; i < n1; ++i) {
    for (int j = 0; j < n2; ++j) d.alpha(i, j) = sigmoid(d.m_star(i, j));
  }
  return make_one_bit(std::move(d));
}

ProblemPtr gen_sparse(int d, int n_samples, const Eigen::VectorXd& theta_star,
                      std::uint64_t seed) {
  if (d < 1 || n_samples < 1) throw std::invalid_argument("gen_sparse: d, n_samples >= 1");
  Eigen::VectorXd theta = theta_star;
  if (theta.size() == 0) {
    theta = Eigen::VectorXd::Zero(d);
    const double head[5] = {10.0, -5.0, 3.0, -2.0, 1.0};
    for (int i = 0; i < std::min(d, 5); ++i) theta(i) = head[i];
  }
  if (theta.size() != d) throw std::invalid_argument("theta_star length must equal d");
  Rng rng(seed);
  SparseData data;
  data.theta_star = theta;
  data.design.resize(n_samples, d);
  for (int i = 0; i < n_samples; ++i) {
    for (int j = 0; j < d; ++j) data.design(i, j) = rng.gaussian();
  }
  data.y = data.design * theta;
  for (int j = 0; j < d; ++j) {
    if (theta(j) > 0.0) data.s_plus.push_back(j);
    if (theta(j) < 0.0) data.s_minus.push_back(j);
  }
  return make_sparse(std::move(data));
}

ProblemPtr make_matrix_sensing(MatrixSensingData data) {
  return std::make_unique<MatrixSensingProblem>(std::move(data));
}
ProblemPtr make_matrix_sensing_asym(AsymSensingData data) {
  return std::make_unique<AsymSensingProblem>(std::move(data));
}
ProblemPtr make_matrix_completion(CompletionData data) {
  return std::make_unique<CompletionProblem>(std::move(data));
}
ProblemPtr make_one_bit(OneBitData data) {
  return std::make_unique<OneBitProblem>(std::move(data));
}
ProblemPtr make_sparse(SparseData data) {
  return std::make_unique<SparseProblem>(std::move(data));
}

namespace {
template <typename T>
const T& cast_problem(const Problem& p, ProblemKind want) {
  if (p.kind() != want) {
    throw std::invalid_argument("problem is '" + kind_name(p.kind()) + "', expected '" +
                                kind_name(want) + "'");
  }
  return static_cast<const T&>(p);
}
}  // namespace

const MatrixSensingData& sensing_data(const Problem& p) {
  return cast_problem<MatrixSensingProblem>(p, ProblemKind::matrix_sensing).data();
}
const AsymSensingData& sensing_asym_data(const Problem& p) {
  return cast_problem<AsymSensingProblem>(p, ProblemKind::matrix_sensing_asym).data();
}
const CompletionData& completion_data(const Problem& p) {
  if (p.kind() == ProblemKind::matrix_completion) {
    return static_cast<const CompletionProblem&>(p).data();
  }
  return cast_problem<CompletionProblem>(p, ProblemKind::matrix_completion_asym).data();
}
const OneBitData& one_bit_data(const Problem& p) {
  if (p.kind() == ProblemKind::one_bit) {
    return static_cast<const OneBitProblem&>(p).data();
  }
  return cast_problem<OneBitProblem>(p, ProblemKind::one_bit_asym).data();
}
const SparseData& sparse_data(const Problem& p) {
  return cast_problem<SparseProblem>(p, ProblemKind::sparse_recovery).data();
}

ParamPoint ground_truth_point(const Problem& p) {
  ParamPoint x = p.zero_point();
  switch (p.kind()) {
    case ProblemKind::matrix_sensing: {
      const auto& d = sensing_data(p);
      x.block(0) = padded_factor(d.u_star, d.sigma_star, d.r_prime);
      break;
    }
    case ProblemKind::matrix_sensing_asym: {
      const auto& d = sensing_asym_data(p);
      x.block(0) = padded_factor(d.u_star, d.sigma_star, d.r_prime);
      x.block(1) = padded_factor(d.v_star, d.sigma_star, d.r_prime);
      break;
    }
    case ProblemKind::matrix_completion:
    case ProblemKind::matrix_completion_asym: {
      const auto& d = completion_data(p);
      x.block(0) = padded_factor(d.u_star, d.sigma_star, d.r_prime);
      if (!d.symmetric) x.block(1) = padded_factor(d.v_star, d.sigma_star, d.r_prime);
      break;
    }
    case ProblemKind::one_bit:
    case ProblemKind::one_bit_asym: {
      const auto& d = one_bit_data(p);
      x.block(0) = padded_factor(d.u_star, d.sigma_star, d.r_prime);
      if (!d.symmetric) x.block(1) = padded_factor(d.v_star, d.sigma_star, d.r_prime);
      break;
    }
    case ProblemKind::sparse_recovery: {
      const auto& d = sparse_data(p);
      auto u = x.block(0);
      auto v = x.block(1);
      for (Eigen::Index i = 0; i < d.theta_star.size(); ++i) {
        if (d.theta_star(i) > 0.0) u(i, 0) = std::sqrt(d.theta_star(i));
        if (d.theta_star(i) < 0.0) v(i, 0) = std::sqrt(-d.theta_star(i));
      }
      break;
    }
  }
  return x;
}

// --------------------------------------------------------------------------
// Serialization ("ipgd-problem/1").
// --------------------------------------------------------------------------

namespace {

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected nested array");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j.at(static_cast<size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw std::invalid_argument("ragged nested array");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(static_cast<size_t>(k)).get<double>();
  }
  return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(static_cast<size_t>(i)).get<double>();
  return v;
}

json stack_to_json(const MeasurementStack& s) {
  json mats = json::array();
  for (Eigen::Index i = 0; i < s.count(); ++i) mats.push_back(mat_to_json(s.mat(i)));
  return mats;
}

MeasurementStack stack_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("measurements must be nonempty");
  Eigen::MatrixXd first = mat_from_json(j.at(0));
  MeasurementStack s(first.rows(), first.cols(), static_cast<Eigen::Index>(j.size()));
  s.set_mat(0, first);
  for (size_t i = 1; i < j.size(); ++i) s.set_mat(static_cast<Eigen::Index>(i), mat_from_json(j.at(i)));
  return s;
}

constexpr const char* kProblemFormat = "ipgd-problem/1";

}  // namespace

json problem_to_json(const Problem& p) {
  json j;
  j["format"] = kProblemFormat;
  j["kind"] = kind_name(p.kind());
  switch (p.kind()) {
    case ProblemKind::matrix_sensing: {
      const auto& d = sensing_data(p);
      j["r"] = d.r;
      j["r_prime"] = d.r_prime;
      j["sigma_star"] = vec_to_json(d.sigma_star);
      j["u_star"] = mat_to_json(d.u_star);
      j["m_star"] = mat_to_json(d.m_star);
      j["y"] = vec_to_json(d.y);
      j["measurements"] = stack_to_json(d.stack);
      break;
    }
    case ProblemKind::matrix_sensing_asym: {
      const auto& d = sensing_asym_data(p);
      j["r"] = d.r;
      j["r_prime"] = d.r_prime;
      j["lambda_balance"] = d.lambda_balance;
      j["sigma_star"] = vec_to_json(d.sigma_star);
      j["u_star"] = mat_to_json(d.u_star);
      j["v_star"] = mat_to_json(d.v_star);
      j["m_star"] = mat_to_json(d.m_star);
      j["y"] = vec_to_json(d.y);
      j["measurements"] = stack_to_json(d.stack);
      break;
    }
    case ProblemKind::matrix_completion:
    case ProblemKind::matrix_completion_asym: {
      const auto& d = completion_data(p);
      j["r"] = d.r;
      j["r_prime"] = d.r_prime;
      j["symmetric"] = d.symmetric;
      j["p"] = d.p;
      j["lambda_balance"] = d.lambda_balance;
      j["sigma_star"] = vec_to_json(d.sigma_star);
      j["u_star"] = mat_to_json(d.u_star);
      j["v_star"] = mat_to_json(d.v_star);
      j["m_star"] = mat_to_json(d.m_star);
      json mask = json::array();
      for (const auto& [a, b] : d.mask_idx) mask.push_back(json::array({a, b}));
      j["mask"] = std::move(mask);
      break;
    }
    case ProblemKind::one_bit:
    case ProblemKind::one_bit_asym: {
      const auto& d = one_bit_data(p);
      j["r"] = d.r;
      j["r_prime"] = d.r_prime;
      j["symmetric"] = d.symmetric;
      j["lambda_balance"] = d.lambda_balance;
      j["sigma_star"] = vec_to_json(d.sigma_star);
      j["u_star"] = mat_to_json(d.u_star);
      j["v_star"] = mat_to_json(d.v_star);
      j["m_star"] = mat_to_json(d.m_star);
      j["alpha"] = mat_to_json(d.alpha);
      break;
    }
    case ProblemKind::sparse_recovery: {
      const auto& d = sparse_data(p);
      j["design"] = mat_to_json(d.design);
      j["y"] = vec_to_json(d.y);
      j["theta_star"] = vec_to_json(d.theta_star);
      j["s_plus"] = d.s_plus;
      j["s_minus"] = d.s_minus;
      break;
    }
  }
  return j;
}

ProblemPtr problem_from_json(const json& j) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != kProblemFormat) {
    throw std::invalid_argument(std::string("problem document must declare format '") +
                                kProblemFormat + "'");
  }
  const auto kind = kind_from_name(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("unknown problem kind '" +
                                         j.at("kind").get<std::string>() + "'");
  switch (*kind) {
    case ProblemKind::matrix_sensing: {
      MatrixSensingData d{stack_from_json(j.at("measurements")),
                          mat_from_json(j.at("m_star")), mat_from_json(j.at("u_star")),
                          vec_from_json(j.at("sigma_star")), vec_from_json(j.at("y")),
                          j.at("r").get<int>(), j.at("r_prime").get<int>()};
      return make_matrix_sensing(std::move(d));
    }
    case ProblemKind::matrix_sensing_asym: {
      AsymSensingData d{stack_from_json(j.at("measurements")),
                        mat_from_json(j.at("m_star")), mat_from_json(j.at("u_star")),
                        mat_from_json(j.at("v_star")), vec_from_json(j.at("sigma_star")),
                        vec_from_json(j.at("y")), j.at("lambda_balance").get<double>(),
                        j.at("r").get<int>(), j.at("r_prime").get<int>()};
      return make_matrix_sensing_asym(std::move(d));
    }
    case ProblemKind::matrix_completion:
    case ProblemKind::matrix_completion_asym: {
      CompletionData d;
      d.m_star = mat_from_json(j.at("m_star"));
      d.u_star = mat_from_json(j.at("u_star"));
      d.v_star = mat_from_json(j.at("v_star"));
      d.sigma_star = vec_from_json(j.at("sigma_star"));
      d.symmetric = j.at("symmetric").get<bool>();
      d.p = j.at("p").get<double>();
      d.lambda_balance = j.at("lambda_balance").get<double>();
      d.r = j.at("r").get<int>();
      d.r_prime = j.at("r_prime").get<int>();
      d.mask.setZero(d.m_star.rows(), d.m_star.cols());
      for (const auto& pair : j.at("mask")) {
        const int a = pair.at(0).get<int>(), b = pair.at(1).get<int>();
        d.mask(a, b) = 1.0;
        d.mask_idx.emplace_back(a, b);
      }
      return make_matrix_completion(std::move(d));
    }
    case ProblemKind::one_bit:
    case ProblemKind::one_bit_asym: {
      OneBitData d;
      d.m_star = mat_from_json(j.at("m_star"));
      d.alpha = mat_from_json(j.at("alpha"));
      d.u_star = mat_from_json(j.at("u_star"));
      d.v_star = mat_from_json(j.at("v_star"));
      d.sigma_star = vec_from_json(j.at("sigma_star"));
      d.symmetric = j.at("symmetric").get<bool>();
      d.lambda_balance = j.at("lambda_balance").get<double>();
      d.r = j.at("r").get<int>();
      d.r_prime = j.at("r_prime").get<int>();
      return make_one_bit(std::move(d));
    }
    case ProblemKind::sparse_recovery: {
      SparseData d;
      d.design = mat_from_json(j.at("design"));
      d.y = vec_from_json(j.at("y"));
      d.theta_star = vec_from_json(j.at("theta_star"));
      d.s_plus = j.at("s_plus").get<std::vector<int>>();
      d.s_minus = j.at("s_minus").get<std::vector<int>>();
      return make_sparse(std::move(d));
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace ipgd

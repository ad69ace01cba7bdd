#include "ipgd/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ipgd/optimize.hpp"

namespace ipgd {

namespace {

// Internal stream for the FD probe directions: the checks take no seed, so a
// fixed one keeps them reproducible run to run.
constexpr std::uint64_t kProbeSeed = 0x5eedf00dull;

ParamPoint gaussian_direction(const LayoutPtr& layout, Rng& rng) {
  ParamPoint z(layout);
  for (Eigen::Index i = 0; i < z.dim(); ++i) z.data(i) = rng.gaussian();
  const double n = z.norm();
  if (n > 0.0) z.data /= n;
  return z;
}

}  // namespace

ParamPoint random_point(const Problem& problem, Rng& rng, double scale) {
  ParamPoint x(problem.layout());
  for (Eigen::Index i = 0; i < x.dim(); ++i) x.data(i) = scale * rng.gaussian();
  return x;
}

CheckReport fd_gradient_check(const Problem& problem, const std::vector<ParamPoint>& points,
                              double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_gradient_check: h must be positive");
  CheckReport rep;
  rep.name = "fd_gradient_check";
  rep.threshold = 1e-5;
  Rng rng(kProbeSeed);
  for (const auto& x : points) {
    const double step = h * (1.0 + x.norm());
    const ParamPoint g = problem.gradient(x);
    const double denom = std::max(1.0, g.norm());
    if (problem.dim() <= 500) {
      ParamPoint xp = x, xm = x;
      Eigen::VectorXd fd(problem.dim());
      for (Eigen::Index i = 0; i < problem.dim(); ++i) {
        xp.data(i) = x.data(i) + step;
        xm.data(i) = x.data(i) - step;
        fd(i) = (problem.value(xp) - problem.value(xm)) / (2.0 * step);
        xp.data(i) = x.data(i);
        xm.data(i) = x.data(i);
      }
      rep.max_rel_error = std::max(rep.max_rel_error, (fd - g.data).norm() / denom);
    } else {
      for (int k = 0; k < 30; ++k) {
        const ParamPoint u = gaussian_direction(x.layout, rng);
        ParamPoint xp = x, xm = x;
        xp.data += step * u.data;
        xm.data -= step * u.data;
        const double fd = (problem.value(xp) - problem.value(xm)) / (2.0 * step);
        const double err = std::abs(fd - g.data.dot(u.data)) / denom;
        rep.max_rel_error = std::max(rep.max_rel_error, err);
      }
    }
    ++rep.samples;
  }
  rep.passed = rep.max_rel_error <= rep.threshold;
  return rep;
}

CheckReport fd_hessian_check(const Problem& problem, const std::vector<ParamPoint>& points,
                             double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hessian_check: h must be positive");
  CheckReport rep;
  rep.name = "fd_hessian_check";
  rep.threshold = 1e-4;
  Rng rng(kProbeSeed + 1);
  for (const auto& x : points) {
    const double step = h * (1.0 + x.norm());
    for (int k = 0; k < 3; ++k) {
      const ParamPoint z = gaussian_direction(x.layout, rng);
      const ParamPoint hz = problem.hessian_apply(x, z);
      ParamPoint xp = x, xm = x;
      xp.data += step * z.data;
      xm.data -= step * z.data;
      const Eigen::VectorXd fd =
          (problem.gradient(xp).data - problem.gradient(xm).data) / (2.0 * step);
      const double err = (fd - hz.data).norm() / std::max(1.0, hz.norm());
      rep.max_rel_error = std::max(rep.max_rel_error, err);
      ++rep.samples;
    }
  }
  rep.passed = rep.max_rel_error <= rep.threshold;
  return rep;
}

double estimate_rip(const MeasurementStack& stack, int r, int trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("estimate_rip: trials must be >= 1");
  if (r < 1) throw std::invalid_argument("estimate_rip: r must be >= 1");
  double worst = 0.0;
  Eigen::MatrixXd g1(stack.rows(), r), g2(stack.cols(), r);
  for (int trial = 0; trial < trials; ++trial) {
    for (Eigen::Index i = 0; i < g1.rows(); ++i) {
      for (Eigen::Index j = 0; j < g1.cols(); ++j) g1(i, j) = rng.gaussian();
    }
    for (Eigen::Index i = 0; i < g2.rows(); ++i) {
      for (Eigen::Index j = 0; j < g2.cols(); ++j) g2(i, j) = rng.gaussian();
    }
    Eigen::MatrixXd probe = g1 * g2.transpose();
    const double nrm = probe.norm();
    if (nrm == 0.0) continue;
    probe /= nrm;
    worst = std::max(worst, std::abs(stack.measure(probe).squaredNorm() - 1.0));
  }
  return worst;
}

CheckReport near_isometry_check(const MeasurementStack& stack, int r, int trials,
                                double delta_hat, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("near_isometry_check: trials must be >= 1");
  if (!(delta_hat > 0.0)) {
    throw std::invalid_argument("near_isometry_check: delta_hat must be positive");
  }
  CheckReport rep;
  rep.name = "near_isometry_check_vs_3x_lower_bound";
  rep.threshold = 1.0;
  const double allowance = 3.0 * delta_hat;
  for (int trial = 0; trial < trials; ++trial) {
    const bool low_rank = trial % 2 == 1;
    Eigen::MatrixXd probe;
    if (low_rank) {
      Eigen::MatrixXd g1(stack.rows(), r), g2(stack.cols(), r);
      for (Eigen::Index i = 0; i < g1.size(); ++i) g1(i) = rng.gaussian();
      for (Eigen::Index i = 0; i < g2.size(); ++i) g2(i) = rng.gaussian();
      probe = g1 * g2.transpose();
    } else {
      probe.resize(stack.rows(), stack.cols());
      for (Eigen::Index i = 0; i < probe.size(); ++i) probe(i) = rng.gaussian();
    }
    if (probe.norm() == 0.0) continue;
    const Eigen::MatrixXd defect = stack.adjoint(stack.measure(probe)) - probe;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_defect(defect);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd_probe(probe);
    const double spectral = svd_defect.singularValues()(0);
    const double nuclear = svd_probe.singularValues().sum();
    rep.max_rel_error = std::max(rep.max_rel_error, spectral / (allowance * nuclear));
    if (low_rank) {
      const double frob = probe.norm();
      rep.max_rel_error = std::max(
          rep.max_rel_error, spectral / (allowance * std::sqrt(static_cast<double>(r)) * frob));
    }
    ++rep.samples;
  }
  rep.passed = rep.max_rel_error <= rep.threshold;
  return rep;
}

LipschitzEstimate estimate_local_lipschitz(const Problem& problem, const ParamPoint& center,
                                           double radius, int samples, Rng& rng) {
  if (!(radius > 0.0)) {
    throw std::invalid_argument("estimate_local_lipschitz: radius must be positive");
  }
  if (samples < 1) {
    throw std::invalid_argument("estimate_local_lipschitz: samples must be >= 1");
  }
  LipschitzEstimate est;
  for (int k = 0; k < samples; ++k) {
    ParamPoint x1 = center, x2 = center;
    x1.data += sample_ball(problem.dim(), radius, rng);
    x2.data += sample_ball(problem.dim(), radius, rng);
    const double gap = (x1.data - x2.data).norm();
    if (gap == 0.0) continue;
    const double grad_ratio =
        (problem.gradient(x1).data - problem.gradient(x2).data).norm() / gap;
    const double hess_ratio =
        (problem.dense_hessian(x1) - problem.dense_hessian(x2)).norm() / gap;
    est.l_hat = std::max(est.l_hat, grad_ratio);
    est.rho_hat = std::max(est.rho_hat, hess_ratio);
  }
  return est;
}

}  // namespace ipgd

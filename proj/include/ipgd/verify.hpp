#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ipgd/measurement.hpp"
#include "ipgd/param_point.hpp"
#include "ipgd/problem.hpp"
#include "ipgd/rng.hpp"

namespace ipgd {

struct CheckReport {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  bool passed = false;  // max_rel_error <= threshold
  long long samples = 0;
};

// Random point in the problem's parameter space: i.i.d. Gaussian entries
// scaled by `scale`.
ParamPoint random_point(const Problem& problem, Rng& rng, double scale = 1.0);

// Central-difference check of the analytic gradient at each point. The step
// is h*(1 + ||x||) per point (pass h = 1e-6 for the standard setting). Above
// 500 coordinates the per-coordinate sweep is replaced by 30 random
// directional derivatives. Threshold 1e-5.
CheckReport fd_gradient_check(const Problem& problem, const std::vector<ParamPoint>& points,
                              double h = 1e-6);

// Central-difference check of hessian_apply against the analytic gradient
// along 3 random directions per point; step h*(1 + ||x||), threshold 1e-4.
CheckReport fd_hessian_check(const Problem& problem, const std::vector<ParamPoint>& points,
                             double h = 1e-5);

// Empirical restricted-isometry defect: max over random rank-<= r probes of
// unit Frobenius norm of |  ||measure(X)||^2 - 1 |. A lower bound on the true
// constant (a sampled maximum), and non-decreasing in `trials` for a fixed
// starting stream.
double estimate_rip(const MeasurementStack& stack, int r, int trials, Rng& rng);

// Spot check of the near-isometry of adjoint(measure(.)): for random probes M
// (half unconstrained, half rank <= r) the spectral norm of
// adjoint(measure(M)) - M should stay within delta_hat * (nuclear norm), and
// within sqrt(r) * delta_hat * (Frobenius norm) on the rank-limited probes.
// Diagnostic only: since delta_hat is itself a lower bound, the report uses
// 3 * delta_hat as its allowance, and a failure is a flag rather than an
// error.
CheckReport near_isometry_check(const MeasurementStack& stack, int r, int trials,
                                double delta_hat, Rng& rng);

struct LipschitzEstimate {
  double l_hat = 0.0;    // gradient Lipschitz constant, sampled lower bound
  double rho_hat = 0.0;  // Hessian Lipschitz constant, sampled lower bound
};

// Max gradient- and Hessian-difference ratios over random point pairs in the
// ball around `center`. Both values are empirical lower bounds; rho_hat uses
// dense Hessians and inherits their dimension cap.
LipschitzEstimate estimate_local_lipschitz(const Problem& problem, const ParamPoint& center,
                                           double radius, int samples, Rng& rng);

}  // namespace ipgd

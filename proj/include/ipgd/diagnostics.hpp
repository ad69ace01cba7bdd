#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "ipgd/optimize.hpp"
#include "ipgd/problem.hpp"
#include "ipgd/rng.hpp"

namespace ipgd {

// Curvature seen by the off-region component x-perp of a point, split by sign.
// r_minus aggregates the positive-curvature (contracting) part, r_plus the
// negative-curvature (expanding) part; r = r_minus + 3*r_plus is the combined
// growth rate used by the residual-dynamics bound.
struct DeviationReport {
  double r_minus = 0.0;        // <= 0
  double r_plus = 0.0;         // >= 0
  double r = 0.0;              // r_minus + 3*r_plus
  double residual_norm = 0.0;  // ||x - project(x)||, reported raw
};

// Projects x onto the problem's region, eigendecomposes the dense Hessian
// there, and evaluates the sign-split quadratic forms on x-perp. Points whose
// residual is at rounding scale (<= 64*eps*||x||) report zero rates.
DeviationReport deviation_rate(const Problem& problem, const ParamPoint& x);

// Adapter for the optimizer's sampling hook; the problem must outlive it.
DeviationSampler make_deviation_sampler(const Problem& problem);

// Piecewise-constant integral of the sampled deviation rates from the first
// sample up to time t (rates extend forward; 0 before the first sample).
double cumulative_deviation_at(const std::vector<TraceRecord>& trace, long long t);

// Total over the whole trace: sum of rate * (gap to next sample). Exact when
// every step is sampled. Throws if the trace has no sampled rows.
double cumulative_deviation(const std::vector<TraceRecord>& trace);

struct ResidualBoundReport {
  long long n_checked = 0;     // strict per-step bound evaluations
  long long n_violations = 0;
  double worst_ratio = 0.0;    // max residual / bound over checked steps
  long long n_kick_checked = 0;  // transitions into a perturbation row
  long long n_kick_violations = 0;
  double worst_kick_ratio = 0.0;
};

// Per-step residual-dynamics check over consecutive trace rows: a plain GD
// transition from a sampled row with residual in (res_floor, tau] must obey
//   res' <= (1 + (eta/2) r + (eta rho_hat / 2) res) * res * (1 + 1e-8).
// Transitions into a perturbation row get the kick allowance (+gamma on top
// of the strict bound); transitions into a returned-point row are skipped,
// as are pairs of rows that are not one iteration apart.
ResidualBoundReport residual_bound_check(const std::vector<TraceRecord>& trace, double eta,
                                         double rho_hat, double tau, double gamma,
                                         double res_floor = 0.0);

struct GrowthPoint {
  double eta_rbar = 0.0;    // eta * accumulated deviation rate since base
  double log_growth = 0.0;  // ln(residual at T / residual at base)
  long long t = 0;
  std::string problem_kind;
};

// Residual growth vs accumulated deviation rate, sampled at `sample_count`
// times uniformly spaced between the base row (first perturbation that left
// the region) and the end of the trace. Throws if the trajectory never left
// the region.
std::vector<GrowthPoint> growth_vs_deviation(const std::vector<TraceRecord>& trace,
                                             double eta, int sample_count,
                                             const std::string& kind_tag = "");

// min over square orthogonal O of ||x - y O||_F, same shapes required.
double procrustes_distance(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct EscapeRow {
  double gamma = 0.0;
  int trial = 0;
  long long escape_iters = 0;
  bool escaped = false;
};

struct EscapeTable {
  std::vector<EscapeRow> rows;
  std::vector<std::pair<double, double>> mean_iters;  // (gamma, mean iterations)
  double fit_slope = 0.0;      // mean iterations vs ln(1/gamma)
  double fit_intercept = 0.0;
  double fit_r2 = 0.0;
};

// Kick the point z with each radius, run plain GD until the objective drops
// below f(z) - drop (or `cap` iterations), and fit mean escape time against
// ln(1/gamma).
EscapeTable escape_probe(const Problem& problem, const ParamPoint& z,
                         const std::vector<double>& gammas, int trials, double eta,
                         double drop, long long cap, Rng& rng);

// Numerical rank (or support size) of each factor block after one GD step
// from the projection of each supplied point.
std::vector<std::vector<Eigen::Index>> rank_inflation(const Problem& problem,
                                                      const std::vector<ParamPoint>& points,
                                                      double eta);

}  // namespace ipgd

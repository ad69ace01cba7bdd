#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ipgd/param_point.hpp"
#include "ipgd/problem.hpp"
#include "ipgd/rng.hpp"

namespace ipgd {

enum class OptimizerKind { gd, pgd, ipgd, ipgd_plus };

std::string optimizer_kind_name(OptimizerKind k);
std::optional<OptimizerKind> optimizer_kind_from_name(const std::string& name);

// direct: use grad_threshold / drop_threshold / escape_window as given.
// formula: derive them from (epsilon, chi, rho, delta_f, big_c, gamma, eta, d).
enum class ThresholdMode { direct, formula };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::ipgd;
  double eta = 0.1;             // step size
  double gamma = 1e-15;         // perturbation radius
  double grad_threshold = 1e-7; // G: perturb when the gradient is this small
  double drop_threshold = 1e-10;// F: required objective drop over the window
  long long escape_window = 50; // iterations granted to escape after a kick
  long long refine_steps = 1000;// trailing plain-GD steps (ipgd_plus only)
  long long max_iters = 200000;
  ThresholdMode threshold_mode = ThresholdMode::direct;
  // Formula-mode inputs. delta_f <= 0 means "fill with f(x0) at run start".
  double epsilon = 0.0;
  double chi = 0.0;
  double rho = 0.0;
  double delta_f = 0.0;
  double big_c = 4.0;
  // gd/pgd only: stop once the gradient norm falls below this outside any
  // escape window; 0 disables the stop.
  double stop_grad_norm = 0.0;
  long long log_every = 1;      // trace row cadence
  long long hessian_every = 25; // deviation-rate sampling cadence
};

// Resolved perturbation thresholds actually used by a run.
struct Thresholds {
  double drop = 0.0;             // F
  double grad = 0.0;             // G
  long long escape_window = 0;   // T, after rounding up
  double escape_window_raw = 0.0;
};

// drop = eps^{3/2} / (C sqrt(rho) (ln^3(1/gamma) + ln^3(rho d delta_f/(chi eps))))
// grad = eps / (C ln^2(1/gamma))
// escape_window = ceil( (C / (eta sqrt(rho eps))) (ln(1/gamma) + ln(rho d delta_f/(chi eps))) )
// Natural logarithms throughout.
Thresholds formula_thresholds(double epsilon, double gamma, double eta, double rho,
                              double delta_f, double chi, Eigen::Index d, double big_c);

enum class TraceEvent { init, gd, perturb, ret, refine };

std::string trace_event_name(TraceEvent e);

struct TraceRecord {
  long long t = 0;
  TraceEvent event = TraceEvent::init;
  double f = 0.0;
  double grad_norm = 0.0;
  double residual_norm = 0.0;  // distance to the problem's implicit region
  double dist_solution = 0.0;
  std::optional<double> deviation_rate;  // filled at hessian_every cadence
  std::optional<double> cum_deviation;   // running integral of the rate
};

enum class TerminationReason { drop_threshold, max_iters, grad_converged };

std::string termination_name(TerminationReason r);

struct RunResult {
  ParamPoint output;  // drop-threshold exits return the saved pre-kick point
  std::vector<TraceRecord> trace;
  long long n_perturbations = 0;
  TerminationReason terminated_by = TerminationReason::max_iters;
  Thresholds resolved;  // thresholds the run actually used
};

// Optional per-point deviation-rate probe (costs a dense eigendecomposition;
// supplied by the diagnostics layer). Null leaves the deviation columns empty.
using DeviationSampler = std::function<double(const ParamPoint&)>;

// Raised when the objective blows up (non-finite, or above 1e12*f(x0)+1e12).
// Carries the rows recorded before the blow-up so callers can inspect them.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, std::vector<TraceRecord> partial, long long t);
  const std::vector<TraceRecord>& partial_trace() const { return partial_; }
  long long t() const { return t_; }

 private:
  std::vector<TraceRecord> partial_;
  long long t_;
};

// Uniform draw from the Euclidean ball of the given radius: scale a random
// direction by radius * u^{1/dim}. Radius 0 returns the zero vector without
// consuming randomness. Norm never exceeds the radius.
Eigen::VectorXd sample_ball(Eigen::Index dim, double radius, Rng& rng);

RunResult gd_run(const Problem& problem, const OptimizerConfig& config,
                 const ParamPoint& x0, const DeviationSampler& sampler = nullptr);
RunResult pgd_run(const Problem& problem, const OptimizerConfig& config,
                  const ParamPoint& x0, Rng& rng, const DeviationSampler& sampler = nullptr);
RunResult ipgd_run(const Problem& problem, const OptimizerConfig& config,
                   const ParamPoint& x0, Rng& rng, const DeviationSampler& sampler = nullptr);
RunResult ipgd_plus_run(const Problem& problem, const OptimizerConfig& config,
                        const ParamPoint& x0, Rng& rng,
                        const DeviationSampler& sampler = nullptr);

// Dispatch on config.kind.
RunResult run_optimizer(const Problem& problem, const OptimizerConfig& config,
                        const ParamPoint& x0, Rng& rng,
                        const DeviationSampler& sampler = nullptr);

}  // namespace ipgd

#include "ipgd/optimize.hpp"

#include <cmath>
#include <utility>

#include "ipgd/region.hpp"

namespace ipgd {

std::string optimizer_kind_name(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::pgd: return "pgd";
    case OptimizerKind::ipgd: return "ipgd";
    case OptimizerKind::ipgd_plus: return "ipgd_plus";
  }
  return "?";
}

std::optional<OptimizerKind> optimizer_kind_from_name(const std::string& name) {
  if (name == "gd") return OptimizerKind::gd;
  if (name == "pgd") return OptimizerKind::pgd;
  if (name == "ipgd") return OptimizerKind::ipgd;
  if (name == "ipgd_plus") return OptimizerKind::ipgd_plus;
  return std::nullopt;
}

std::string trace_event_name(TraceEvent e) {
  switch (e) {
    case TraceEvent::init: return "init";
    case TraceEvent::gd: return "gd";
    case TraceEvent::perturb: return "perturb";
    case TraceEvent::ret: return "return";
    case TraceEvent::refine: return "refine";
  }
  return "?";
}

std::string termination_name(TerminationReason r) {
  switch (r) {
    case TerminationReason::drop_threshold: return "drop_threshold";
    case TerminationReason::max_iters: return "max_iters";
    case TerminationReason::grad_converged: return "grad_converged";
  }
  return "?";
}

DivergenceError::DivergenceError(const std::string& msg, std::vector<TraceRecord> partial,
                                 long long t)
    : std::runtime_error(msg), partial_(std::move(partial)), t_(t) {}

Thresholds formula_thresholds(double epsilon, double gamma, double eta, double rho,
                              double delta_f, double chi, Eigen::Index d, double big_c) {
  auto require_pos = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw std::invalid_argument(std::string("formula_thresholds: ") + name +
                                  " must be positive");
    }
  };
  require_pos(epsilon, "epsilon");
  require_pos(gamma, "gamma");
  require_pos(eta, "eta");
  require_pos(rho, "rho");
  require_pos(delta_f, "delta_f");
  require_pos(chi, "chi");
  require_pos(big_c, "big_c");
  if (d <= 0) throw std::invalid_argument("formula_thresholds: d must be positive");
  if (gamma >= 1.0) throw std::invalid_argument("formula_thresholds: gamma must be < 1");

  const double lg = std::log(1.0 / gamma);
  const double lt = std::log(rho * static_cast<double>(d) * delta_f / (chi * epsilon));
  const double cubes = lg * lg * lg + lt * lt * lt;
  const double lin = lg + lt;
  if (!(cubes > 0.0) || !(lin > 0.0)) {
    throw std::invalid_argument(
        "formula_thresholds: log terms are nonpositive; inputs too degenerate");
  }
  Thresholds th;
  th.drop = std::pow(epsilon, 1.5) / (big_c * std::sqrt(rho) * cubes);
  th.grad = epsilon / (big_c * (lg * lg));
  th.escape_window_raw = big_c / (eta * std::sqrt(rho * epsilon)) * lin;
  th.escape_window = static_cast<long long>(std::ceil(th.escape_window_raw));
  if (th.escape_window < 1) th.escape_window = 1;
  return th;
}

Eigen::VectorXd sample_ball(Eigen::Index dim, double radius, Rng& rng) {
  if (dim <= 0) throw std::invalid_argument("sample_ball: dim must be positive");
  if (radius < 0.0) throw std::invalid_argument("sample_ball: radius must be >= 0");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dim);
  if (radius == 0.0) return out;
  double nrm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) out(i) = rng.gaussian();
    nrm = out.norm();
  } while (nrm == 0.0);
  const double u = rng.uniform01();
  out *= radius * std::pow(u, 1.0 / static_cast<double>(dim)) / nrm;
  const double check = out.norm();
  if (check > radius) out *= radius / check;  // guard the <= radius contract
  return out;
}

namespace {

void validate_config(const OptimizerConfig& cfg) {
  if (!(cfg.eta >= 0.0)) throw std::invalid_argument("optimizer: eta must be >= 0");
  if (!(cfg.gamma >= 0.0)) throw std::invalid_argument("optimizer: gamma must be >= 0");
  if (cfg.max_iters < 1) throw std::invalid_argument("optimizer: max_iters must be >= 1");
  if (cfg.escape_window < 1) throw std::invalid_argument("optimizer: escape_window must be >= 1");
  if (cfg.refine_steps < 0) throw std::invalid_argument("optimizer: refine_steps must be >= 0");
  if (cfg.log_every < 1) throw std::invalid_argument("optimizer: log_every must be >= 1");
  if (cfg.hessian_every < 1) throw std::invalid_argument("optimizer: hessian_every must be >= 1");
  if (cfg.stop_grad_norm < 0.0) {
    throw std::invalid_argument("optimizer: stop_grad_norm must be >= 0");
  }
}

Thresholds resolve_thresholds(const OptimizerConfig& cfg, const Problem& problem,
                              const ParamPoint& x0) {
  if (cfg.threshold_mode == ThresholdMode::direct) {
    Thresholds th;
    th.drop = cfg.drop_threshold;
    th.grad = cfg.grad_threshold;
    th.escape_window = cfg.escape_window;
    th.escape_window_raw = static_cast<double>(cfg.escape_window);
    if (!(th.drop >= 0.0) || !(th.grad >= 0.0)) {
      throw std::invalid_argument("optimizer: direct thresholds must be >= 0");
    }
    return th;
  }
  const double delta_f = cfg.delta_f > 0.0 ? cfg.delta_f : problem.value(x0);
  return formula_thresholds(cfg.epsilon, cfg.gamma, cfg.eta, cfg.rho, delta_f, cfg.chi,
                            problem.dim(), cfg.big_c);
}

// One engine drives all four loop variants; flags select the active tests.
RunResult engine_run(const Problem& problem, const OptimizerConfig& cfg,
                     const ParamPoint& x0, Rng* rng, const DeviationSampler& sampler) {
  validate_config(cfg);
  if (*x0.layout != *problem.layout()) {
    throw std::invalid_argument("optimizer: x0 layout does not match the problem");
  }
  const bool want_perturb =
      cfg.kind == OptimizerKind::ipgd || cfg.kind == OptimizerKind::ipgd_plus ||
      (cfg.kind == OptimizerKind::pgd && cfg.gamma > 0.0);
  const bool want_drop_return =
      cfg.kind == OptimizerKind::ipgd || cfg.kind == OptimizerKind::ipgd_plus;
  const bool want_stop =
      (cfg.kind == OptimizerKind::gd || cfg.kind == OptimizerKind::pgd) &&
      cfg.stop_grad_norm > 0.0;
  if (want_perturb && rng == nullptr) {
    throw std::invalid_argument("optimizer: perturbed runs need a random stream");
  }

  const Thresholds th = resolve_thresholds(cfg, problem, x0);

  RunResult res{x0, {}, 0, TerminationReason::max_iters, th};
  ParamPoint x = x0;
  const double f0 = problem.value(x0);
  const double blowup = 1e12 * f0 + 1e12;

  long long t_noise = -th.escape_window - 1;
  ParamPoint z = x0;  // pre-kick save slot
  double f_z = 0.0, gn_z = 0.0;
  bool have_z = false;

  // Deviation-rate accumulator: piecewise-constant extension of the sampled
  // rates, advanced sample-to-sample.
  bool have_sample = false;
  long long last_sample_t = 0;
  double last_sample_rate = 0.0;
  double cum = 0.0;

  auto check_alive = [&](double f, const ParamPoint& pt, long long t) {
    if (!std::isfinite(f) || !pt.data.allFinite() || f > blowup) {
      throw DivergenceError("objective blew up at t=" + std::to_string(t) +
                                " (f=" + std::to_string(f) + ", start f=" +
                                std::to_string(f0) + ")",
                            std::move(res.trace), t);
    }
  };

  auto emit = [&](long long t, TraceEvent ev, const ParamPoint& pt, double f, double gn,
                  bool force) {
    const bool sample = sampler && ev != TraceEvent::ret && (t % cfg.hessian_every == 0);
    if (!force && !sample && (t % cfg.log_every != 0)) return;
    TraceRecord rec;
    rec.t = t;
    rec.event = ev;
    rec.f = f;
    rec.grad_norm = gn;
    rec.residual_norm = region_residual_norm(problem.region(), pt);
    rec.dist_solution = problem.distance_to_solutions(pt);
    if (sample) {
      const double rate = sampler(pt);
      if (have_sample) cum += last_sample_rate * static_cast<double>(t - last_sample_t);
      have_sample = true;
      last_sample_t = t;
      last_sample_rate = rate;
      rec.deviation_rate = rate;
      rec.cum_deviation = cum;
    }
    res.trace.push_back(std::move(rec));
  };

  bool finished = false;
  for (long long t = 0; !finished; ++t) {
    double f = problem.value(x);
    ParamPoint g = problem.gradient(x);
    double gn = g.norm();
    check_alive(f, x, t);

    TraceEvent ev = t == 0 ? TraceEvent::init : TraceEvent::gd;
    bool force = t == 0;

    // Hard cap first: the final iterate is reported un-kicked.
    if (t >= cfg.max_iters) {
      emit(t, ev, x, f, gn, true);
      res.output = x;
      res.terminated_by = TerminationReason::max_iters;
      finished = true;
      break;
    }

    // Kick test: small gradient and no escape window pending.
    if (want_perturb && gn <= th.grad && t - t_noise > th.escape_window) {
      z = x;
      f_z = f;
      gn_z = gn;
      have_z = true;
      x.data += sample_ball(problem.dim(), cfg.gamma, *rng);
      t_noise = t;
      ++res.n_perturbations;
      ev = TraceEvent::perturb;
      force = true;
      f = problem.value(x);
      g = problem.gradient(x);
      gn = g.norm();
      check_alive(f, x, t);
    }

    // Window verdict: insufficient drop certifies the saved point and exits.
    if (want_drop_return && have_z && t - t_noise == th.escape_window &&
        f - f_z >= -th.drop) {
      // The row carries the returned point's state so the trace ends on it.
      emit(t, TraceEvent::ret, z, f_z, gn_z, true);
      res.output = z;
      res.terminated_by = TerminationReason::drop_threshold;
      finished = true;
      break;
    }

    // Plain convergence stop, suppressed inside an escape window.
    if (want_stop && gn <= cfg.stop_grad_norm && t - t_noise > th.escape_window) {
      emit(t, ev, x, f, gn, true);
      res.output = x;
      res.terminated_by = TerminationReason::grad_converged;
      finished = true;
      break;
    }

    emit(t, ev, x, f, gn, force);
    x.data -= cfg.eta * g.data;
  }

  if (cfg.kind == OptimizerKind::ipgd_plus && cfg.refine_steps > 0) {
    long long t = res.trace.back().t;
    x = res.output;
    double f = problem.value(x);
    ParamPoint g = problem.gradient(x);
    check_alive(f, x, t);
    for (long long k = 1; k <= cfg.refine_steps; ++k) {
      x.data -= cfg.eta * g.data;
      ++t;
      f = problem.value(x);
      g = problem.gradient(x);
      check_alive(f, x, t);
      emit(t, TraceEvent::refine, x, f, g.norm(), k == cfg.refine_steps);
    }
    res.output = x;
  }
  return res;
}

void require_kind(const OptimizerConfig& cfg, OptimizerKind want, const char* fn) {
  if (cfg.kind != want) {
    throw std::invalid_argument(std::string(fn) + ": config.kind must be " +
                                optimizer_kind_name(want));
  }
}

}  // namespace

RunResult gd_run(const Problem& problem, const OptimizerConfig& config, const ParamPoint& x0,
                 const DeviationSampler& sampler) {
  require_kind(config, OptimizerKind::gd, "gd_run");
  return engine_run(problem, config, x0, nullptr, sampler);
}

RunResult pgd_run(const Problem& problem, const OptimizerConfig& config, const ParamPoint& x0,
                  Rng& rng, const DeviationSampler& sampler) {
  require_kind(config, OptimizerKind::pgd, "pgd_run");
  return engine_run(problem, config, x0, &rng, sampler);
}

RunResult ipgd_run(const Problem& problem, const OptimizerConfig& config, const ParamPoint& x0,
                   Rng& rng, const DeviationSampler& sampler) {
  require_kind(config, OptimizerKind::ipgd, "ipgd_run");
  return engine_run(problem, config, x0, &rng, sampler);
}

RunResult ipgd_plus_run(const Problem& problem, const OptimizerConfig& config,
                        const ParamPoint& x0, Rng& rng, const DeviationSampler& sampler) {
  require_kind(config, OptimizerKind::ipgd_plus, "ipgd_plus_run");
  return engine_run(problem, config, x0, &rng, sampler);
}

RunResult run_optimizer(const Problem& problem, const OptimizerConfig& config,
                        const ParamPoint& x0, Rng& rng, const DeviationSampler& sampler) {
  switch (config.kind) {
    case OptimizerKind::gd: return gd_run(problem, config, x0, sampler);
    case OptimizerKind::pgd: return pgd_run(problem, config, x0, rng, sampler);
    case OptimizerKind::ipgd: return ipgd_run(problem, config, x0, rng, sampler);
    case OptimizerKind::ipgd_plus: return ipgd_plus_run(problem, config, x0, rng, sampler);
  }
  throw std::logic_error("unreachable");
}

}  // namespace ipgd

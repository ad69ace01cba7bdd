#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ipgd/optimize.hpp"
#include "ipgd/problems.hpp"

using namespace ipgd;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// f(x) = (2x^2 - 18)^2 / 4 on a single parameter: minima at +-3, strict
// saddle at 0 with curvature -36. Small enough that every run is instant.
ProblemPtr scalar_quartic() {
  MatrixSensingData d{MeasurementStack(1, 1, 1)};
  d.stack.set_mat(0, Eigen::MatrixXd::Constant(1, 1, 2.0));
  d.m_star = Eigen::MatrixXd::Constant(1, 1, 9.0);
  d.u_star = Eigen::MatrixXd::Constant(1, 1, 1.0);
  d.sigma_star = vec1(9.0);
  d.y = vec1(18.0);
  d.r = 1;
  d.r_prime = 1;
  return make_matrix_sensing(std::move(d));
}

ParamPoint point1(const Problem& p, double x) {
  ParamPoint pt = p.zero_point();
  pt.data(0) = x;
  return pt;
}

}  // namespace

TEST_CASE("ball sampler respects the radius and the radial law") {
  Rng rng(17);
  const double radius = 2.5;
  const Eigen::Index dim = 5;
  double mean_ratio = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = sample_ball(dim, radius, rng);
    REQUIRE(x.size() == dim);
    REQUIRE(x.norm() <= radius);
    mean_ratio += x.norm() / radius;
  }
  mean_ratio /= n;
  // E[||x||/r] = dim/(dim+1); sd of the mean at 20000 draws is ~1e-3.
  const double expect = static_cast<double>(dim) / (dim + 1);
  CHECK(std::abs(mean_ratio - expect) < 3.5e-3);

  // Radius zero consumes no randomness and returns the exact origin.
  Rng a(99), b(99);
  Eigen::VectorXd z = sample_ball(dim, 0.0, a);
  CHECK(z.isZero(0.0));
  CHECK(a.next_u64() == b.next_u64());

  // Same seed, same draw.
  Rng c(5), d(5);
  CHECK((sample_ball(8, 1.0, c) - sample_ball(8, 1.0, d)).norm() == 0.0);

  CHECK_THROWS(sample_ball(0, 1.0, rng));
  CHECK_THROWS(sample_ball(3, -1.0, rng));
}

TEST_CASE("threshold formulas reproduce hand-evaluated values") {
  // eps=1e-2, gamma=1e-3, eta=0.1, rho=1, delta_f=1, chi=0.1, d=10, C=4.
  Thresholds th = formula_thresholds(1e-2, 1e-3, 0.1, 1.0, 1.0, 0.1, 10, 4.0);
  CHECK(th.drop == doctest::Approx(2.2503576712789004e-07).epsilon(1e-12));
  CHECK(th.grad == doctest::Approx(5.2392138058781654e-05).epsilon(1e-12));
  CHECK(th.escape_window_raw == doctest::Approx(6447.2382603833275).epsilon(1e-12));
  CHECK(th.escape_window == 6448);

  CHECK_THROWS(formula_thresholds(0.0, 1e-3, 0.1, 1.0, 1.0, 0.1, 10, 4.0));
  CHECK_THROWS(formula_thresholds(1e-2, 1.5, 0.1, 1.0, 1.0, 0.1, 10, 4.0));
  CHECK_THROWS(formula_thresholds(1e-2, 1e-3, 0.1, 1.0, 1.0, 0.1, 0, 4.0));
}

TEST_CASE("plain descent converges and records a clean trace") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gd;
  cfg.eta = 0.01;
  cfg.stop_grad_norm = 1e-12;
  cfg.max_iters = 10000;

  RunResult res = gd_run(*prob, cfg, point1(*prob, 2.5));
  CHECK(res.terminated_by == TerminationReason::grad_converged);
  CHECK(prob->distance_to_solutions(res.output) <= 1e-10);
  CHECK(res.n_perturbations == 0);

  REQUIRE(res.trace.size() >= 2);
  CHECK(res.trace.front().event == TraceEvent::init);
  CHECK(res.trace.front().t == 0);
  for (size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].t == res.trace[i - 1].t + 1);  // log_every=1: every step
    CHECK(res.trace[i].f <= res.trace[i - 1].f);      // descent at this step size
    CHECK(res.trace[i].event == TraceEvent::gd);
  }
}

TEST_CASE("perturbed descent with zero radius walks exactly like plain descent") {
  auto prob = scalar_quartic();
  OptimizerConfig gd_cfg;
  gd_cfg.kind = OptimizerKind::gd;
  gd_cfg.eta = 0.01;
  gd_cfg.max_iters = 300;

  OptimizerConfig pgd_cfg = gd_cfg;
  pgd_cfg.kind = OptimizerKind::pgd;
  pgd_cfg.gamma = 0.0;

  Rng rng(1);
  RunResult a = gd_run(*prob, gd_cfg, point1(*prob, 2.5));
  RunResult b = pgd_run(*prob, pgd_cfg, point1(*prob, 2.5), rng);
  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].f == b.trace[i].f);  // bitwise equality, not approximate
    CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
  }
  CHECK(a.output.data == b.output.data);
}

TEST_CASE("the kick-and-verify loop leaves the saddle and certifies the minimum") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::ipgd;
  cfg.eta = 0.01;
  cfg.gamma = 1e-3;
  cfg.grad_threshold = 1e-7;
  cfg.drop_threshold = 1e-10;
  cfg.escape_window = 80;
  cfg.max_iters = 100000;

  Rng rng(3);
  RunResult res = ipgd_run(*prob, cfg, prob->zero_point(), rng);

  // Start is the saddle: the first kick happens at t=0, the objective falls
  // within the window, the run descends to a minimum, and the next window
  // fails to improve, returning the saved point.
  CHECK(res.terminated_by == TerminationReason::drop_threshold);
  CHECK(res.n_perturbations >= 2);
  CHECK(prob->distance_to_solutions(res.output) <= 1e-6);
  CHECK(res.trace.front().event == TraceEvent::perturb);
  CHECK(res.trace.back().event == TraceEvent::ret);
  // The returned row restates the saved point, not the kicked probe.
  CHECK(res.trace.back().dist_solution ==
        doctest::Approx(prob->distance_to_solutions(res.output)));
  CHECK(res.resolved.escape_window == 80);
}

TEST_CASE("a saddle start without enough window is certified as stationary") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::ipgd;
  cfg.eta = 0.01;
  cfg.gamma = 1e-15;  // kick too small to escape curvature -36 in 3 steps
  cfg.grad_threshold = 1e-7;
  cfg.drop_threshold = 1e-10;
  cfg.escape_window = 3;
  cfg.max_iters = 100000;

  Rng rng(4);
  RunResult res = ipgd_run(*prob, cfg, prob->zero_point(), rng);
  CHECK(res.terminated_by == TerminationReason::drop_threshold);
  // The saved point is the unkicked origin.
  CHECK(res.output.data(0) == 0.0);
  CHECK(res.trace.back().t <= 4);
}

TEST_CASE("trailing refinement appends descent steps after the certificate") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::ipgd_plus;
  cfg.eta = 0.01;
  cfg.gamma = 1e-3;
  cfg.grad_threshold = 1e-7;
  cfg.drop_threshold = 1e-10;
  cfg.escape_window = 80;
  cfg.refine_steps = 7;
  cfg.max_iters = 100000;

  Rng rng(3);
  RunResult plus = ipgd_plus_run(*prob, cfg, prob->zero_point(), rng);
  CHECK(plus.terminated_by == TerminationReason::drop_threshold);

  int refine_rows = 0;
  for (const auto& rec : plus.trace) refine_rows += rec.event == TraceEvent::refine;
  CHECK(refine_rows == 7);
  CHECK(plus.trace.back().event == TraceEvent::refine);

  // With zero refinement the result is bitwise the base algorithm's.
  OptimizerConfig base_cfg = cfg;
  base_cfg.refine_steps = 0;
  Rng rng2(3);
  RunResult base = ipgd_plus_run(*prob, base_cfg, prob->zero_point(), rng2);
  OptimizerConfig ipgd_cfg = base_cfg;
  ipgd_cfg.kind = OptimizerKind::ipgd;
  Rng rng3(3);
  RunResult plain = ipgd_run(*prob, ipgd_cfg, prob->zero_point(), rng3);
  CHECK(base.output.data == plain.output.data);
  CHECK(base.trace.size() == plain.trace.size());

  // Refinement can only lower the objective from the certified point.
  CHECK(prob->value(plus.output) <= prob->value(base.output));
}

TEST_CASE("runs replay bit-for-bit under the same seed") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::ipgd;
  cfg.eta = 0.01;
  cfg.gamma = 1e-3;
  cfg.grad_threshold = 1e-7;
  cfg.drop_threshold = 1e-10;
  cfg.escape_window = 80;
  cfg.max_iters = 100000;

  Rng r1(11), r2(11), r3(12);
  RunResult a = ipgd_run(*prob, cfg, prob->zero_point(), r1);
  RunResult b = ipgd_run(*prob, cfg, prob->zero_point(), r2);
  RunResult c = ipgd_run(*prob, cfg, prob->zero_point(), r3);

  REQUIRE(a.trace.size() == b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].f == b.trace[i].f);
    CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
  }
  CHECK(a.output.data == b.output.data);

  // A different seed kicks in different directions somewhere.
  bool differs = a.trace.size() != c.trace.size();
  for (size_t i = 0; !differs && i < a.trace.size(); ++i) {
    differs = a.trace[i].f != c.trace[i].f;
  }
  CHECK(differs);
}

TEST_CASE("blow-ups raise a divergence error carrying the partial trace") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gd;
  cfg.eta = 1.0;  // far past 2/L for this quartic: divergence is immediate
  cfg.max_iters = 1000;

  try {
    gd_run(*prob, cfg, point1(*prob, 2.5));
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.t() > 0);
    REQUIRE(!e.partial_trace().empty());
    CHECK(e.partial_trace().back().f > e.partial_trace().front().f);
  }
}

TEST_CASE("iteration caps end the run with the unkicked final iterate") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gd;
  cfg.eta = 0.001;
  cfg.max_iters = 5;

  RunResult res = gd_run(*prob, cfg, point1(*prob, 2.5));
  CHECK(res.terminated_by == TerminationReason::max_iters);
  CHECK(res.trace.back().t == 5);
}

TEST_CASE("log cadence thins the trace but always keeps forced rows") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gd;
  cfg.eta = 0.001;
  cfg.max_iters = 100;
  cfg.log_every = 30;

  RunResult res = gd_run(*prob, cfg, point1(*prob, 2.5));
  // Rows at t = 0, 30, 60, 90 plus the forced final row at t = 100.
  REQUIRE(res.trace.size() == 5);
  CHECK(res.trace[1].t == 30);
  CHECK(res.trace.back().t == 100);
}

TEST_CASE("configuration errors are rejected before any work") {
  auto prob = scalar_quartic();
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::gd;
  cfg.eta = -0.1;
  CHECK_THROWS(gd_run(*prob, cfg, prob->zero_point()));
  cfg.eta = 0.1;
  cfg.max_iters = 0;
  CHECK_THROWS(gd_run(*prob, cfg, prob->zero_point()));
  cfg.max_iters = 10;
  cfg.kind = OptimizerKind::ipgd;
  CHECK_THROWS(gd_run(*prob, cfg, prob->zero_point()));  // kind mismatch

  // Layout mismatch between the start point and the problem.
  cfg.kind = OptimizerKind::gd;
  auto other = gen_sparse(4, 6, Eigen::VectorXd(), 1);
  CHECK_THROWS(gd_run(*prob, cfg, other->zero_point()));
}

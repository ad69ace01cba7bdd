#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ipgd/problems.hpp"
#include "ipgd/verify.hpp"
#include <nlohmann/json.hpp>

using namespace ipgd;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v << a;
  return v;
}

// One measurement matrix [2], target value 9 planted through factor 3 of a
// 1x1 signal: every derivative is checkable by hand.
ProblemPtr scalar_sensing() {
  MatrixSensingData d{MeasurementStack(1, 1, 1)};
  d.stack.set_mat(0, Eigen::MatrixXd::Constant(1, 1, 2.0));
  d.m_star = Eigen::MatrixXd::Constant(1, 1, 9.0);
  d.u_star = Eigen::MatrixXd::Constant(1, 1, 1.0);
  d.sigma_star = vec1(9.0);
  d.y = vec1(18.0);  // <A, M*> = 2 * 9
  d.r = 1;
  d.r_prime = 1;
  return make_matrix_sensing(std::move(d));
}

// One sample x = [3], signal theta* = [4] carried by the first layer alone.
ProblemPtr scalar_sparse() {
  SparseData d;
  d.design = Eigen::MatrixXd::Constant(1, 1, 3.0);
  d.theta_star = vec1(4.0);
  d.y = vec1(12.0);
  d.s_plus = {0};
  d.s_minus = {};
  return make_sparse(std::move(d));
}

ParamPoint point1(const Problem& p, double x) {
  ParamPoint pt = p.zero_point();
  pt.data(0) = x;
  return pt;
}

}  // namespace

TEST_CASE("scalar quartic instance matches hand-computed derivatives") {
  auto prob = scalar_sensing();
  ParamPoint x = point1(*prob, 1.5);

  // f(x) = (2x^2 - 18)^2 / 4, f'(x) = 2x(2x^2 - 18), f''(x) = 12x^2 - 36.
  CHECK(prob->value(x) == doctest::Approx(45.5625).epsilon(1e-14));
  CHECK(prob->gradient(x).data(0) == doctest::Approx(-40.5).epsilon(1e-14));

  ParamPoint z = point1(*prob, 1.0);
  CHECK(prob->hessian_apply(x, z).data(0) == doctest::Approx(-9.0).epsilon(1e-12));

  Eigen::MatrixXd h = prob->dense_hessian(x);
  REQUIRE(h.rows() == 1);
  CHECK(h(0, 0) == doctest::Approx(-9.0).epsilon(1e-12));

  // The origin is a strict saddle: f''(0) = -36.
  ParamPoint zero = prob->zero_point();
  CHECK(prob->dense_hessian(zero)(0, 0) == doctest::Approx(-36.0).epsilon(1e-12));
  CHECK(prob->gradient(zero).data(0) == doctest::Approx(0.0));

  // Distance is measured between factors after sign alignment: |1.5 - 3|.
  CHECK(prob->distance_to_solutions(x) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(prob->value(point1(*prob, 3.0)) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(prob->value(point1(*prob, -3.0)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("scalar two-layer instance matches hand-computed derivatives") {
  auto prob = scalar_sparse();
  ParamPoint p = prob->zero_point();
  p.block("u")(0) = 1.0;
  p.block("v")(0) = 0.5;

  // f(u, v) = (12 - 3(u^2 - v^2))^2 at (1, 0.5): residual 9.75.
  CHECK(prob->value(p) == doctest::Approx(95.0625).epsilon(1e-14));
  ParamPoint g = prob->gradient(p);
  CHECK(g.block("u")(0) == doctest::Approx(-117.0).epsilon(1e-13));
  CHECK(g.block("v")(0) == doctest::Approx(58.5).epsilon(1e-13));

  ParamPoint z = prob->zero_point();
  z.data.setOnes();
  ParamPoint hz = prob->hessian_apply(p, z);
  CHECK(hz.block("u")(0) == doctest::Approx(-81.0).epsilon(1e-12));
  CHECK(hz.block("v")(0) == doctest::Approx(99.0).epsilon(1e-12));

  // theta(p) = 0.75, so the signal error is |0.75 - 4|.
  CHECK(prob->distance_to_solutions(p) == doctest::Approx(3.25).epsilon(1e-14));
  // v = 0.5 sits outside its (empty) support.
  CHECK(region_residual_norm(prob->region(), p) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("kind names round-trip") {
  const std::vector<ProblemKind> kinds = {
      ProblemKind::matrix_sensing,     ProblemKind::matrix_sensing_asym,
      ProblemKind::matrix_completion,  ProblemKind::matrix_completion_asym,
      ProblemKind::one_bit,            ProblemKind::one_bit_asym,
      ProblemKind::sparse_recovery};
  for (ProblemKind k : kinds) {
    auto back = kind_from_name(kind_name(k));
    REQUIRE(back.has_value());
    CHECK(*back == k);
  }
  CHECK(!kind_from_name("nonsense").has_value());
  CHECK(kind_is_symmetric_lowrank(ProblemKind::matrix_sensing));
  CHECK(kind_is_asym_lowrank(ProblemKind::one_bit_asym));
  CHECK(!kind_is_symmetric_lowrank(ProblemKind::sparse_recovery));
}

namespace {

std::vector<ProblemPtr> small_instances() {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  std::vector<ProblemPtr> out;
  out.push_back(gen_matrix_sensing(6, 2, 3, 40, sig, 101));
  out.push_back(gen_matrix_sensing_asym(6, 5, 2, 3, 40, 0.25, sig, 102));
  out.push_back(gen_matrix_completion(6, 6, 2, 3, 0.8, true, 0.25, sig, 103));
  out.push_back(gen_matrix_completion(6, 5, 2, 3, 0.8, false, 0.25, sig, 104));
  out.push_back(gen_one_bit(6, 6, 2, 3, true, 0.25, sig, 105));
  out.push_back(gen_one_bit(6, 5, 2, 3, false, 0.25, sig, 106));
  out.push_back(gen_sparse(12, 30, Eigen::VectorXd(), 107));
  return out;
}

}  // namespace

TEST_CASE("analytic derivatives agree with finite differences on every family") {
  Rng rng(2024);
  for (const auto& prob : small_instances()) {
    std::vector<ParamPoint> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(random_point(*prob, rng, 0.8));
    auto grad_rep = fd_gradient_check(*prob, pts);
    INFO(kind_name(prob->kind()), " gradient rel err ", grad_rep.max_rel_error);
    CHECK(grad_rep.passed);
    auto hess_rep = fd_hessian_check(*prob, pts);
    INFO(kind_name(prob->kind()), " hessian rel err ", hess_rep.max_rel_error);
    CHECK(hess_rep.passed);
  }
}

TEST_CASE("the planted signal is a global minimum with zero gradient") {
  for (const auto& prob : small_instances()) {
    ParamPoint star = ground_truth_point(*prob);
    INFO(kind_name(prob->kind()));
    CHECK(prob->value(star) <= 1e-18);
    CHECK(prob->gradient(star).norm() <= 1e-9);
    CHECK(prob->distance_to_solutions(star) <= 1e-7);
    CHECK(region_residual_norm(prob->region(), star) <= 1e-12);
    CHECK(prob->suboptimality_gap(prob->zero_point()) > 0.0);
  }
}

TEST_CASE("ground-truth factor pairs are balanced") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto prob = gen_matrix_sensing_asym(6, 5, 2, 3, 40, 0.25, sig, 55);
  ParamPoint star = ground_truth_point(*prob);
  Eigen::MatrixXd x = star.block(0), y = star.block(1);
  CHECK((x.transpose() * x - y.transpose() * y).norm() <= 1e-10);
  CHECK((x * y.transpose() - sensing_asym_data(*prob).m_star).norm() <= 1e-10);
}

TEST_CASE("hessian action is symmetric and matches the dense assembly") {
  Rng rng(9);
  for (const auto& prob : small_instances()) {
    ParamPoint x = random_point(*prob, rng, 0.7);
    ParamPoint z1 = random_point(*prob, rng, 1.0);
    ParamPoint z2 = random_point(*prob, rng, 1.0);
    const double q12 = z1.data.dot(prob->hessian_apply(x, z2).data);
    const double q21 = z2.data.dot(prob->hessian_apply(x, z1).data);
    INFO(kind_name(prob->kind()));
    CHECK(q12 == doctest::Approx(q21).epsilon(1e-8));

    Eigen::MatrixXd h = prob->dense_hessian(x);
    CHECK((h - h.transpose()).norm() <= 1e-10 * (1.0 + h.norm()));
    Eigen::VectorXd hz = h * z1.data;
    CHECK((hz - prob->hessian_apply(x, z1).data).norm() <=
          1e-8 * (1.0 + hz.norm()));
  }
}

TEST_CASE("dense hessian refuses oversized parameter spaces") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto prob = gen_matrix_sensing(6, 2, 3, 40, sig, 101);
  ParamPoint x = prob->zero_point();
  CHECK_THROWS(prob->dense_hessian(x, 5));  // dim 18 > cap 5
}

TEST_CASE("balance coefficient contributes exactly its quadratic penalty") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto with = gen_matrix_sensing_asym(6, 5, 2, 3, 40, 0.25, sig, 77);
  auto without = gen_matrix_sensing_asym(6, 5, 2, 3, 40, 0.0, sig, 77);

  Rng rng(5);
  ParamPoint p = random_point(*with, rng, 1.0);
  Eigen::MatrixXd x = p.block(0), y = p.block(1);
  const double imbalance = (x.transpose() * x - y.transpose() * y).squaredNorm();
  CHECK(with->value(p) - without->value(p) ==
        doctest::Approx(0.25 * imbalance).epsilon(1e-10));
}

TEST_CASE("instances serialize and reconstruct exactly") {
  Rng rng(31);
  for (const auto& prob : small_instances()) {
    nlohmann::json j = problem_to_json(*prob);
    CHECK(j.at("format") == "ipgd-problem/1");
    ProblemPtr copy = problem_from_json(j);
    CHECK(copy->kind() == prob->kind());
    CHECK(copy->dim() == prob->dim());

    ParamPoint p = random_point(*prob, rng, 0.9);
    CHECK(copy->value(p) == prob->value(p));  // bitwise: same data, same code path
    CHECK((copy->gradient(p).data - prob->gradient(p).data).norm() == 0.0);
    CHECK(problem_to_json(*copy) == j);
  }
}

TEST_CASE("generation is deterministic in the seed") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto a = gen_matrix_sensing(6, 2, 3, 40, sig, 200);
  auto b = gen_matrix_sensing(6, 2, 3, 40, sig, 200);
  auto c = gen_matrix_sensing(6, 2, 3, 40, sig, 201);
  CHECK(problem_to_json(*a) == problem_to_json(*b));
  CHECK(problem_to_json(*a) != problem_to_json(*c));
}

TEST_CASE("default signals and metadata are wired through") {
  auto sp = gen_sparse(12, 30, Eigen::VectorXd(), 1);
  const SparseData& sd = sparse_data(*sp);
  CHECK(sd.theta_star(0) == 10.0);  // default signal starts (10, -5, 3, -2, 1)
  CHECK(sd.s_plus.size() == 3);
  CHECK(sd.s_minus.size() == 2);
  CHECK(sd.design.rows() == 30);

  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto ms = gen_matrix_sensing(6, 2, 3, 40, sig, 2);
  CHECK(ms->sigma1().value() == 4.0);
  CHECK(ms->rho_hint().value() == doctest::Approx(15.0 * 2.0));
  CHECK(sensing_data(*ms).stack.count() == 40);
  CHECK_THROWS(sparse_data(*ms));  // payload accessor guards its kind

  // sigma_star validation: entries must be positive and non-increasing.
  Eigen::VectorXd bad(2);
  bad << 1.0, 4.0;
  CHECK_THROWS(gen_matrix_sensing(6, 2, 3, 40, bad, 3));
}

TEST_CASE("one-bit loss is anchored at zero on the planted signal") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto prob = gen_one_bit(6, 6, 2, 3, true, 0.25, sig, 404);
  const OneBitData& d = one_bit_data(*prob);
  // alpha = sigmoid(M*), entrywise in (0,1).
  CHECK((d.alpha.array() > 0.0).all());
  CHECK((d.alpha.array() < 1.0).all());
  CHECK(d.alpha(0, 0) == doctest::Approx(sigmoid(d.m_star(0, 0))).epsilon(1e-14));

  ParamPoint star = ground_truth_point(*prob);
  CHECK(prob->value(star) == doctest::Approx(0.0).epsilon(1e-12));
  // Away from the signal the shifted loss is strictly positive.
  ParamPoint off = star;
  off.data.array() += 0.3;
  CHECK(prob->value(off) > 0.0);
}

TEST_CASE("completion masks are honored by the loss") {
  Eigen::VectorXd sig(2);
  sig << 4.0, 1.0;
  auto prob = gen_matrix_completion(6, 5, 2, 3, 0.7, false, 0.25, sig, 500);
  const CompletionData& d = completion_data(*prob);
  REQUIRE(!d.mask_idx.empty());
  // mask and mask_idx describe the same observation set.
  int ones = 0;
  for (int i = 0; i < d.mask.rows(); ++i)
    for (int j = 0; j < d.mask.cols(); ++j) {
      CHECK((d.mask(i, j) == 0.0 || d.mask(i, j) == 1.0));
      ones += d.mask(i, j) == 1.0;
    }
  CHECK(ones == static_cast<int>(d.mask_idx.size()));

  // Zero point: the loss must equal the observed squared entries of M* only.
  double expect = 0.0;
  for (auto [i, j] : d.mask_idx) expect += d.m_star(i, j) * d.m_star(i, j);
  CHECK(prob->value(prob->zero_point()) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("softplus and sigmoid are stable at extreme arguments") {
  CHECK(softplus(800.0) == doctest::Approx(800.0));
  CHECK(softplus(-800.0) == doctest::Approx(0.0));
  CHECK(std::isfinite(softplus(800.0)));
  CHECK(sigmoid(800.0) == doctest::Approx(1.0));
  CHECK(sigmoid(-800.0) == doctest::Approx(0.0));
  CHECK(sigmoid(0.0) == doctest::Approx(0.5));
  // softplus(x) - softplus(-x) = x (exactly in exact arithmetic).
  CHECK(softplus(3.0) - softplus(-3.0) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("orthonormal generator produces orthonormal columns deterministically") {
  Rng rng(66), rng2(66);
  Eigen::MatrixXd q = random_orthonormal(7, 3, rng);
  CHECK((q.transpose() * q - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
  Eigen::MatrixXd q2 = random_orthonormal(7, 3, rng2);
  CHECK((q - q2).norm() == 0.0);
}

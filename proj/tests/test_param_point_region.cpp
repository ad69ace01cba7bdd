#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>

#include "ipgd/param_point.hpp"
#include "ipgd/region.hpp"

using namespace ipgd;

TEST_CASE("block layout tracks offsets, sizes, and name lookup") {
  BlockLayout layout({{"X", 4, 3}, {"Y", 2, 5}});
  CHECK(layout.total_size() == 4 * 3 + 2 * 5);
  CHECK(layout.block_count() == 2);
  CHECK(layout.offset(0) == 0);
  CHECK(layout.offset(1) == 12);
  CHECK(layout.block(1).rows == 2);
  CHECK(layout.index_of("X") == 0);
  CHECK(layout.index_of("Y") == 1);
  CHECK(layout.index_of("Z") == -1);

  BlockLayout same({{"X", 4, 3}, {"Y", 2, 5}});
  BlockLayout other({{"X", 4, 3}, {"Y", 5, 2}});
  CHECK(layout == same);
  CHECK(layout != other);
}

TEST_CASE("param point block views are row-major windows into the flat vector") {
  auto layout = make_layout({{"A", 2, 3}, {"b", 2, 1}});
  ParamPoint p(layout);
  CHECK(p.dim() == 8);
  CHECK(p.data.isZero());

  // Fill the first block through the view and confirm flat placement.
  MatrixMap a = p.block("A");
  a << 1, 2, 3, 4, 5, 6;
  p.block("b") << 7, 8;
  for (int i = 0; i < 8; ++i) CHECK(p.data(i) == doctest::Approx(i + 1));
  CHECK(p.block(0)(0, 1) == 2.0);
  CHECK(p.block(0)(1, 0) == 4.0);
  CHECK(p.block(1)(1, 0) == 8.0);
  CHECK(p.norm() == doctest::Approx(std::sqrt(204.0)));
}

TEST_CASE("param point construction and access reject shape mismatches") {
  auto layout = make_layout({{"X", 2, 2}});
  CHECK_THROWS_AS(ParamPoint(layout, Eigen::VectorXd::Zero(3)), ShapeError);
  ParamPoint p(layout);
  CHECK_THROWS_AS(p.block("nope"), ShapeError);
  CHECK_THROWS_AS(p.block(1), std::exception);
}

TEST_CASE("finiteness and layout checks name the offending block") {
  auto layout = make_layout({{"X", 2, 2}, {"Y", 2, 2}});
  ParamPoint p(layout);
  p.block("Y")(1, 1) = std::nan("");
  try {
    check_finite(p, "test");
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(e.block() == "Y");
  }

  ParamPoint q(make_layout({{"X", 2, 2}, {"Y", 4, 1}}));
  CHECK_THROWS_AS(check_same_layout(ParamPoint(layout), q, "test"), ShapeError);
}

TEST_CASE("region validation rejects impossible specs") {
  auto layout = make_layout({{"X", 4, 2}});
  CHECK_THROWS(validate_region(LowRankRegion{3}, *layout));   // rank > min dim
  CHECK_THROWS(validate_region(LowRankRegion{0}, *layout));
  auto pair_layout = make_layout({{"X", 4, 2}, {"Y", 5, 2}});
  CHECK_THROWS(validate_region(PairLowRankRegion{3}, *pair_layout));

  auto vec_layout = make_layout({{"u", 5, 1}, {"v", 5, 1}});
  CHECK_THROWS(validate_region(SupportRegion{{0, 7}, {}}, *vec_layout));  // index range
  CHECK_THROWS(validate_region(SupportRegion{{1}, {1}}, *vec_layout));   // overlap
  CHECK_NOTHROW(validate_region(SupportRegion{{0, 2}, {4}}, *vec_layout));
}

TEST_CASE("rank projection keeps the dominant singular direction") {
  auto layout = make_layout({{"X", 2, 2}});
  ParamPoint p(layout);
  p.block(0) << 3, 0, 0, 1;  // singular values 3 and 1

  ParamPoint proj = project_region(LowRankRegion{1}, p);
  CHECK(proj.block(0)(0, 0) == doctest::Approx(3.0));
  CHECK(proj.block(0)(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(region_residual_norm(LowRankRegion{1}, p) == doctest::Approx(1.0));

  // Already rank-1 points project to themselves.
  ParamPoint r1(layout);
  r1.block(0) << 2, 4, 1, 2;  // rows proportional: rank 1
  CHECK(region_residual_norm(LowRankRegion{1}, r1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pair rank projection truncates each factor independently") {
  auto layout = make_layout({{"X", 2, 2}, {"Y", 2, 2}});
  ParamPoint p(layout);
  p.block(0) << 3, 0, 0, 1;
  p.block(1) << 2, 0, 0, 1;

  ParamPoint proj = project_region(PairLowRankRegion{1}, p);
  CHECK(proj.block(0)(0, 0) == doctest::Approx(3.0));
  CHECK(proj.block(1)(0, 0) == doctest::Approx(2.0));
  CHECK(proj.block(0)(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(proj.block(1)(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
  // Residual is the flat-vector norm: sqrt(1^2 + 1^2).
  CHECK(region_residual_norm(PairLowRankRegion{1}, p) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("support projection zeroes every coordinate off the allowed sets") {
  auto layout = make_layout({{"u", 3, 1}, {"v", 3, 1}});
  ParamPoint p(layout);
  p.block(0) << 1, 2, 3;
  p.block(1) << 4, 5, 6;

  SupportRegion region{{0}, {2}};
  ParamPoint proj = project_region(region, p);
  CHECK(proj.block(0)(0) == 1.0);
  CHECK(proj.block(0)(1) == 0.0);
  CHECK(proj.block(0)(2) == 0.0);
  CHECK(proj.block(1)(0) == 0.0);
  CHECK(proj.block(1)(1) == 0.0);
  CHECK(proj.block(1)(2) == 6.0);
  // Dropped mass: 2^2 + 3^2 + 4^2 + 5^2 = 54.
  CHECK(region_residual_norm(region, p) == doctest::Approx(std::sqrt(54.0)));
}

TEST_CASE("numerical rank ignores singular values at rounding scale") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 1) = 1e-6;
  m(2, 2) = 1e-14;  // below 1e-12 * sigma_max
  CHECK(numerical_rank(m) == 2);
  CHECK(numerical_rank(Eigen::MatrixXd::Zero(3, 3)) == 0);

  Eigen::MatrixXd t = truncate_rank(m, 1);
  CHECK(t(0, 0) == doctest::Approx(1.0));
  CHECK(t(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

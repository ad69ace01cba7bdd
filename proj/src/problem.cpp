#include "ipgd/problem.hpp"

#include <stdexcept>

namespace ipgd {

std::string kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::matrix_sensing: return "ms";
    case ProblemKind::matrix_sensing_asym: return "ms-asym";
    case ProblemKind::matrix_completion: return "mc";
    case ProblemKind::matrix_completion_asym: return "mc-asym";
    case ProblemKind::one_bit: return "onebit";
    case ProblemKind::one_bit_asym: return "onebit-asym";
    case ProblemKind::sparse_recovery: return "sparse";
  }
  return "?";
}

std::optional<ProblemKind> kind_from_name(const std::string& name) {
  for (ProblemKind k : {ProblemKind::matrix_sensing, ProblemKind::matrix_sensing_asym,
                        ProblemKind::matrix_completion, ProblemKind::matrix_completion_asym,
                        ProblemKind::one_bit, ProblemKind::one_bit_asym,
                        ProblemKind::sparse_recovery}) {
    if (kind_name(k) == name) return k;
  }
  return std::nullopt;
}

bool kind_is_symmetric_lowrank(ProblemKind k) {
  return k == ProblemKind::matrix_sensing || k == ProblemKind::matrix_completion ||
         k == ProblemKind::one_bit;
}

bool kind_is_asym_lowrank(ProblemKind k) {
  return k == ProblemKind::matrix_sensing_asym ||
         k == ProblemKind::matrix_completion_asym || k == ProblemKind::one_bit_asym;
}

double Problem::value(const ParamPoint& x) const {
  check_same_layout(x, zero_point(), "value");
  check_finite(x, "value");
  return value_impl(x);
}

ParamPoint Problem::gradient(const ParamPoint& x) const {
  check_same_layout(x, zero_point(), "gradient");
  check_finite(x, "gradient");
  return gradient_impl(x);
}

ParamPoint Problem::hessian_apply(const ParamPoint& x, const ParamPoint& z) const {
  check_same_layout(x, zero_point(), "hessian_apply");
  check_same_layout(z, zero_point(), "hessian_apply direction");
  check_finite(x, "hessian_apply");
  check_finite(z, "hessian_apply direction");
  return hessian_apply_impl(x, z);
}

Eigen::MatrixXd Problem::dense_hessian(const ParamPoint& x, Eigen::Index max_dim) const {
  if (dim() > max_dim) {
    throw std::invalid_argument("dense_hessian: dimension " + std::to_string(dim()) +
                                " exceeds cap " + std::to_string(max_dim));
  }
  check_same_layout(x, zero_point(), "dense_hessian");
  check_finite(x, "dense_hessian");
  Eigen::MatrixXd h = dense_hessian_impl(x);
  // Kill rounding asymmetry so downstream eigendecompositions see an exactly
  // symmetric matrix.
  return 0.5 * (h + h.transpose()).eval();
}

Eigen::MatrixXd Problem::dense_hessian_impl(const ParamPoint& x) const {
  const Eigen::Index d = dim();
  Eigen::MatrixXd h(d, d);
  ParamPoint e = zero_point();
  for (Eigen::Index j = 0; j < d; ++j) {
    e.data.setZero();
    e.data(j) = 1.0;
    h.col(j) = hessian_apply_impl(x, e).data;
  }
  return h;
}

}  // namespace ipgd

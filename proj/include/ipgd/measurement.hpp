#pragma once

#include <Eigen/Core>
#include <vector>

#include "ipgd/rng.hpp"

namespace ipgd {

// A stack of N dense sensing matrices A_1..A_N over n1 x n2 targets, with the
// normalized linear map
//   measure(M)_i  = <A_i, M> / sqrt(N)
//   adjoint(v)    = (1/sqrt(N)) sum_i v_i A_i,
// so that measure and adjoint are mutually adjoint and E ||measure(M)||^2
// equals ||M||_F^2 for unit-variance Gaussian entries.
class MeasurementStack {
 public:
  MeasurementStack(Eigen::Index n1, Eigen::Index n2, Eigen::Index count);

  static MeasurementStack gaussian(Eigen::Index n1, Eigen::Index n2,
                                   Eigen::Index count, Rng& rng);

  Eigen::Index rows() const { return n1_; }
  Eigen::Index cols() const { return n2_; }
  Eigen::Index count() const { return flat_.rows(); }

  // A_i as a dense matrix (copy).
  Eigen::MatrixXd mat(Eigen::Index i) const;
  void set_mat(Eigen::Index i, const Eigen::MatrixXd& a);

  Eigen::VectorXd measure(const Eigen::MatrixXd& m) const;
  Eigen::MatrixXd adjoint(const Eigen::VectorXd& v) const;

  // Raw unnormalized inner products <A_i, M>, used to form exact targets.
  Eigen::VectorXd raw_dots(const Eigen::MatrixXd& m) const;

  // Row-major flattening of the stack, one row per matrix. Exposed for
  // algebraically restructured Hessian assemblies.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>&
  flat() const {
    return flat_;
  }

 private:
  Eigen::Index n1_, n2_;
  // count x (n1*n2), row i = row-major vec(A_i)
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> flat_;
  double inv_sqrt_n_;
};

}  // namespace ipgd

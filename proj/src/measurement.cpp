#include "ipgd/measurement.hpp"

#include <cmath>
#include <stdexcept>

#include "ipgd/param_point.hpp"

namespace ipgd {

MeasurementStack::MeasurementStack(Eigen::Index n1, Eigen::Index n2, Eigen::Index count)
    : n1_(n1), n2_(n2) {
  if (n1 < 1 || n2 < 1 || count < 1) {
    throw std::invalid_argument("measurement stack needs positive dimensions and count");
  }
  flat_.setZero(count, n1 * n2);
  inv_sqrt_n_ = 1.0 / std::sqrt(static_cast<double>(count));
}

MeasurementStack MeasurementStack::gaussian(Eigen::Index n1, Eigen::Index n2,
                                            Eigen::Index count, Rng& rng) {
  MeasurementStack s(n1, n2, count);
  // Fill order is fixed (matrix-major, then row-major within each matrix) so
  // a seed reproduces the stack bit-for-bit.
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index j = 0; j < n1 * n2; ++j) {
      s.flat_(i, j) = rng.gaussian();
    }
  }
  return s;
}

Eigen::MatrixXd MeasurementStack::mat(Eigen::Index i) const {
  return ConstMatrixMap(flat_.row(i).data(), n1_, n2_);
}

void MeasurementStack::set_mat(Eigen::Index i, const Eigen::MatrixXd& a) {
  if (a.rows() != n1_ || a.cols() != n2_) {
    throw std::invalid_argument("set_mat: matrix shape mismatch");
  }
  RowMajorMatrix rm = a;
  flat_.row(i) = Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
}

Eigen::VectorXd MeasurementStack::raw_dots(const Eigen::MatrixXd& m) const {
  if (m.rows() != n1_ || m.cols() != n2_) {
    throw std::invalid_argument("measure: argument is " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", stack expects " +
                                std::to_string(n1_) + "x" + std::to_string(n2_));
  }
  RowMajorMatrix rm = m;
  return flat_ * Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
}

Eigen::VectorXd MeasurementStack::measure(const Eigen::MatrixXd& m) const {
  return inv_sqrt_n_ * raw_dots(m);
}

Eigen::MatrixXd MeasurementStack::adjoint(const Eigen::VectorXd& v) const {
  if (v.size() != count()) {
    throw std::invalid_argument("adjoint: vector length " + std::to_string(v.size()) +
                                " does not match stack count " + std::to_string(count()));
  }
  Eigen::VectorXd flat_out = flat_.transpose() * v;
  Eigen::MatrixXd out = ConstMatrixMap(flat_out.data(), n1_, n2_);
  return inv_sqrt_n_ * out;
}

}  // namespace ipgd

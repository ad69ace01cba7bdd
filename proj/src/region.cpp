#include "ipgd/region.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <set>

namespace ipgd {

namespace {

void validate_support_indices(const std::vector<int>& idx, Eigen::Index n,
                              const char* which) {
  for (int i : idx) {
    if (i < 0 || i >= n) {
      throw ShapeError(which, std::string("support index out of range in ") + which);
    }
  }
}

}  // namespace

void validate_region(const RegionSpec& region, const BlockLayout& layout) {
  if (const auto* lr = std::get_if<LowRankRegion>(&region)) {
    const BlockShape& b = layout.block(0);
    const Eigen::Index cap = std::min(b.rows, b.cols);
    if (lr->rank < 1 || lr->rank > cap) {
      throw ShapeError(b.name, "rank " + std::to_string(lr->rank) +
                                   " outside [1, " + std::to_string(cap) + "] for block '" +
                                   b.name + "'");
    }
  } else if (const auto* pr = std::get_if<PairLowRankRegion>(&region)) {
    if (layout.block_count() < 2) {
      throw ShapeError("", "pair region needs two factor blocks");
    }
    for (int i = 0; i < 2; ++i) {
      const BlockShape& b = layout.block(i);
      const Eigen::Index cap = std::min(b.rows, b.cols);
      if (pr->rank < 1 || pr->rank > cap) {
        throw ShapeError(b.name, "rank " + std::to_string(pr->rank) +
                                     " outside [1, " + std::to_string(cap) +
                                     "] for block '" + b.name + "'");
      }
    }
  } else {
    const auto& sr = std::get<SupportRegion>(region);
    validate_support_indices(sr.s_plus, layout.block(0).size(), "s_plus");
    if (layout.block_count() > 1) {
      validate_support_indices(sr.s_minus, layout.block(1).size(), "s_minus");
    } else if (!sr.s_minus.empty()) {
      throw ShapeError("s_minus", "s_minus given but layout has no second block");
    }
    std::set<int> plus(sr.s_plus.begin(), sr.s_plus.end());
    for (int i : sr.s_minus) {
      if (plus.count(i)) {
        throw ShapeError("s_minus", "supports overlap at index " + std::to_string(i));
      }
    }
  }
}

Eigen::MatrixXd truncate_rank(const Eigen::MatrixXd& m, int r) {
  const Eigen::Index cap = std::min(m.rows(), m.cols());
  if (r >= cap) return m;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  return svd.matrixU().leftCols(r) * s.head(r).asDiagonal() *
         svd.matrixV().leftCols(r).transpose();
}

int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0) return 0;
  const double floor = 1e-12 * s(0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > floor && s(i) > 0.0) ++rank;
  }
  return rank;
}

ParamPoint project_region(const RegionSpec& region, const ParamPoint& x) {
  validate_region(region, *x.layout);
  check_finite(x, "project_region");
  ParamPoint out = x;
  if (const auto* lr = std::get_if<LowRankRegion>(&region)) {
    out.block(0) = truncate_rank(x.block(0), lr->rank);
  } else if (const auto* pr = std::get_if<PairLowRankRegion>(&region)) {
    out.block(0) = truncate_rank(x.block(0), pr->rank);
    out.block(1) = truncate_rank(x.block(1), pr->rank);
  } else {
    const auto& sr = std::get<SupportRegion>(region);
    // Zero everything off-support; membership is exact, no tolerance involved.
    // Blocks are contiguous row-major slices of the flat vector, and support
    // indices address coordinates within the block.
    auto zero_off_support = [&out](int block_idx, const std::vector<int>& keep) {
      const Eigen::Index off = out.layout->offset(block_idx);
      const Eigen::Index len = out.layout->block(block_idx).size();
      std::vector<char> keep_mask(static_cast<size_t>(len), 0);
      for (int i : keep) keep_mask[static_cast<size_t>(i)] = 1;
      for (Eigen::Index i = 0; i < len; ++i) {
        if (!keep_mask[static_cast<size_t>(i)]) out.data(off + i) = 0.0;
      }
    };
    zero_off_support(0, sr.s_plus);
    if (out.layout->block_count() > 1) zero_off_support(1, sr.s_minus);
  }
  return out;
}

double region_residual_norm(const RegionSpec& region, const ParamPoint& x) {
  ParamPoint p = project_region(region, x);
  return (x.data - p.data).norm();
}

}  // namespace ipgd

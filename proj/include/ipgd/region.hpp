#pragma once

#include <Eigen/Core>
#include <variant>
#include <vector>

#include "ipgd/param_point.hpp"

namespace ipgd {

// Implicit region M that the signal part of an iterate lives on. The three
// shapes cover every problem family: a rank cap on a single factor, a rank
// cap on each of a factor pair, and fixed sign-split supports for the
// Hadamard parameterization.
struct LowRankRegion {
  int rank = 1;  // applies to block 0
};
struct PairLowRankRegion {
  int rank = 1;  // applies to blocks 0 and 1 independently
};
struct SupportRegion {
  std::vector<int> s_plus;   // allowed coordinates of block "u" (block 0)
  std::vector<int> s_minus;  // allowed coordinates of block "v" (block 1, if present)
};

using RegionSpec = std::variant<LowRankRegion, PairLowRankRegion, SupportRegion>;

// Throws ShapeError if the region is incompatible with the layout
// (rank out of range, support index out of range, overlapping supports).
void validate_region(const RegionSpec& region, const BlockLayout& layout);

// Euclidean projection x# of x onto M: truncated SVD per rank-capped block,
// coordinate zeroing for supports.
ParamPoint project_region(const RegionSpec& region, const ParamPoint& x);

// ||x - project_region(x)||. For PairLowRank this is the root-sum-square of
// the two factor residuals (flat-vector norm of x - x#).
double region_residual_norm(const RegionSpec& region, const ParamPoint& x);

// Rank of a matrix counting singular values above 1e-12 * sigma_max.
int numerical_rank(const Eigen::MatrixXd& m);

// Best rank-r approximation in Frobenius norm (SVD truncation; ties broken by
// keeping the first r singular values in the solver's descending order).
Eigen::MatrixXd truncate_rank(const Eigen::MatrixXd& m, int r);

}  // namespace ipgd

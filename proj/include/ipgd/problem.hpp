#pragma once

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <string>

#include "ipgd/param_point.hpp"
#include "ipgd/region.hpp"

namespace ipgd {

enum class ProblemKind {
  matrix_sensing,
  matrix_sensing_asym,
  matrix_completion,
  matrix_completion_asym,
  one_bit,
  one_bit_asym,
  sparse_recovery,
};

// Short stable identifiers used in configs, CLI flags and artifacts.
std::string kind_name(ProblemKind k);
std::optional<ProblemKind> kind_from_name(const std::string& name);
bool kind_is_symmetric_lowrank(ProblemKind k);
bool kind_is_asym_lowrank(ProblemKind k);

// An objective instance: smooth loss over a block-structured parameter space
// together with the implicit region its minimizers live on. All losses are
// nonnegative with minimum value 0 attained on the solution set.
class Problem {
 public:
  virtual ~Problem() = default;

  ProblemKind kind() const { return kind_; }
  const LayoutPtr& layout() const { return layout_; }
  Eigen::Index dim() const { return layout_->total_size(); }
  const RegionSpec& region() const { return region_; }
  // Conservative Hessian-Lipschitz scale when the construction provides one.
  std::optional<double> rho_hint() const { return rho_hint_; }
  // Top singular value of the planted signal when applicable.
  std::optional<double> sigma1() const { return sigma1_; }

  double value(const ParamPoint& x) const;
  ParamPoint gradient(const ParamPoint& x) const;
  // Action of the Hessian at x on direction z (exact directional derivative
  // of the analytic gradient, not finite differences).
  ParamPoint hessian_apply(const ParamPoint& x, const ParamPoint& z) const;

  // Dense symmetrized Hessian. Refuses dimensions above max_dim.
  Eigen::MatrixXd dense_hessian(const ParamPoint& x, Eigen::Index max_dim = 2000) const;

  // Euclidean distance from x to the solution set (family-specific metric).
  virtual double distance_to_solutions(const ParamPoint& x) const = 0;

  // f(x0) - min f; the minimum is 0 for every family here.
  double suboptimality_gap(const ParamPoint& x0) const { return value(x0); }

  ParamPoint zero_point() const { return ParamPoint::zeros(layout_); }

 protected:
  Problem(ProblemKind kind, LayoutPtr layout, RegionSpec region)
      : kind_(kind), layout_(std::move(layout)), region_(std::move(region)) {
    validate_region(region_, *layout_);
  }

  virtual double value_impl(const ParamPoint& x) const = 0;
  virtual ParamPoint gradient_impl(const ParamPoint& x) const = 0;
  virtual ParamPoint hessian_apply_impl(const ParamPoint& x, const ParamPoint& z) const = 0;
  // Families may provide a faster algebraically identical dense assembly.
  virtual Eigen::MatrixXd dense_hessian_impl(const ParamPoint& x) const;

  void set_rho_hint(double v) { rho_hint_ = v; }
  void set_sigma1(double v) { sigma1_ = v; }

 private:
  ProblemKind kind_;
  LayoutPtr layout_;
  RegionSpec region_;
  std::optional<double> rho_hint_;
  std::optional<double> sigma1_;
};

using ProblemPtr = std::unique_ptr<Problem>;

}  // namespace ipgd

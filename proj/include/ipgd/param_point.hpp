#pragma once

#include <Eigen/Core>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ipgd {

// Error for any block/shape mismatch between points, directions, or problem
// layouts. Carries the offending block name.
class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::string block, const std::string& message)
      : std::invalid_argument(message), block_(std::move(block)) {}
  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

struct BlockShape {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  Eigen::Index size() const { return rows * cols; }
  bool operator==(const BlockShape& o) const {
    return name == o.name && rows == o.rows && cols == o.cols;
  }
};

// Ordered list of named matrix blocks. A parameter point is the row-major
// concatenation of its blocks into one flat vector.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<BlockShape> blocks);

  Eigen::Index total_size() const { return total_; }
  int block_count() const { return static_cast<int>(blocks_.size()); }
  const BlockShape& block(int i) const { return blocks_.at(i); }
  Eigen::Index offset(int i) const { return offsets_.at(i); }
  // Index of the named block, or -1.
  int index_of(std::string_view name) const;

  bool operator==(const BlockLayout& o) const { return blocks_ == o.blocks_; }
  bool operator!=(const BlockLayout& o) const { return !(*this == o); }

 private:
  std::vector<BlockShape> blocks_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index total_ = 0;
};

using LayoutPtr = std::shared_ptr<const BlockLayout>;

LayoutPtr make_layout(std::vector<BlockShape> blocks);

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMajorMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix>;

// A point in parameter space: a flat vector of doubles plus the layout that
// interprets it as matrix blocks. Copies are cheap (layout is shared).
struct ParamPoint {
  LayoutPtr layout;
  Eigen::VectorXd data;

  ParamPoint() = default;
  explicit ParamPoint(LayoutPtr l)
      : layout(std::move(l)), data(Eigen::VectorXd::Zero(layout->total_size())) {}
  ParamPoint(LayoutPtr l, Eigen::VectorXd d);

  Eigen::Index dim() const { return data.size(); }
  double norm() const { return data.norm(); }

  MatrixMap block(int i);
  ConstMatrixMap block(int i) const;
  MatrixMap block(std::string_view name);
  ConstMatrixMap block(std::string_view name) const;

  static ParamPoint zeros(LayoutPtr l) { return ParamPoint(std::move(l)); }
};

// Throws ShapeError naming the first non-finite block.
void check_finite(const ParamPoint& p, std::string_view context);
// Throws ShapeError if layouts differ (first differing block is named).
void check_same_layout(const ParamPoint& a, const ParamPoint& b,
                       std::string_view context);

}  // namespace ipgd

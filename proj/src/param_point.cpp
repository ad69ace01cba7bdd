#include "ipgd/param_point.hpp"

#include <cmath>
#include <utility>

namespace ipgd {

BlockLayout::BlockLayout(std::vector<BlockShape> blocks)
    : blocks_(std::move(blocks)) {
  offsets_.reserve(blocks_.size());
  for (const BlockShape& b : blocks_) {
    if (b.rows < 0 || b.cols < 0) {
      throw ShapeError(b.name, "block '" + b.name + "' has negative extent");
    }
    offsets_.push_back(total_);
    total_ += b.size();
  }
  if (total_ == 0) {
    throw ShapeError("", "layout has zero total size");
  }
}

int BlockLayout::index_of(std::string_view name) const {
  for (int i = 0; i < block_count(); ++i) {
    if (blocks_[static_cast<size_t>(i)].name == name) return i;
  }
  return -1;
}

LayoutPtr make_layout(std::vector<BlockShape> blocks) {
  return std::make_shared<const BlockLayout>(std::move(blocks));
}

ParamPoint::ParamPoint(LayoutPtr l, Eigen::VectorXd d)
    : layout(std::move(l)), data(std::move(d)) {
  if (data.size() != layout->total_size()) {
    throw ShapeError("", "flat data length " + std::to_string(data.size()) +
                             " does not match layout size " +
                             std::to_string(layout->total_size()));
  }
}

MatrixMap ParamPoint::block(int i) {
  const BlockShape& b = layout->block(i);
  return MatrixMap(data.data() + layout->offset(i), b.rows, b.cols);
}

ConstMatrixMap ParamPoint::block(int i) const {
  const BlockShape& b = layout->block(i);
  return ConstMatrixMap(data.data() + layout->offset(i), b.rows, b.cols);
}

MatrixMap ParamPoint::block(std::string_view name) {
  const int i = layout->index_of(name);
  if (i < 0) throw ShapeError(std::string(name), "no block named '" + std::string(name) + "'");
  return block(i);
}

ConstMatrixMap ParamPoint::block(std::string_view name) const {
  const int i = layout->index_of(name);
  if (i < 0) throw ShapeError(std::string(name), "no block named '" + std::string(name) + "'");
  return block(i);
}

void check_finite(const ParamPoint& p, std::string_view context) {
  if (p.data.allFinite()) return;
  // Locate the offending block for the error message.
  for (int i = 0; i < p.layout->block_count(); ++i) {
    if (!p.block(i).allFinite()) {
      const std::string& name = p.layout->block(i).name;
      throw ShapeError(name, std::string(context) + ": non-finite entry in block '" +
                                 name + "'");
    }
  }
  throw ShapeError("", std::string(context) + ": non-finite entry");
}

void check_same_layout(const ParamPoint& a, const ParamPoint& b,
                       std::string_view context) {
  if (*a.layout == *b.layout) return;
  const int n = std::min(a.layout->block_count(), b.layout->block_count());
  for (int i = 0; i < n; ++i) {
    if (!(a.layout->block(i) == b.layout->block(i))) {
      throw ShapeError(a.layout->block(i).name,
                       std::string(context) + ": block '" + a.layout->block(i).name +
                           "' differs in shape");
    }
  }
  throw ShapeError("", std::string(context) + ": layouts have different block counts");
}

}  // namespace ipgd

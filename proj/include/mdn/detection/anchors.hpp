#pragma once

#include <array>
#include <utility>
#include <vector>

#include "mdn/detection/box.hpp"
#include "mdn/tensor.hpp"

namespace mdn::detection {

inline constexpr int kBoxesPerCell = 5;
inline constexpr std::array<double, kBoxesPerCell> kAspectRatios{1.0, 2.0, 0.5, 3.0, 1.0 / 3.0};

// Scale of the prior boxes on level k: 0.1, 0.3, 0.5, 0.7, 0.9.
double level_scale(int level);

struct DefaultBox {
  Box box;
  int scale_index = 0;
  Index row = 0;
  Index col = 0;
  int ratio_index = 0;
};

using AnchorSet = std::vector<DefaultBox>;

// One prior per (level, row, col, ratio), in that nesting order, which is the
// row order produced by gather_anchor_rows on the head output.
// level_sizes holds (H, W) per level, finest first.
AnchorSet generate_default_boxes(const std::vector<std::pair<Index, Index>>& level_sizes);

}  // namespace mdn::detection

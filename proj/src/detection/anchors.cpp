#include "mdn/detection/anchors.hpp"

#include <algorithm>
#include <cmath>

#include "mdn/error.hpp"

namespace mdn::detection {

double level_scale(int level) { return 0.1 + 0.2 * level; }

AnchorSet generate_default_boxes(const std::vector<std::pair<Index, Index>>& level_sizes) {
  AnchorSet anchors;
  for (std::size_t level = 0; level < level_sizes.size(); ++level) {
    const auto [h, w] = level_sizes[level];
    if (h < 1 || w < 1) throw DimensionError("default boxes: level sizes must be positive");
    const double s = level_scale(static_cast<int>(level));
    for (Index r = 0; r < h; ++r) {
      for (Index c = 0; c < w; ++c) {
        const double cx = (static_cast<double>(c) + 0.5) / static_cast<double>(w);
        const double cy = (static_cast<double>(r) + 0.5) / static_cast<double>(h);
        for (int k = 0; k < kBoxesPerCell; ++k) {
          const double root = std::sqrt(kAspectRatios[k]);
          DefaultBox d;
          d.box = {cx, cy, std::min(1.0, s * root), std::min(1.0, s / root)};
          d.scale_index = static_cast<int>(level);
          d.row = r;
          d.col = c;
          d.ratio_index = k;
          anchors.push_back(d);
        }
      }
    }
  }
  return anchors;
}

}  // namespace mdn::detection

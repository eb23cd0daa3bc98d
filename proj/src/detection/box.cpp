#include "mdn/detection/box.hpp"

#include <algorithm>
#include <cmath>

#include "mdn/error.hpp"

namespace mdn::detection {

CornerBox to_corner(const Box& b) {
  return {b.cx - b.w / 2, b.cy - b.h / 2, b.cx + b.w / 2, b.cy + b.h / 2};
}

Box to_center(const CornerBox& b) {
  return {(b.xmin + b.xmax) / 2, (b.ymin + b.ymax) / 2, b.xmax - b.xmin, b.ymax - b.ymin};
}

double iou(const CornerBox& a, const CornerBox& b) {
  const double area_a = std::max(0.0, a.xmax - a.xmin) * std::max(0.0, a.ymax - a.ymin);
  const double area_b = std::max(0.0, b.xmax - b.xmin) * std::max(0.0, b.ymax - b.ymin);
  if (area_a <= 0.0 || area_b <= 0.0) return 0.0;
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (area_a + area_b - inter);
}

Offsets encode(const Box& g, const Box& d) {
  if (!(g.w > 0 && g.h > 0 && d.w > 0 && d.h > 0)) {
    throw ContractError("encode: box extents must be positive");
  }
  return {(g.cx - d.cx) / d.w, (g.cy - d.cy) / d.h, std::log(g.w / d.w), std::log(g.h / d.h)};
}

Box decode(const Offsets& o, const Box& d) {
  return {o[0] * d.w + d.cx, o[1] * d.h + d.cy, d.w * std::exp(o[2]), d.h * std::exp(o[3])};
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x >= 1.0) return 1.0;
  if (x <= -1.0) return -1.0;
  return x;
}

}  // namespace mdn::detection

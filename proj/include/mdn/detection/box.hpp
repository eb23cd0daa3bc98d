#pragma once

#include <array>

namespace mdn::detection {

// Center-form box in normalized image coordinates.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
};

struct CornerBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;
};

// Regression targets (cx, cy, w, h) relative to a default box.
using Offsets = std::array<double, 4>;

CornerBox to_corner(const Box& b);
Box to_center(const CornerBox& b);

// Intersection over union; 0 for disjoint or zero-area boxes.
double iou(const CornerBox& a, const CornerBox& b);
inline double iou(const Box& a, const Box& b) { return iou(to_corner(a), to_corner(b)); }

//   (g.cx - d.cx) / d.w,  (g.cy - d.cy) / d.h,  log(g.w / d.w),  log(g.h / d.h)
// Throws ContractError on non-positive extents.
Offsets encode(const Box& ground_truth, const Box& default_box);

// Inverse of encode.
Box decode(const Offsets& offsets, const Box& default_box);

// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
double smooth_l1(double x);
double smooth_l1_grad(double x);

}  // namespace mdn::detection

#pragma once

#include <vector>

#include "mdn/detection/box.hpp"

namespace mdn::detection {

struct Detection {
  int class_id = 0;
  double score = 0.0;
  CornerBox box;
};

// Greedy per-class suppression. Candidates are visited by descending score
// (ties by input position); a candidate is dropped when it overlaps an already
// kept box of its class with IoU > iou_threshold. Result is in visiting order.
std::vector<Detection> nms(const std::vector<Detection>& detections, double iou_threshold);

}  // namespace mdn::detection

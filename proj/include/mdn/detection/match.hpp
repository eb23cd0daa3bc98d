#pragma once

#include <span>
#include <vector>

#include "mdn/detection/anchors.hpp"

namespace mdn::detection {

struct GroundTruthBox {
  int class_id = 1;  // 1..num_classes; 0 is background
  Box box;
};

struct LossConfig {
  double alpha = 1.0;
  double negative_ratio = 3.0;
  double match_iou = 0.5;
};

// Which ground truth (if any) each default box is responsible for.
struct MatchAssignment {
  std::vector<int> gt_index;  // -1 for background
  std::vector<int> label;     // class id, 0 for background

  int num_positive() const;
  bool positive(std::size_t anchor) const { return gt_index[anchor] >= 0; }
};

// Two-stage matching:
//  1. forced: ground truths claim anchors one at a time, always taking the
//     globally highest remaining (gt, anchor) IoU pair, so every ground truth
//     owns at least one anchor (ties: lower gt index, then lower anchor index);
//  2. threshold: every unclaimed anchor whose best IoU exceeds match_iou is
//     assigned to that best ground truth (ties: lower gt index).
MatchAssignment match_anchors(const AnchorSet& anchors, std::span<const GroundTruthBox> gts,
                              const LossConfig& cfg);

}  // namespace mdn::detection

#pragma once

#include <span>
#include <vector>

#include "mdn/detection/match.hpp"
#include "mdn/tensor.hpp"

namespace mdn::detection {

// Softmax cross-entropy over positives plus mined hard negatives.
//
// class_logits is N x A x (num_classes + 1), one assignment per image. For each
// image the background anchors are ranked by -log p(background) (descending,
// ties by anchor index) and the first negative_ratio * |positives| are kept;
// an image without positives keeps one.
template <typename T>
BasicTensor<T> confidence_loss(const BasicTensor<T>& class_logits,
                               std::span<const MatchAssignment> assignments,
                               const LossConfig& cfg);

// Smooth-L1 between predicted offsets (N x A x 4) and the encoded matched
// ground truth, summed over positive anchors and the four coordinates.
template <typename T>
BasicTensor<T> localization_loss(const BasicTensor<T>& box_offsets,
                                 std::span<const MatchAssignment> assignments,
                                 std::span<const std::vector<GroundTruthBox>> ground_truths,
                                 const AnchorSet& anchors);

// (conf + alpha * loc) / max(num_positive, 1).
template <typename T>
BasicTensor<T> total_loss(const BasicTensor<T>& conf, const BasicTensor<T>& loc, int num_positive,
                          const LossConfig& cfg);

}  // namespace mdn::detection

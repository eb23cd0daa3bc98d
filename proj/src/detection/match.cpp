#include "mdn/detection/match.hpp"

#include <algorithm>

#include "mdn/error.hpp"

namespace mdn::detection {

int MatchAssignment::num_positive() const {
  return static_cast<int>(std::count_if(gt_index.begin(), gt_index.end(),
                                        [](int j) { return j >= 0; }));
}

MatchAssignment match_anchors(const AnchorSet& anchors, std::span<const GroundTruthBox> gts,
                              const LossConfig& cfg) {
  if (anchors.empty()) throw ContractError("match_anchors: no default boxes");
  const std::size_t na = anchors.size();
  const std::size_t ng = gts.size();
  MatchAssignment m;
  m.gt_index.assign(na, -1);
  m.label.assign(na, 0);
  if (ng == 0) return m;

  std::vector<CornerBox> anchor_corners(na);
  for (std::size_t a = 0; a < na; ++a) anchor_corners[a] = to_corner(anchors[a].box);
  std::vector<double> overlap(ng * na);
  for (std::size_t g = 0; g < ng; ++g) {
    const CornerBox gc = to_corner(gts[g].box);
    for (std::size_t a = 0; a < na; ++a) overlap[g * na + a] = iou(gc, anchor_corners[a]);
  }

  std::vector<bool> gt_done(ng, false);
  for (std::size_t round = 0; round < std::min(ng, na); ++round) {
    double best = -1.0;
    std::size_t best_g = 0;
    std::size_t best_a = 0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (gt_done[g]) continue;
      for (std::size_t a = 0; a < na; ++a) {
        if (m.gt_index[a] >= 0) continue;
        if (overlap[g * na + a] > best) {
          best = overlap[g * na + a];
          best_g = g;
          best_a = a;
        }
      }
    }
    gt_done[best_g] = true;
    m.gt_index[best_a] = static_cast<int>(best_g);
  }

  for (std::size_t a = 0; a < na; ++a) {
    if (m.gt_index[a] >= 0) continue;
    double best = -1.0;
    int best_g = -1;
    for (std::size_t g = 0; g < ng; ++g) {
      if (overlap[g * na + a] > best) {
        best = overlap[g * na + a];
        best_g = static_cast<int>(g);
      }
    }
    if (best > cfg.match_iou) m.gt_index[a] = best_g;
  }
  for (std::size_t a = 0; a < na; ++a) {
    if (m.gt_index[a] >= 0) m.label[a] = gts[static_cast<std::size_t>(m.gt_index[a])].class_id;
  }
  return m;
}

}  // namespace mdn::detection

#include "mdn/detection/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

#include "mdn/error.hpp"
#include "mdn/ops.hpp"

namespace mdn::detection {

namespace {

void check_batch(const Shape& s, Index width, std::size_t images, Index anchors, const char* op) {
  if (s.size() != 3 || (width > 0 && s[2] != width)) {
    throw DimensionError(std::string(op) + ": predictions have shape " + shape_to_string(s));
  }
  if (s[0] != static_cast<Index>(images)) {
    throw DimensionError(std::string(op) + ": " + std::to_string(images) +
                         " assignments for a batch of " + std::to_string(s[0]));
  }
  if (anchors >= 0 && s[1] != anchors) {
    throw DimensionError(std::string(op) + ": " + std::to_string(s[1]) +
                         " prediction rows for " + std::to_string(anchors) + " anchors");
  }
}

struct Selected {
  Index row;  // n * A + a
  int target;
};

}  // namespace

template <typename T>
BasicTensor<T> confidence_loss(const BasicTensor<T>& class_logits,
                               std::span<const MatchAssignment> assignments,
                               const LossConfig& cfg) {
  const Shape& s = class_logits.shape();
  check_batch(s, -1, assignments.size(), -1, "confidence_loss");
  const Index n = s[0];
  const Index a_count = s[1];
  const Index width = s[2];
  const T* x = class_logits.data().data();

  auto selected = std::make_shared<std::vector<Selected>>();
  auto probs = std::make_shared<std::vector<T>>();
  T loss = T(0);
  std::vector<T> row_probs(static_cast<std::size_t>(width));
  std::vector<std::pair<T, Index>> negatives;

  auto softmax_row = [&](Index row) {
    const T* r = x + row * width;
    const T mx = *std::max_element(r, r + width);
    T total = T(0);
    for (Index k = 0; k < width; ++k) {
      row_probs[k] = std::exp(r[k] - mx);
      total += row_probs[k];
    }
    const T log_z = mx + std::log(total);
    for (Index k = 0; k < width; ++k) row_probs[k] = std::exp(r[k] - log_z);
    return log_z;
  };
  auto take = [&](Index row, int target, T nll) {
    selected->push_back({row, target});
    probs->insert(probs->end(), row_probs.begin(), row_probs.end());
    loss += nll;
  };

  for (Index b = 0; b < n; ++b) {
    const auto& m = assignments[static_cast<std::size_t>(b)];
    if (static_cast<Index>(m.gt_index.size()) != a_count) {
      throw DimensionError("confidence_loss: assignment covers " +
                           std::to_string(m.gt_index.size()) + " anchors, predictions " +
                           std::to_string(a_count));
    }
    negatives.clear();
    Index positives = 0;
    for (Index a = 0; a < a_count; ++a) {
      const Index row = b * a_count + a;
      const T log_z = softmax_row(row);
      if (m.gt_index[a] >= 0) {
        const int label = m.label[a];
        if (label <= 0 || label >= width) {
          throw ContractError("confidence_loss: label " + std::to_string(label) +
                              " outside 1.." + std::to_string(width - 1));
        }
        take(row, label, log_z - x[row * width + label]);
        ++positives;
      } else {
        negatives.emplace_back(log_z - x[row * width], a);
      }
    }
    Index keep = positives > 0
                     ? static_cast<Index>(cfg.negative_ratio * static_cast<double>(positives))
                     : 1;
    keep = std::min<Index>(keep, static_cast<Index>(negatives.size()));
    std::stable_sort(negatives.begin(), negatives.end(),
                     [](const auto& l, const auto& r) { return l.first > r.first; });
    for (Index i = 0; i < keep; ++i) {
      const Index row = b * a_count + negatives[i].second;
      softmax_row(row);
      take(row, 0, negatives[i].first);
    }
  }

  return make_op_result<T>(Shape{1}, std::vector<T>{loss}, "confidence_loss", {&class_logits},
                           [selected, probs, width](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             const T g = self.grad[0];
                             for (std::size_t i = 0; i < selected->size(); ++i) {
                               const auto& sel = (*selected)[i];
                               T* d = dx.data() + sel.row * width;
                               const T* p = probs->data() + i * width;
                               for (Index k = 0; k < width; ++k) d[k] += g * p[k];
                               d[sel.target] -= g;
                             }
                           });
}

template <typename T>
BasicTensor<T> localization_loss(const BasicTensor<T>& box_offsets,
                                 std::span<const MatchAssignment> assignments,
                                 std::span<const std::vector<GroundTruthBox>> ground_truths,
                                 const AnchorSet& anchors) {
  const Shape& s = box_offsets.shape();
  const Index a_count = static_cast<Index>(anchors.size());
  check_batch(s, 4, assignments.size(), a_count, "localization_loss");
  if (ground_truths.size() != assignments.size()) {
    throw DimensionError("localization_loss: ground-truth lists do not match the batch");
  }
  const T* x = box_offsets.data().data();
  auto residual_grad = std::make_shared<std::vector<std::pair<Index, T>>>();
  T loss = T(0);
  for (std::size_t b = 0; b < assignments.size(); ++b) {
    const auto& m = assignments[b];
    for (Index a = 0; a < a_count; ++a) {
      if (m.gt_index[a] < 0) continue;
      const auto& gt = ground_truths[b][static_cast<std::size_t>(m.gt_index[a])];
      const Offsets target = encode(gt.box, anchors[static_cast<std::size_t>(a)].box);
      const Index row = static_cast<Index>(b) * a_count + a;
      for (int k = 0; k < 4; ++k) {
        const double diff = static_cast<double>(x[row * 4 + k]) - target[k];
        loss += static_cast<T>(smooth_l1(diff));
        residual_grad->emplace_back(row * 4 + k, static_cast<T>(smooth_l1_grad(diff)));
      }
    }
  }
  return make_op_result<T>(Shape{1}, std::vector<T>{loss}, "localization_loss", {&box_offsets},
                           [residual_grad](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             for (const auto& [i, g] : *residual_grad) dx[i] += self.grad[0] * g;
                           });
}

template <typename T>
BasicTensor<T> total_loss(const BasicTensor<T>& conf, const BasicTensor<T>& loc, int num_positive,
                          const LossConfig& cfg) {
  const T norm = T(1) / static_cast<T>(std::max(num_positive, 1));
  return scale(add(conf, scale(loc, static_cast<T>(cfg.alpha))), norm);
}

#define MDN_INSTANTIATE_LOSSES(T)                                                              \
  template BasicTensor<T> confidence_loss(const BasicTensor<T>&, std::span<const MatchAssignment>, \
                                          const LossConfig&);                                  \
  template BasicTensor<T> localization_loss(const BasicTensor<T>&,                             \
                                            std::span<const MatchAssignment>,                  \
                                            std::span<const std::vector<GroundTruthBox>>,      \
                                            const AnchorSet&);                                 \
  template BasicTensor<T> total_loss(const BasicTensor<T>&, const BasicTensor<T>&, int,        \
                                     const LossConfig&);

MDN_INSTANTIATE_LOSSES(float)
MDN_INSTANTIATE_LOSSES(double)

}  // namespace mdn::detection

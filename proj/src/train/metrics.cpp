#include "mdn/train/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "mdn/error.hpp"

namespace mdn::train {

double evaluate_classifier(const Crn& model, const data::ClassificationDataset& dataset,
                           Index batch_size) {
  if (dataset.samples.empty()) throw DataError("evaluate_classifier: empty dataset");
  NoGradGuard no_grad;
  Index correct = 0;
  const Index n = static_cast<Index>(dataset.samples.size());
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    std::vector<const data::Image*> images;
    for (Index i = start; i < end; ++i) images.push_back(&dataset.samples[i].image);
    const Tensor logits = model.forward(data::stack_images(images), Mode::kEval);
    const auto k = static_cast<std::size_t>(logits.dim(1));
    for (Index i = start; i < end; ++i) {
      const auto row = logits.data().subspan(static_cast<std::size_t>(i - start) * k, k);
      if (classify_logits(row).class_id == dataset.samples[i].label) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

double average_precision_11(const std::vector<bool>& true_positive, Index num_ground_truth) {
  if (num_ground_truth <= 0) return 0.0;
  std::vector<double> precision, recall;
  Index tp = 0;
  for (std::size_t i = 0; i < true_positive.size(); ++i) {
    if (true_positive[i]) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_ground_truth));
  }
  double ap = 0.0;
  for (int k = 0; k <= 10; ++k) {
    const double r = k / 10.0;
    double best = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      if (recall[i] >= r - 1e-12) best = std::max(best, precision[i]);
    }
    ap += best;
  }
  return ap / 11.0;
}

DetectionReport evaluate_detections(
    std::span<const std::vector<detection::Detection>> detections,
    std::span<const std::vector<detection::GroundTruthBox>> ground_truths, Index num_classes,
    const std::function<std::string(int)>& group_of, double match_iou) {
  if (ground_truths.empty()) throw DataError("evaluate_detections: empty dataset");
  if (detections.size() != ground_truths.size()) {
    throw ContractError("evaluate_detections: one detection list per image required");
  }
  DetectionReport report;
  report.images = static_cast<Index>(ground_truths.size());

  struct Ranked {
    double score;
    std::size_t image;
    const detection::Detection* det;
  };
  double ap_sum = 0.0;
  int ap_classes = 0;
  std::map<std::string, GroupMetrics> groups;
  for (int cls = 1; cls <= num_classes; ++cls) {
    ClassMetrics m;
    m.class_id = cls;
    std::vector<std::vector<bool>> claimed(ground_truths.size());
    for (std::size_t i = 0; i < ground_truths.size(); ++i) {
      claimed[i].assign(ground_truths[i].size(), false);
      for (const auto& gt : ground_truths[i]) m.ground_truths += gt.class_id == cls ? 1 : 0;
    }
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < detections.size(); ++i) {
      for (const auto& d : detections[i]) {
        if (d.class_id == cls) ranked.push_back({d.score, i, &d});
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    std::vector<bool> hits;
    for (const auto& r : ranked) {
      const auto& gts = ground_truths[r.image];
      double best = -1.0;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < gts.size(); ++j) {
        if (gts[j].class_id != cls || claimed[r.image][j]) continue;
        const double o = detection::iou(r.det->box, detection::to_corner(gts[j].box));
        if (o > best) {
          best = o;
          best_j = j;
        }
      }
      const bool hit = best >= match_iou;
      if (hit) claimed[r.image][best_j] = true;
      hits.push_back(hit);
    }
    m.detections = static_cast<Index>(ranked.size());
    m.true_positives = std::count(hits.begin(), hits.end(), true);
    m.recall = m.ground_truths ? static_cast<double>(m.true_positives) / m.ground_truths : 0.0;
    m.precision = m.detections ? static_cast<double>(m.true_positives) / m.detections : 0.0;
    m.ap = average_precision_11(hits, m.ground_truths);
    if (m.ground_truths > 0) {
      ap_sum += m.ap;
      ++ap_classes;
    }
    auto& g = groups[group_of(cls)];
    g.ground_truths += m.ground_truths;
    g.detections += m.detections;
    g.true_positives += m.true_positives;
    report.classes.push_back(m);
  }
  for (auto& [name, g] : groups) {
    g.name = name;
    g.recall = g.ground_truths ? static_cast<double>(g.true_positives) / g.ground_truths : 0.0;
    g.precision = g.detections ? static_cast<double>(g.true_positives) / g.detections : 0.0;
    report.groups.push_back(g);
  }
  report.map = ap_classes ? ap_sum / ap_classes : 0.0;
  return report;
}

DetectionReport evaluate_detector(const detection::Mdn& model,
                                  const data::DetectionDataset& dataset,
                                  const detection::DetectOptions& options, double match_iou,
                                  Index batch_size) {
  if (dataset.samples.empty()) throw DataError("evaluate_detector: empty dataset");
  std::vector<std::vector<detection::Detection>> dets;
  std::vector<std::vector<detection::GroundTruthBox>> gts;
  const Index n = static_cast<Index>(dataset.samples.size());
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    std::vector<const data::Image*> images;
    for (Index i = start; i < end; ++i) {
      images.push_back(&dataset.samples[i].image);
      gts.push_back(dataset.samples[i].boxes);
    }
    for (auto& d : detection::detect_batch(model, data::stack_images(images), options)) {
      dets.push_back(std::move(d));
    }
  }
  return evaluate_detections(dets, gts, model.spec().num_classes,
                             [&](int c) { return dataset.group_of(c); }, match_iou);
}

std::string format_report(const DetectionReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "images %td  mAP %.4f\n", report.images, report.map);
  out += line;
  out += "class      gt   det    tp  recall  precision      AP\n";
  for (const auto& c : report.classes) {
    std::snprintf(line, sizeof(line), "%5d %7td %5td %5td  %6.4f     %6.4f  %6.4f\n", c.class_id,
                  c.ground_truths, c.detections, c.true_positives, c.recall, c.precision, c.ap);
    out += line;
  }
  out += "group              gt   det    tp  recall  precision\n";
  for (const auto& g : report.groups) {
    std::snprintf(line, sizeof(line), "%-14s %6td %5td %5td  %6.4f     %6.4f\n", g.name.c_str(),
                  g.ground_truths, g.detections, g.true_positives, g.recall, g.precision);
    out += line;
  }
  return out;
}

}  // namespace mdn::train

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mdn/crn.hpp"
#include "mdn/data/datasets.hpp"
#include "mdn/detection/mdn.hpp"

namespace mdn::train {

// Fraction of samples whose eval-mode prediction equals the label.
// Throws DataError on an empty dataset.
double evaluate_classifier(const Crn& model, const data::ClassificationDataset& dataset,
                           Index batch_size = 64);

// 11-point interpolated average precision of one class. `true_positive` lists
// the class's detections in descending score order.
double average_precision_11(const std::vector<bool>& true_positive, Index num_ground_truth);

struct ClassMetrics {
  int class_id = 0;
  Index ground_truths = 0;
  Index detections = 0;
  Index true_positives = 0;
  double recall = 0.0;
  double precision = 0.0;
  double ap = 0.0;
};

struct GroupMetrics {
  std::string name;
  Index ground_truths = 0;
  Index detections = 0;
  Index true_positives = 0;
  double recall = 0.0;
  double precision = 0.0;
};

struct DetectionReport {
  Index images = 0;
  std::vector<ClassMetrics> classes;  // ids 1..num_classes
  std::vector<GroupMetrics> groups;   // sorted by name
  double map = 0.0;                   // mean AP over classes with ground truth
};

// Per class, detections from all images are visited in descending score
// order (stable in image order); each is a true positive when its best-IoU
// unclaimed ground truth of the same class reaches match_iou, which it then claims.
DetectionReport evaluate_detections(
    std::span<const std::vector<detection::Detection>> detections,
    std::span<const std::vector<detection::GroundTruthBox>> ground_truths, Index num_classes,
    const std::function<std::string(int)>& group_of, double match_iou);

DetectionReport evaluate_detector(const detection::Mdn& model,
                                  const data::DetectionDataset& dataset,
                                  const detection::DetectOptions& options, double match_iou,
                                  Index batch_size = 8);

std::string format_report(const DetectionReport& report);

}  // namespace mdn::train

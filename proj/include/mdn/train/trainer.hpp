#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mdn/train/metrics.hpp"

namespace mdn::train {

// "epochs" counts full passes over the training set.
struct TrainConfig {
  int epochs = 200;
  Index batch_size = 32;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 on "*.weight" tensors
  std::uint64_t seed = 0;
  detection::LossConfig loss;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  int eval_every = 1;        // 0: never evaluate during training
  bool augment = false;      // fresh augmentation of every sample each epoch
  data::AugmentRanges augment_ranges;       // classifier crops (also used for balancing)
  data::SceneAugmentRanges scene_ranges;    // detector scenes
  // Classifier only: stop after an evaluated epoch whose train accuracy
  // reaches this value (0: run every epoch).
  double stop_at_accuracy = 0.0;

  void validate() const;
};

struct MetricsRecord {
  int epoch = 0;
  double train_loss = 0.0;
  // Detection: loss decomposition, both already divided by the positive count.
  double conf_loss = 0.0;
  double loc_loss = 0.0;
  bool evaluated = false;
  double train_accuracy = 0.0;  // classification, eval mode on the train set
  double eval_accuracy = 0.0;   // classification, held-out set (NaN without one)
  double map = 0.0;             // detection, held-out set (or train set)
  std::vector<GroupMetrics> groups;
  double wall_time = 0.0;  // seconds since training started; not written to metrics files
};

using MetricsHistory = std::vector<MetricsRecord>;

// Called after every epoch; `epoch` is 1-based.
using EpochHook = std::function<void(const MetricsRecord&)>;

// Mini-batch momentum SGD on cross-entropy. The order of each epoch is a
// seeded shuffle, so a run is a pure function of (model, data, config).
// Throws NumericError when the loss turns non-finite.
MetricsHistory train_classifier(Crn& model, const data::ClassificationDataset& train_set,
                                const data::ClassificationDataset* eval_set,
                                const TrainConfig& config, const EpochHook& hook = {});

// Per batch: match, total loss (conf + alpha * loc) / positives, backward,
// momentum SGD. Batches without positives contribute zero loss and no update.
// With augment, every scene is flipped, zoomed, shifted and relit each epoch
// (boxes follow the geometry and stay inside the frame).
MetricsHistory train_detector(detection::Mdn& model, const data::DetectionDataset& train_set,
                              const data::DetectionDataset* eval_set, const TrainConfig& config,
                              const detection::DetectOptions& detect_options = {},
                              const EpochHook& hook = {});

// Semicolon-separated, one row per epoch, header first. Wall time is left
// out so identical runs produce identical files.
std::string format_metrics(const MetricsHistory& history, bool detection);
void write_metrics(const MetricsHistory& history, bool detection,
                   const std::filesystem::path& path);
void write_timing(const MetricsHistory& history, const std::filesystem::path& path);

}  // namespace mdn::train

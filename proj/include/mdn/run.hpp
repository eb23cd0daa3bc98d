#pragma once

#include <filesystem>
#include <optional>

#include "mdn/config.hpp"
#include "mdn/data/datasets.hpp"

namespace mdn {

inline constexpr const char* kMetricsFile = "metrics.txt";
inline constexpr const char* kTimingFile = "timing.txt";
inline constexpr const char* kFinalCheckpoint = "checkpoint";
inline constexpr const char* kCheckpointDir = "checkpoints";

// The data a config describes; only the members matching model.kind are set.
struct RunData {
  data::ClassificationDataset classification_train;
  std::optional<data::ClassificationDataset> classification_eval;
  data::DetectionDataset detection_train;
  std::optional<data::DetectionDataset> detection_eval;
};

RunData load_run_data(const RunConfig& config);

// Trains the configured model and writes into out_dir:
//   metrics.txt       one row per epoch (deterministic)
//   timing.txt        wall time per epoch
//   checkpoint/       final parameters
//   checkpoints/epoch_NNNN/  every checkpoint_every epochs (if > 0)
train::MetricsHistory run_training(const RunConfig& config, const std::filesystem::path& out_dir,
                                   const train::EpochHook& progress = {});

}  // namespace mdn

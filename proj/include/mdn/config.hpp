#pragma once

#include <filesystem>
#include <string>

#include "mdn/detection/mdn.hpp"
#include "mdn/train/checkpoint.hpp"
#include "mdn/train/trainer.hpp"

namespace mdn {

enum class DataSource { kSynthetic, kDirectory };

// Where training and evaluation data come from. Relative paths are resolved
// against the directory of the config file.
struct DataConfig {
  DataSource source = DataSource::kSynthetic;
  std::filesystem::path root;          // directory source: train tree (crn) or dataset root (mdn)
  std::filesystem::path eval_root;     // crn: optional held-out tree
  std::filesystem::path annotations;   // mdn: default root/annotations.txt
  std::filesystem::path split_manifest;  // mdn: default root/split.txt
  std::string train_split = "train";
  std::string eval_split = "test";
  bool balance = false;
  Index balance_low = 500;
  Index balance_high = 1000;
  // Synthetic source.
  Index synthetic_train = 50;
  Index synthetic_eval = 0;
  std::uint64_t synthetic_seed = 1;
  Index scene_size = 384;
  Index min_sign = 20;
  Index max_sign = 120;
  double fog = 0.0;
  double occlusion = 0.0;
};

struct RunConfig {
  train::ModelSpec model;
  DataConfig data;
  train::TrainConfig train;
  detection::DetectOptions detect;

  void validate() const;
};

// YAML with the sections model, data, train and detect. Unknown keys and
// malformed values raise ConfigError carrying the source line.
RunConfig parse_run_config(const std::string& text, const std::string& source_name,
                           const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace mdn

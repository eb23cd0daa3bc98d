#include "mdn/run.hpp"

#include <cstdio>

#include "mdn/data/synthetic.hpp"
#include "mdn/error.hpp"

namespace mdn {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEvalStream = 0x65766131;

data::SceneConfig scene_config(const DataConfig& d) {
  data::SceneConfig sc;
  sc.image_size = d.scene_size;
  sc.min_sign = d.min_sign;
  sc.max_sign = d.max_sign;
  sc.fog_probability = d.fog;
  sc.occlusion_probability = d.occlusion;
  return sc;
}

}  // namespace

RunData load_run_data(const RunConfig& config) {
  const DataConfig& d = config.data;
  const Index classes = config.model.num_classes;
  RunData out;
  if (config.model.kind == train::ModelKind::kCrn) {
    if (d.source == DataSource::kSynthetic) {
      out.classification_train = data::generate_classification(d.synthetic_train, classes,
                                                               d.synthetic_seed);
      if (d.synthetic_eval > 0) {
        out.classification_eval = data::generate_classification(
            d.synthetic_eval, classes, data::mix_seed(d.synthetic_seed, kEvalStream));
      }
    } else {
      out.classification_train = data::load_classification_dataset(d.root, classes);
      if (!d.eval_root.empty()) {
        out.classification_eval = data::load_classification_dataset(d.eval_root, classes);
      }
    }
    if (d.balance) {
      out.classification_train = data::balance_classes(out.classification_train, d.balance_low,
                                                       d.balance_high, config.train.seed,
                                                       config.train.augment_ranges);
    }
    return out;
  }
  const Index size = config.model.input_size;
  if (d.source == DataSource::kSynthetic) {
    const auto sc = scene_config(d);
    out.detection_train = data::generate_scenes(d.synthetic_train, d.synthetic_seed, sc);
    data::resize_dataset(out.detection_train, size);
    if (d.synthetic_eval > 0) {
      out.detection_eval =
          data::generate_scenes(d.synthetic_eval, d.synthetic_seed, sc, d.synthetic_train);
      data::resize_dataset(*out.detection_eval, size);
    }
  } else {
    out.detection_train = data::load_detection_dataset(d.root, d.train_split, size, d.annotations,
                                                       d.split_manifest);
    auto eval = data::load_detection_dataset(d.root, d.eval_split, size, d.annotations,
                                             d.split_manifest);
    if (!eval.samples.empty()) out.detection_eval = std::move(eval);
  }
  return out;
}

train::MetricsHistory run_training(const RunConfig& config, const fs::path& out_dir,
                                   const train::EpochHook& progress) {
  config.validate();
  RunData data = load_run_data(config);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw DataError("cannot create output directory " + out_dir.string());
  }
  train::Model model(config.model);
  const int every = config.train.checkpoint_every;
  auto hook = [&](const train::MetricsRecord& rec) {
    if (every > 0 && rec.epoch % every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch_%04d", rec.epoch);
      train::save_checkpoint(model, out_dir / kCheckpointDir / name);
    }
    if (progress) progress(rec);
  };
  train::MetricsHistory history;
  const bool detector = model.is_detector();
  if (detector) {
    const auto* eval = data.detection_eval ? &*data.detection_eval : nullptr;
    history = train::train_detector(model.mdn(), data.detection_train, eval, config.train,
                                    config.detect, hook);
  } else {
    const auto* eval = data.classification_eval ? &*data.classification_eval : nullptr;
    history = train::train_classifier(model.crn(), data.classification_train, eval, config.train,
                                      hook);
  }
  train::write_metrics(history, detector, out_dir / kMetricsFile);
  train::write_timing(history, out_dir / kTimingFile);
  train::save_checkpoint(model, out_dir / kFinalCheckpoint);
  return history;
}

}  // namespace mdn

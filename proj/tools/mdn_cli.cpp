// Command-line front end: train, eval, detect and synth.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "mdn/mdn.h"

namespace {

int report(mdn_status status) {
  if (status != MDN_OK) std::fprintf(stderr, "error: %s\n", mdn_last_error());
  return static_cast<int>(status);
}

void print_progress(int epoch, double loss, double metric, double wall_time, void*) {
  if (std::isnan(metric)) {
    std::fprintf(stderr, "epoch %4d  loss %.6f  %.1fs\n", epoch, loss, wall_time);
  } else {
    std::fprintf(stderr, "epoch %4d  loss %.6f  metric %.4f  %.1fs\n", epoch, loss, metric,
                 wall_time);
  }
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  ~Handle() { Free(ptr); }
};

int cmd_train(const std::string& config_path, const std::string& out_dir, bool quiet) {
  Handle<mdn_config, mdn_config_free> config;
  if (auto s = mdn_config_load(config_path.c_str(), &config.ptr); s != MDN_OK) return report(s);
  return report(mdn_train(config.ptr, out_dir.c_str(), quiet ? nullptr : print_progress, nullptr));
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& config_path, const std::string& out, double t, double nms) {
  Handle<mdn_model, mdn_model_free> model;
  if (auto s = mdn_model_load(checkpoint.c_str(), &model.ptr); s != MDN_OK) return report(s);
  Handle<mdn_dataset, mdn_dataset_free> dataset;
  if (!config_path.empty()) {
    Handle<mdn_config, mdn_config_free> config;
    if (auto s = mdn_config_load(config_path.c_str(), &config.ptr); s != MDN_OK) return report(s);
    if (auto s = mdn_model_check_config(model.ptr, config.ptr); s != MDN_OK) return report(s);
    if (data.empty()) {
      if (auto s = mdn_dataset_from_config(config.ptr, &dataset.ptr); s != MDN_OK) {
        return report(s);
      }
    }
  }
  if (dataset.ptr == nullptr) {
    if (data.empty()) {
      std::fprintf(stderr, "error: eval needs --data or --config\n");
      return MDN_ERR_INPUT;
    }
    if (auto s = mdn_dataset_open(model.ptr, data.c_str(), split.c_str(), &dataset.ptr);
        s != MDN_OK) {
      return report(s);
    }
  }
  if (mdn_dataset_size(dataset.ptr) == 0) {
    std::fprintf(stderr, "error: dataset is empty\n");
    return MDN_ERR_INPUT;
  }
  Handle<mdn_report, mdn_report_free> result;
  if (auto s = mdn_evaluate(model.ptr, dataset.ptr, t, nms, &result.ptr); s != MDN_OK) {
    return report(s);
  }
  std::fputs(mdn_report_text(result.ptr), stdout);
  if (!out.empty()) return report(mdn_report_write(result.ptr, out.c_str()));
  return 0;
}

int cmd_detect(const std::string& checkpoint, const std::string& image, double t, double nms,
               const std::string& out, const std::string& overlay) {
  Handle<mdn_model, mdn_model_free> model;
  if (auto s = mdn_model_load(checkpoint.c_str(), &model.ptr); s != MDN_OK) return report(s);
  Handle<mdn_detections, mdn_detections_free> dets;
  if (auto s = mdn_detect_file(model.ptr, image.c_str(), t, nms, &dets.ptr); s != MDN_OK) {
    return report(s);
  }
  const std::string id = std::filesystem::path(image).stem().string();
  if (auto s = mdn_detections_write(dets.ptr, id.c_str(), out.c_str()); s != MDN_OK) {
    return report(s);
  }
  if (!overlay.empty()) return report(mdn_render_overlay(image.c_str(), dets.ptr, overlay.c_str()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale traffic-sign classification and detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mdn_version()));

  std::string config, out_dir;
  bool quiet = false;
  auto* train = app.add_subcommand("train", "Train the model described by a config file");
  train->add_option("--config", config, "YAML run config")->required();
  train->add_option("--out", out_dir, "Output directory for metrics and checkpoints")->required();
  train->add_flag("--quiet", quiet, "Suppress per-epoch progress");

  std::string checkpoint, data, split = "test", eval_config, eval_out;
  double eval_t = 0.5, eval_nms = 0.45;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval->add_option("--data", data, "Dataset root (classification tree or detection root)");
  eval->add_option("--split", split, "Detection split to evaluate")->capture_default_str();
  eval->add_option("--config", eval_config, "Config whose model must match the checkpoint");
  eval->add_option("--out", eval_out, "Write the metrics report here");
  eval->add_option("--t", eval_t, "Score threshold")->capture_default_str();
  eval->add_option("--nms", eval_nms, "NMS IoU threshold")->capture_default_str();

  std::string det_checkpoint, image, det_out = "-", overlay;
  double det_t = 0.5, det_nms = 0.45;
  auto* detect = app.add_subcommand("detect", "Detect signs in one PPM image");
  detect->add_option("--checkpoint", det_checkpoint, "Detector checkpoint directory")->required();
  detect->add_option("--image", image, "Input image (PPM)")->required();
  detect->add_option("--t", det_t, "Score threshold")->capture_default_str();
  detect->add_option("--nms", det_nms, "NMS IoU threshold")->capture_default_str();
  detect->add_option("--out", det_out, "Detection rows, '-' for stdout")->capture_default_str();
  detect->add_option("--overlay", overlay, "Write a copy of the image with boxes drawn");

  std::size_t n = 0, train_count = 0;
  bool train_count_set = false;
  std::uint64_t seed = 0;
  int size = 384;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic detection dataset");
  synth->add_option("--n", n, "Number of scenes")->required()->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output dataset root")->required();
  synth->add_option("--size", size, "Scene size in pixels")->capture_default_str();
  synth->add_option("--train", train_count, "Scenes in the train split (default 80%)")
      ->each([&](const std::string&) { train_count_set = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : MDN_ERR_INPUT;
  }

  if (*train) return cmd_train(config, out_dir, quiet);
  if (*eval) return cmd_eval(checkpoint, data, split, eval_config, eval_out, eval_t, eval_nms);
  if (*detect) return cmd_detect(det_checkpoint, image, det_t, det_nms, det_out, overlay);
  if (*synth) {
    if (!train_count_set) train_count = n - n / 5;
    return report(mdn_synth_write(n, seed, size, train_count, synth_out.c_str()));
  }
  return MDN_ERR_INPUT;
}

#include "mdn/mdn.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>

#include "mdn/data/synthetic.hpp"
#include "mdn/error.hpp"
#include "mdn/run.hpp"

struct mdn_config {
  mdn::RunConfig config;
};

struct mdn_model {
  explicit mdn_model(mdn::train::Model m) : model(std::move(m)) {}
  mdn::train::Model model;
};

struct mdn_dataset {
  std::variant<mdn::data::ClassificationDataset, mdn::data::DetectionDataset> data;
};

struct mdn_report {
  std::string text;
  double accuracy = 0.0;
  double map = 0.0;
  double images = 0.0;
  bool detector = false;
};

struct mdn_detections {
  std::vector<mdn::detection::Detection> items;
};

namespace {

thread_local std::string g_last_error;

mdn_status fail(mdn_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <typename F>
mdn_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return MDN_OK;
  } catch (const mdn::NumericError& e) {
    return fail(MDN_ERR_NUMERIC, e.what());
  } catch (const mdn::CheckpointError& e) {
    return fail(MDN_ERR_CHECKPOINT, e.what());
  } catch (const mdn::Error& e) {
    return fail(MDN_ERR_INPUT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(MDN_ERR_INPUT, e.what());
  } catch (const std::exception& e) {
    return fail(MDN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MDN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw mdn::ContractError(std::string(what) + " must not be NULL");
}

std::string spec_string(const mdn::train::ModelSpec& s) {
  return mdn::train::kind_name(s.kind) + " classes=" + std::to_string(s.num_classes) +
         " input=" + std::to_string(s.input_size) + " width=" + std::to_string(s.width);
}

}  // namespace

extern "C" {

const char* mdn_last_error(void) { return g_last_error.c_str(); }

const char* mdn_version(void) { return "1.0.0"; }

mdn_status mdn_config_load(const char* path, mdn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mdn_config{mdn::load_run_config(path)};
  });
}

void mdn_config_free(mdn_config* config) { delete config; }

mdn_status mdn_train(const mdn_config* config, const char* out_dir, mdn_progress_fn progress,
                     void* user) {
  return guarded([&] {
    require(config, "config");
    require(out_dir, "out_dir");
    mdn::run_training(config->config, out_dir, [&](const mdn::train::MetricsRecord& rec) {
      if (!progress) return;
      double metric = std::numeric_limits<double>::quiet_NaN();
      if (rec.evaluated) {
        metric = config->config.model.kind == mdn::train::ModelKind::kMdn ? rec.map
                 : std::isnan(rec.eval_accuracy)                          ? rec.train_accuracy
                                                                          : rec.eval_accuracy;
      }
      progress(rec.epoch, rec.train_loss, metric, rec.wall_time, user);
    });
  });
}

mdn_status mdn_model_create(const mdn_config* config, mdn_model** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    *out = new mdn_model(mdn::train::Model(config->config.model));
  });
}

mdn_status mdn_model_load(const char* checkpoint_dir, mdn_model** out) {
  return guarded([&] {
    require(checkpoint_dir, "checkpoint_dir");
    require(out, "out");
    *out = new mdn_model(mdn::train::load_checkpoint(checkpoint_dir));
  });
}

mdn_status mdn_model_save(const mdn_model* model, const char* checkpoint_dir) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_dir, "checkpoint_dir");
    mdn::train::save_checkpoint(model->model, checkpoint_dir);
  });
}

mdn_status mdn_model_check_config(const mdn_model* model, const mdn_config* config) {
  return guarded([&] {
    require(model, "model");
    require(config, "config");
    auto a = model->model.spec();
    auto b = config->config.model;
    a.seed = b.seed = 0;
    if (!(a == b)) {
      throw mdn::CheckpointError("checkpoint spec (" + spec_string(a) +
                                 ") does not match config (" + spec_string(b) + ")");
    }
  });
}

int mdn_model_is_detector(const mdn_model* model) {
  return model != nullptr && model->model.is_detector() ? 1 : 0;
}

void mdn_model_free(mdn_model* model) { delete model; }

mdn_status mdn_dataset_open(const mdn_model* model, const char* path, const char* split,
                            mdn_dataset** out) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    require(out, "out");
    const auto& spec = model->model.spec();
    if (model->model.is_detector()) {
      *out = new mdn_dataset{mdn::data::load_detection_dataset(path, split ? split : "test",
                                                               spec.input_size)};
    } else {
      *out = new mdn_dataset{mdn::data::load_classification_dataset(path, spec.num_classes)};
    }
  });
}

mdn_status mdn_dataset_from_config(const mdn_config* config, mdn_dataset** out) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    auto data = mdn::load_run_data(config->config);
    if (config->config.model.kind == mdn::train::ModelKind::kMdn) {
      *out = new mdn_dataset{data.detection_eval ? std::move(*data.detection_eval)
                                                 : std::move(data.detection_train)};
    } else {
      *out = new mdn_dataset{data.classification_eval ? std::move(*data.classification_eval)
                                                      : std::move(data.classification_train)};
    }
  });
}

size_t mdn_dataset_size(const mdn_dataset* dataset) {
  if (dataset == nullptr) return 0;
  return std::visit([](const auto& d) { return d.size(); }, dataset->data);
}

void mdn_dataset_free(mdn_dataset* dataset) { delete dataset; }

mdn_status mdn_evaluate(const mdn_model* model, const mdn_dataset* dataset, double t,
                        double nms_iou, mdn_report** out) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(out, "out");
    auto report = std::make_unique<mdn_report>();
    if (model->model.is_detector()) {
      const auto* data = std::get_if<mdn::data::DetectionDataset>(&dataset->data);
      if (data == nullptr) throw mdn::DataError("detector needs a detection dataset");
      if (data->num_classes > model->model.spec().num_classes) {
        throw mdn::CheckpointError("dataset has " + std::to_string(data->num_classes) +
                                   " classes, model has " +
                                   std::to_string(model->model.spec().num_classes));
      }
      const auto r = mdn::train::evaluate_detector(model->model.mdn(), *data, {t, nms_iou},
                                                   0.5);
      report->detector = true;
      report->map = r.map;
      report->images = static_cast<double>(r.images);
      report->text = mdn::train::format_report(r);
    } else {
      const auto* data = std::get_if<mdn::data::ClassificationDataset>(&dataset->data);
      if (data == nullptr) throw mdn::DataError("classifier needs a classification dataset");
      if (data->num_classes > model->model.spec().num_classes) {
        throw mdn::CheckpointError("dataset has " + std::to_string(data->num_classes) +
                                   " classes, model has " +
                                   std::to_string(model->model.spec().num_classes));
      }
      report->accuracy = mdn::train::evaluate_classifier(model->model.crn(), *data);
      report->images = static_cast<double>(data->size());
      char line[96];
      std::snprintf(line, sizeof(line), "images %zu  accuracy %.6f\n", data->size(),
                    report->accuracy);
      report->text = line;
    }
    *out = report.release();
  });
}

const char* mdn_report_text(const mdn_report* report) {
  return report == nullptr ? "" : report->text.c_str();
}

mdn_status mdn_report_value(const mdn_report* report, const char* key, double* out) {
  return guarded([&] {
    require(report, "report");
    require(key, "key");
    require(out, "out");
    const std::string k = key;
    if (k == "images") {
      *out = report->images;
    } else if (k == "accuracy" && !report->detector) {
      *out = report->accuracy;
    } else if (k == "map" && report->detector) {
      *out = report->map;
    } else {
      throw mdn::ContractError("report has no value '" + k + "'");
    }
  });
}

mdn_status mdn_report_write(const mdn_report* report, const char* path) {
  return guarded([&] {
    require(report, "report");
    require(path, "path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mdn::DataError(std::string("cannot write ") + path);
    out << report->text;
  });
}

void mdn_report_free(mdn_report* report) { delete report; }

mdn_status mdn_detect_file(const mdn_model* model, const char* image_path, double t,
                           double nms_iou, mdn_detections** out) {
  return guarded([&] {
    require(model, "model");
    require(image_path, "image_path");
    require(out, "out");
    if (!model->model.is_detector()) {
      throw mdn::CheckpointError("detection needs a detector checkpoint");
    }
    const auto& mdn_model = model->model.mdn();
    const mdn::Index size = mdn_model.spec().input_size;
    const auto image = mdn::data::resize(mdn::data::read_ppm(image_path), size, size);
    const mdn::Tensor input(mdn::Shape{3, size, size}, image.pixels);
    *out = new mdn_detections{mdn::detection::detect(mdn_model, input, {t, nms_iou})};
  });
}

size_t mdn_detections_count(const mdn_detections* detections) {
  return detections == nullptr ? 0 : detections->items.size();
}

mdn_status mdn_detections_get(const mdn_detections* detections, size_t index,
                              mdn_detection* out) {
  return guarded([&] {
    require(detections, "detections");
    require(out, "out");
    if (index >= detections->items.size()) throw mdn::ContractError("detection index out of range");
    const auto& d = detections->items[index];
    *out = {d.class_id, d.score, d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax};
  });
}

mdn_status mdn_detections_write(const mdn_detections* detections, const char* image_id,
                                const char* path) {
  return guarded([&] {
    require(detections, "detections");
    require(image_id, "image_id");
    require(path, "path");
    std::string text;
    char line[256];
    for (const auto& d : detections->items) {
      std::snprintf(line, sizeof(line), "%s;%d;%.6f;%.6f;%.6f;%.6f;%.6f\n", image_id, d.class_id,
                    d.score, d.box.xmin, d.box.ymin, d.box.xmax, d.box.ymax);
      text += line;
    }
    if (std::string(path) == "-") {
      std::fwrite(text.data(), 1, text.size(), stdout);
      std::fflush(stdout);
      return;
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw mdn::DataError(std::string("cannot write ") + path);
    out << text;
  });
}

mdn_status mdn_render_overlay(const char* image_path, const mdn_detections* detections,
                              const char* out_path) {
  return guarded([&] {
    require(image_path, "image_path");
    require(detections, "detections");
    require(out_path, "out_path");
    auto image = mdn::data::read_ppm(image_path);
    const double w = static_cast<double>(image.width);
    const double h = static_cast<double>(image.height);
    for (const auto& d : detections->items) {
      const std::array<float, 3> color = d.class_id == 1   ? std::array<float, 3>{1.0f, 0.0f, 0.0f}
                                         : d.class_id == 2 ? std::array<float, 3>{0.0f, 0.3f, 1.0f}
                                         : d.class_id == 3 ? std::array<float, 3>{1.0f, 0.9f, 0.0f}
                                                           : std::array<float, 3>{0.0f, 1.0f, 0.0f};
      mdn::data::draw_rectangle(image, static_cast<mdn::Index>(d.box.xmin * w),
                                static_cast<mdn::Index>(d.box.ymin * h),
                                static_cast<mdn::Index>(d.box.xmax * w) - 1,
                                static_cast<mdn::Index>(d.box.ymax * h) - 1, color);
    }
    mdn::data::write_ppm(image, out_path);
  });
}

void mdn_detections_free(mdn_detections* detections) { delete detections; }

mdn_status mdn_synth_write(size_t count, uint64_t seed, int image_size, size_t train_count,
                           const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    if (count == 0) throw mdn::ConfigError("synthetic scene count must be positive");
    mdn::data::SceneConfig sc;
    sc.image_size = image_size;
    sc.max_sign = std::min<mdn::Index>(sc.max_sign, image_size);
    sc.min_sign = std::min<mdn::Index>(sc.min_sign, sc.max_sign);
    const auto ds = mdn::data::generate_scenes(static_cast<mdn::Index>(count), seed, sc);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw mdn::DataError(std::string("cannot create ") + out_dir + ": " + ec.message());
    mdn::data::write_detection_dataset(ds, out_dir, train_count);
  });
}

}  // extern "C"

#include "mdn/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include "mdn/data/augment.hpp"
#include "mdn/detection/loss.hpp"
#include "mdn/error.hpp"
#include "mdn/optim.hpp"

namespace mdn::train {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(data::mix_seed(seed, static_cast<std::uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

bool due(int every, int epoch, int last) {
  return every > 0 && (epoch % every == 0 || epoch == last);
}

void check_finite(double loss, double lr, int epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    char msg[160];
    std::snprintf(msg, sizeof(msg), "non-finite loss at epoch %d, batch %zu (lr %g)", epoch, batch,
                  lr);
    throw NumericError(msg);
  }
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("train.epochs must be positive");
  if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train.weight_decay must be finite and >= 0");
  }
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  const auto& a = augment_ranges;
  if (!(a.max_rotation_deg >= 0 && a.max_translate >= 0 && a.max_brightness >= 0 &&
        a.min_scale > 0 && a.min_scale <= a.max_scale && a.min_contrast >= 0 &&
        a.min_contrast <= a.max_contrast)) {
    throw ConfigError("train.augmentation: ranges must be non-negative with min <= max");
  }
  const auto& sr = scene_ranges;
  if (!(sr.flip_probability >= 0 && sr.flip_probability <= 1 && sr.max_translate >= 0 &&
        sr.max_brightness >= 0 && sr.min_scale > 0 && sr.min_scale <= sr.max_scale &&
        sr.min_contrast >= 0 && sr.min_contrast <= sr.max_contrast)) {
    throw ConfigError("train.scene_augmentation: ranges must be non-negative with min <= max");
  }
  if (!(stop_at_accuracy >= 0.0 && stop_at_accuracy <= 1.0)) {
    throw ConfigError("train.stop_at_accuracy must be in [0, 1]");
  }
  if (!(loss.alpha >= 0.0)) throw ConfigError("train.loss.alpha must be >= 0");
  if (!(loss.negative_ratio >= 0.0)) throw ConfigError("train.loss.negative_ratio must be >= 0");
  if (!(loss.match_iou > 0.0 && loss.match_iou <= 1.0)) {
    throw ConfigError("train.loss.match_iou must be in (0, 1]");
  }
}

MetricsHistory train_classifier(Crn& model, const data::ClassificationDataset& train_set,
                                const data::ClassificationDataset* eval_set,
                                const TrainConfig& config, const EpochHook& hook) {
  config.validate();
  if (train_set.samples.empty()) throw DataError("train_classifier: empty dataset");
  for (const auto& s : train_set.samples) {
    if (s.label < 0 || s.label >= model.spec().num_classes) {
      throw DataError("train_classifier: label " + std::to_string(s.label) +
                      " outside the model's classes");
    }
  }
  const auto start = Clock::now();
  auto params = model.parameters();
  SgdMomentum<float> opt(static_cast<float>(config.lr), static_cast<float>(config.momentum),
                         static_cast<float>(config.weight_decay));
  MetricsHistory history;
  const std::size_t n = train_set.samples.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < n; b += batch, ++batch_index) {
      const std::size_t e = std::min(n, b + batch);
      std::vector<data::Image> augmented;
      std::vector<const data::Image*> images;
      std::vector<int> labels;
      if (config.augment) augmented.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) {
        const auto& s = train_set.samples[order[i]];
        if (config.augment) {
          const auto sample_seed = data::mix_seed(
              data::mix_seed(config.seed, static_cast<std::uint64_t>(epoch)), order[i]);
          augmented.push_back(data::augment_image(s.image, sample_seed, config.augment_ranges));
          images.push_back(&augmented.back());
        } else {
          images.push_back(&s.image);
        }
        labels.push_back(s.label);
      }
      const Tensor logits = model.forward(data::stack_images(images), Mode::kTrain);
      const Tensor loss = cross_entropy(logits, std::span<const int>(labels));
      check_finite(loss.item(), config.lr, epoch, batch_index);
      backward(loss);
      opt.step(params);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(e - b);
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    if (due(config.eval_every, epoch, config.epochs)) {
      rec.evaluated = true;
      rec.train_accuracy = evaluate_classifier(model, train_set);
      rec.eval_accuracy = eval_set ? evaluate_classifier(model, *eval_set)
                                   : std::numeric_limits<double>::quiet_NaN();
    }
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    history.push_back(rec);
    if (hook) hook(rec);
    if (rec.evaluated && config.stop_at_accuracy > 0.0 &&
        rec.train_accuracy >= config.stop_at_accuracy) {
      break;
    }
  }
  return history;
}

MetricsHistory train_detector(detection::Mdn& model, const data::DetectionDataset& train_set,
                              const data::DetectionDataset* eval_set, const TrainConfig& config,
                              const detection::DetectOptions& detect_options,
                              const EpochHook& hook) {
  config.validate();
  if (train_set.samples.empty()) throw DataError("train_detector: empty dataset");
  const Index size = model.spec().input_size;
  for (const auto& s : train_set.samples) {
    if (s.image.height != size || s.image.width != size) {
      throw DataError("train_detector: image " + s.image_id + " is not " + std::to_string(size) +
                      "x" + std::to_string(size));
    }
    for (const auto& gt : s.boxes) {
      if (gt.class_id < 1 || gt.class_id > model.spec().num_classes) {
        throw DataError("train_detector: class id " + std::to_string(gt.class_id) + " in " +
                        s.image_id + " outside the model's classes");
      }
    }
  }
  const auto start = Clock::now();
  auto params = model.parameters();
  SgdMomentum<float> opt(static_cast<float>(config.lr), static_cast<float>(config.momentum),
                         static_cast<float>(config.weight_decay));
  MetricsHistory history;
  const std::size_t n = train_set.samples.size();
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const auto& anchors = model.anchors();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(n, config.seed, epoch);
    double loss_sum = 0.0, conf_sum = 0.0, loc_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < n; b += batch, ++batch_index) {
      const std::size_t e = std::min(n, b + batch);
      std::vector<data::DetectionSample> augmented;
      std::vector<const data::Image*> images;
      std::vector<std::vector<detection::GroundTruthBox>> gts;
      std::vector<detection::MatchAssignment> assignments;
      int positives = 0;
      if (config.augment) augmented.reserve(e - b);
      for (std::size_t i = b; i < e; ++i) {
        const data::DetectionSample* sample = &train_set.samples[order[i]];
        if (config.augment) {
          const auto sample_seed = data::mix_seed(
              data::mix_seed(config.seed, static_cast<std::uint64_t>(epoch)), order[i]);
          augmented.push_back(data::augment_scene(*sample, sample_seed, config.scene_ranges));
          sample = &augmented.back();
        }
        const auto& s = *sample;
        images.push_back(&s.image);
        gts.push_back(s.boxes);
        assignments.push_back(detection::match_anchors(anchors, s.boxes, config.loss));
        positives += assignments.back().num_positive();
      }
      // Without positives the objective is identically zero.
      if (positives == 0) continue;
      const auto out = model.forward(data::stack_images(images), Mode::kTrain);
      const Tensor conf = detection::confidence_loss(
          out.class_logits, std::span<const detection::MatchAssignment>(assignments), config.loss);
      const Tensor loc = detection::localization_loss(
          out.box_offsets, std::span<const detection::MatchAssignment>(assignments),
          std::span<const std::vector<detection::GroundTruthBox>>(gts), anchors);
      const Tensor total = detection::total_loss(conf, loc, positives, config.loss);
      check_finite(total.item(), config.lr, epoch, batch_index);
      backward(total);
      opt.step(params);
      const double w = static_cast<double>(e - b);
      loss_sum += static_cast<double>(total.item()) * w;
      conf_sum += static_cast<double>(conf.item()) / positives * w;
      loc_sum += static_cast<double>(loc.item()) / positives * w;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.conf_loss = conf_sum / static_cast<double>(n);
    rec.loc_loss = loc_sum / static_cast<double>(n);
    if (due(config.eval_every, epoch, config.epochs)) {
      rec.evaluated = true;
      const auto report = evaluate_detector(model, eval_set ? *eval_set : train_set,
                                            detect_options, config.loss.match_iou);
      rec.map = report.map;
      rec.groups = report.groups;
    }
    rec.wall_time = std::chrono::duration<double>(Clock::now() - start).count();
    history.push_back(rec);
    if (hook) hook(rec);
  }
  return history;
}

std::string format_metrics(const MetricsHistory& history, bool detection) {
  std::vector<std::string> groups;
  for (const auto& r : history) {
    if (r.evaluated && !r.groups.empty()) {
      for (const auto& g : r.groups) groups.push_back(g.name);
      break;
    }
  }
  std::string out = detection ? "epoch;train_loss;conf_loss;loc_loss;map"
                              : "epoch;train_loss;train_accuracy;eval_accuracy";
  for (const auto& g : groups) out += ";recall_" + g + ";precision_" + g;
  out += '\n';
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + ';' + fmt(r.train_loss);
    if (detection) {
      out += ';' + fmt(r.conf_loss) + ';' + fmt(r.loc_loss) + ';' + (r.evaluated ? fmt(r.map) : "");
      for (std::size_t i = 0; i < groups.size(); ++i) {
        if (r.evaluated && i < r.groups.size()) {
          out += ';' + fmt(r.groups[i].recall) + ';' + fmt(r.groups[i].precision);
        } else {
          out += ";;";
        }
      }
    } else {
      out += ';' + (r.evaluated ? fmt(r.train_accuracy) : "");
      out += ';' + (r.evaluated ? fmt(r.eval_accuracy) : "");
    }
    out += '\n';
  }
  return out;
}

void write_metrics(const MetricsHistory& history, bool detection,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write metrics file " + path.string());
  out << format_metrics(history, detection);
}

void write_timing(const MetricsHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write timing file " + path.string());
  out << "epoch;wall_time\n";
  for (const auto& r : history) out << r.epoch << ';' << fmt(r.wall_time) << '\n';
}

}  // namespace mdn::train

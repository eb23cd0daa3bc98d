#include "mdn/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "mdn/error.hpp"

namespace mdn {

namespace fs = std::filesystem;

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& what) const {
    const auto mark = node.Mark();
    std::string where = source_;
    if (mark.line >= 0) where += ":" + std::to_string(mark.line + 1);
    throw ConfigError(where + ": " + what);
  }

  template <typename T>
  T as(const YAML::Node& node, const std::string& key) const {
    if (!node.IsScalar()) fail(node, "'" + key + "' must be a scalar");
    try {
      return node.as<T>();
    } catch (const YAML::Exception&) {
      fail(node, "bad value '" + node.Scalar() + "' for '" + key + "'");
    }
  }

  // Visits every key of a mapping section; unknown keys are errors.
  void section(const YAML::Node& node, const std::string& name,
               const std::map<std::string, std::function<void(const YAML::Node&)>>& fields) const {
    if (!node.IsMap()) fail(node, "section '" + name + "' must be a mapping");
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      const auto it = fields.find(key);
      if (it == fields.end()) fail(kv.first, "unknown key '" + key + "' in section '" + name + "'");
      it->second(kv.second);
    }
  }

 private:
  std::string source_;
};

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (!(detect.threshold >= 0.0)) throw ConfigError("detect.t must be >= 0");
  if (!(detect.nms_iou >= 0.0 && detect.nms_iou <= 1.0)) {
    throw ConfigError("detect.nms_iou must be in [0, 1]");
  }
  if (data.source == DataSource::kDirectory && data.root.empty()) {
    throw ConfigError("data.root is required when data.source is 'directory'");
  }
  if (data.balance && !(0 <= data.balance_low && data.balance_low < data.balance_high)) {
    throw ConfigError("data.balance_low must be below data.balance_high");
  }
  if (data.source == DataSource::kSynthetic && data.synthetic_train < 1) {
    throw ConfigError("data.synthetic_train must be positive");
  }
  if (data.synthetic_eval < 0) throw ConfigError("data.synthetic_eval must be >= 0");
}

RunConfig parse_run_config(const std::string& text, const std::string& source_name,
                           const fs::path& base_dir) {
  Reader r(source_name);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) {
    cfg.validate();
    return cfg;
  }
  if (!root.IsMap()) r.fail(root, "top level must be a mapping");

  bool input_size_set = false;
  bool num_classes_set = false;
  auto path_of = [&](const YAML::Node& n, const std::string& key) {
    const fs::path p = r.as<std::string>(n, key);
    return p.is_absolute() ? p : base_dir / p;
  };
  auto integer = [&](const YAML::Node& n, const std::string& key) {
    return static_cast<Index>(r.as<long long>(n, key));
  };
  // Field setter for a plain double.
  auto real = [&](double& target, const char* key) {
    return [&r, &target, key](const YAML::Node& n) { target = r.as<double>(n, key); };
  };

  std::map<std::string, std::function<void(const YAML::Node&)>> sections;
  sections["model"] = [&](const YAML::Node& s) {
    r.section(s, "model",
              {{"kind",
                [&](const YAML::Node& n) {
                  try {
                    cfg.model.kind = train::parse_kind(r.as<std::string>(n, "kind"));
                  } catch (const ConfigError& e) {
                    r.fail(n, e.what());
                  }
                }},
               {"input_size",
                [&](const YAML::Node& n) {
                  cfg.model.input_size = integer(n, "input_size");
                  input_size_set = true;
                }},
               {"num_classes",
                [&](const YAML::Node& n) {
                  cfg.model.num_classes = integer(n, "num_classes");
                  num_classes_set = true;
                }},
               {"width", [&](const YAML::Node& n) { cfg.model.width = integer(n, "width"); }},
               {"seed",
                [&](const YAML::Node& n) { cfg.model.seed = r.as<std::uint64_t>(n, "seed"); }}});
  };
  sections["data"] = [&](const YAML::Node& s) {
    auto& d = cfg.data;
    r.section(
        s, "data",
        {{"source",
          [&](const YAML::Node& n) {
            const auto v = r.as<std::string>(n, "source");
            if (v == "synthetic") {
              d.source = DataSource::kSynthetic;
            } else if (v == "directory") {
              d.source = DataSource::kDirectory;
            } else {
              r.fail(n, "data.source must be 'synthetic' or 'directory'");
            }
          }},
         {"root", [&](const YAML::Node& n) { d.root = path_of(n, "root"); }},
         {"eval_root", [&](const YAML::Node& n) { d.eval_root = path_of(n, "eval_root"); }},
         {"annotations", [&](const YAML::Node& n) { d.annotations = path_of(n, "annotations"); }},
         {"split_manifest",
          [&](const YAML::Node& n) { d.split_manifest = path_of(n, "split_manifest"); }},
         {"train_split",
          [&](const YAML::Node& n) { d.train_split = r.as<std::string>(n, "train_split"); }},
         {"eval_split",
          [&](const YAML::Node& n) { d.eval_split = r.as<std::string>(n, "eval_split"); }},
         {"balance", [&](const YAML::Node& n) { d.balance = r.as<bool>(n, "balance"); }},
         {"balance_low", [&](const YAML::Node& n) { d.balance_low = integer(n, "balance_low"); }},
         {"balance_high",
          [&](const YAML::Node& n) { d.balance_high = integer(n, "balance_high"); }},
         {"synthetic_train",
          [&](const YAML::Node& n) { d.synthetic_train = integer(n, "synthetic_train"); }},
         {"synthetic_eval",
          [&](const YAML::Node& n) { d.synthetic_eval = integer(n, "synthetic_eval"); }},
         {"synthetic_seed",
          [&](const YAML::Node& n) {
            d.synthetic_seed = r.as<std::uint64_t>(n, "synthetic_seed");
          }},
         {"scene_size", [&](const YAML::Node& n) { d.scene_size = integer(n, "scene_size"); }},
         {"min_sign", [&](const YAML::Node& n) { d.min_sign = integer(n, "min_sign"); }},
         {"max_sign", [&](const YAML::Node& n) { d.max_sign = integer(n, "max_sign"); }},
         {"fog", [&](const YAML::Node& n) { d.fog = r.as<double>(n, "fog"); }},
         {"occlusion", [&](const YAML::Node& n) { d.occlusion = r.as<double>(n, "occlusion"); }}});
  };
  sections["train"] = [&](const YAML::Node& s) {
    auto& t = cfg.train;
    r.section(
        s, "train",
        {{"epochs", [&](const YAML::Node& n) { t.epochs = r.as<int>(n, "epochs"); }},
         {"batch_size", [&](const YAML::Node& n) { t.batch_size = integer(n, "batch_size"); }},
         {"lr", [&](const YAML::Node& n) { t.lr = r.as<double>(n, "lr"); }},
         {"momentum", [&](const YAML::Node& n) { t.momentum = r.as<double>(n, "momentum"); }},
         {"weight_decay",
          [&](const YAML::Node& n) { t.weight_decay = r.as<double>(n, "weight_decay"); }},
         {"seed", [&](const YAML::Node& n) { t.seed = r.as<std::uint64_t>(n, "seed"); }},
         {"checkpoint_every",
          [&](const YAML::Node& n) { t.checkpoint_every = r.as<int>(n, "checkpoint_every"); }},
         {"eval_every", [&](const YAML::Node& n) { t.eval_every = r.as<int>(n, "eval_every"); }},
         {"augment", [&](const YAML::Node& n) { t.augment = r.as<bool>(n, "augment"); }},
         {"stop_at_accuracy",
          [&](const YAML::Node& n) { t.stop_at_accuracy = r.as<double>(n, "stop_at_accuracy"); }},
         {"augmentation", [&](const YAML::Node& a) {
            auto& g = t.augment_ranges;
            r.section(a, "train.augmentation",
                      {{"rotation_deg", real(g.max_rotation_deg, "rotation_deg")},
                       {"translate", real(g.max_translate, "translate")},
                       {"min_scale", real(g.min_scale, "min_scale")},
                       {"max_scale", real(g.max_scale, "max_scale")},
                       {"brightness", real(g.max_brightness, "brightness")},
                       {"min_contrast", real(g.min_contrast, "min_contrast")},
                       {"max_contrast", real(g.max_contrast, "max_contrast")}});
          }},
         {"scene_augmentation", [&](const YAML::Node& a) {
            auto& g = t.scene_ranges;
            r.section(a, "train.scene_augmentation",
                      {{"flip_probability", real(g.flip_probability, "flip_probability")},
                       {"translate", real(g.max_translate, "translate")},
                       {"min_scale", real(g.min_scale, "min_scale")},
                       {"max_scale", real(g.max_scale, "max_scale")},
                       {"brightness", real(g.max_brightness, "brightness")},
                       {"min_contrast", real(g.min_contrast, "min_contrast")},
                       {"max_contrast", real(g.max_contrast, "max_contrast")}});
          }},
         {"loss", [&](const YAML::Node& l) {
            r.section(l, "train.loss",
                      {{"alpha", [&](const YAML::Node& n) { t.loss.alpha = r.as<double>(n, "alpha"); }},
                       {"negative_ratio",
                        [&](const YAML::Node& n) {
                          t.loss.negative_ratio = r.as<double>(n, "negative_ratio");
                        }},
                       {"match_iou", [&](const YAML::Node& n) {
                          t.loss.match_iou = r.as<double>(n, "match_iou");
                        }}});
          }}});
  };
  sections["detect"] = [&](const YAML::Node& s) {
    r.section(s, "detect",
              {{"t", [&](const YAML::Node& n) { cfg.detect.threshold = r.as<double>(n, "t"); }},
               {"nms_iou",
                [&](const YAML::Node& n) { cfg.detect.nms_iou = r.as<double>(n, "nms_iou"); }}});
  };
  r.section(root, "top level", sections);

  if (cfg.model.kind == train::ModelKind::kMdn) {
    if (!input_size_set) cfg.model.input_size = 384;
    if (!num_classes_set) cfg.model.num_classes = 3;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source_name + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string(), path.parent_path());
}

}  // namespace mdn

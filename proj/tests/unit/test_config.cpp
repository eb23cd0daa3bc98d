#include <doctest.h>

#include "mdn/config.hpp"
#include "mdn/error.hpp"

using namespace mdn;

TEST_SUITE("config") {
  TEST_CASE("a full detection config parses") {
    const auto cfg = parse_run_config(
        "model:\n  kind: mdn\n  width: 32\n"
        "data:\n  source: synthetic\n  synthetic_train: 20\n  synthetic_eval: 5\n"
        "train:\n  epochs: 3\n  batch_size: 4\n  lr: 0.01\n  loss:\n    alpha: 2\n"
        "detect:\n  t: 0.4\n",
        "run.yaml", "/base");
    CHECK(cfg.model.kind == train::ModelKind::kMdn);
    CHECK(cfg.model.input_size == 384);
    CHECK(cfg.model.num_classes == 3);
    CHECK(cfg.model.width == 32);
    CHECK(cfg.data.synthetic_eval == 5);
    CHECK(cfg.train.epochs == 3);
    CHECK(cfg.train.loss.alpha == 2.0);
    CHECK(cfg.detect.threshold == doctest::Approx(0.4));
  }

  TEST_CASE("augmentation ranges are configurable") {
    const auto cfg = parse_run_config(
        "train:\n  augment: true\n  augmentation:\n    rotation_deg: 5\n    max_contrast: 1.5\n"
        "  scene_augmentation:\n    flip_probability: 0\n",
        "run.yaml", ".");
    CHECK(cfg.train.augment);
    CHECK(cfg.train.augment_ranges.max_rotation_deg == 5.0);
    CHECK(cfg.train.augment_ranges.max_contrast == 1.5);
    CHECK(cfg.train.scene_ranges.flip_probability == 0.0);
    CHECK_THROWS_AS(parse_run_config("train:\n  augmentation:\n    min_scale: 2\n", "x", "."),
                    ConfigError);
    CHECK_THROWS_AS(parse_run_config("train:\n  augmentation:\n    shear: 2\n", "x", "."),
                    ConfigError);
  }

  TEST_CASE("relative paths resolve against the config directory") {
    const auto cfg = parse_run_config(
        "model:\n  kind: crn\n  num_classes: 5\ndata:\n  source: directory\n  root: train\n",
        "run.yaml", "/base/dir");
    CHECK(cfg.data.root == std::filesystem::path("/base/dir/train"));
  }

  TEST_CASE("unknown keys report their line") {
    try {
      parse_run_config("model:\n  kind: crn\ntrain:\n  epochs: 2\n  learning_rate: 0.1\n",
                       "run.yaml", ".");
      FAIL("expected a config error");
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      CHECK(what.find("run.yaml:5") != std::string::npos);
      CHECK(what.find("learning_rate") != std::string::npos);
    }
  }

  TEST_CASE("invalid values are rejected") {
    CHECK_THROWS_AS(parse_run_config("model:\n  kind: resnet\n", "x", "."), ConfigError);
    CHECK_THROWS_AS(parse_run_config("train:\n  epochs: many\n", "x", "."), ConfigError);
    CHECK_THROWS_AS(parse_run_config("train:\n  batch_size: 0\n", "x", "."), ConfigError);
    CHECK_THROWS_AS(parse_run_config("model: [\n", "x", "."), ConfigError);
    CHECK_THROWS_AS(parse_run_config("model:\n  kind: crn\n  input_size: 64\n", "x", "."),
                    ConfigError);
    CHECK_THROWS_AS(load_run_config("/nonexistent/run.yaml"), ConfigError);
  }
}

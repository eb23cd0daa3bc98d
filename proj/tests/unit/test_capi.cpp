#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "mdn/mdn.h"

namespace fs = std::filesystem;

namespace {

struct Scratch {
  fs::path path;
  explicit Scratch(const std::string& tag)
      : path(fs::temp_directory_path() / ("mdn_capi_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MDN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kDetectorConfig =
    "model:\n  kind: mdn\n  input_size: 128\n  width: 8\n"
    "data:\n  source: synthetic\n  synthetic_train: 4\n  synthetic_eval: 2\n"
    "  scene_size: 128\n  min_sign: 20\n  max_sign: 48\n"
    "train:\n  epochs: 1\n  batch_size: 2\n  lr: 0.001\n";

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("errors carry status and message") {
    CHECK(std::string(mdn_version()).size() > 0);
    mdn_config* cfg = nullptr;
    CHECK(mdn_config_load("/nonexistent/run.yaml", &cfg) == MDN_ERR_INPUT);
    CHECK(cfg == nullptr);
    CHECK(std::string(mdn_last_error()).size() > 0);
    mdn_model* model = nullptr;
    CHECK(mdn_model_load("/nonexistent/ckpt", &model) == MDN_ERR_CHECKPOINT);
    CHECK(mdn_model_create(nullptr, &model) == MDN_ERR_INPUT);
  }

  TEST_CASE("train, evaluate and detect through handles") {
    Scratch dir("flow");
    write_text(dir.path / "run.yaml", kDetectorConfig);
    mdn_config* cfg = nullptr;
    REQUIRE(mdn_config_load((dir.path / "run.yaml").c_str(), &cfg) == MDN_OK);

    int calls = 0;
    auto progress = [](int epoch, double loss, double metric, double, void* user) {
      ++*static_cast<int*>(user);
      CHECK(epoch == 1);
      CHECK(std::isfinite(loss));
      CHECK(metric >= 0.0);
    };
    REQUIRE(mdn_train(cfg, (dir.path / "out").c_str(), progress, &calls) == MDN_OK);
    CHECK(calls == 1);
    CHECK(fs::exists(dir.path / "out/metrics.txt"));
    CHECK(fs::exists(dir.path / "out/timing.txt"));

    mdn_model* model = nullptr;
    REQUIRE(mdn_model_load((dir.path / "out/checkpoint").c_str(), &model) == MDN_OK);
    CHECK(mdn_model_is_detector(model) == 1);
    CHECK(mdn_model_check_config(model, cfg) == MDN_OK);

    REQUIRE(mdn_synth_write(3, 9, 128, 2, (dir.path / "synth").c_str()) == MDN_OK);
    mdn_dataset* ds = nullptr;
    REQUIRE(mdn_dataset_open(model, (dir.path / "synth").c_str(), "train", &ds) == MDN_OK);
    CHECK(mdn_dataset_size(ds) == 2);
    mdn_report* report = nullptr;
    REQUIRE(mdn_evaluate(model, ds, 0.5, 0.45, &report) == MDN_OK);
    double images = 0, map = -1;
    CHECK(mdn_report_value(report, "images", &images) == MDN_OK);
    CHECK(images == 2.0);
    CHECK(mdn_report_value(report, "map", &map) == MDN_OK);
    CHECK(map >= 0.0);
    CHECK(mdn_report_value(report, "accuracy", &map) == MDN_ERR_INPUT);
    CHECK(std::string(mdn_report_text(report)).find("mAP") != std::string::npos);
    mdn_report_free(report);
    mdn_dataset_free(ds);

    mdn_detections* dets = nullptr;
    REQUIRE(mdn_detect_file(model, (dir.path / "synth/images/scene_00000.ppm").c_str(), 0.0, 0.45,
                            &dets) == MDN_OK);
    const auto n = mdn_detections_count(dets);
    CHECK(n > 0);
    mdn_detection d{};
    REQUIRE(mdn_detections_get(dets, 0, &d) == MDN_OK);
    CHECK(d.class_id >= 1);
    CHECK(d.xmin >= 0.0);
    CHECK(d.xmax <= 1.0);
    CHECK(mdn_detections_get(dets, n, &d) == MDN_ERR_INPUT);
    REQUIRE(mdn_detections_write(dets, "scene_00000", (dir.path / "dets.txt").c_str()) == MDN_OK);
    CHECK(read_text(dir.path / "dets.txt").rfind("scene_00000;", 0) == 0);
    REQUIRE(mdn_render_overlay((dir.path / "synth/images/scene_00000.ppm").c_str(), dets,
                               (dir.path / "overlay.ppm").c_str()) == MDN_OK);
    CHECK(fs::file_size(dir.path / "overlay.ppm") == fs::file_size(dir.path / "synth/images/scene_00000.ppm"));
    mdn_detections_free(dets);

    mdn_model_free(model);
    mdn_config_free(cfg);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("exit codes") {
    Scratch dir("cli");
    CHECK(run_cli("") == 2);
    CHECK(run_cli("frobnicate") == 2);
    CHECK(run_cli("synth --n 3 --seed 1 --size 128 --out " + (dir.path / "synth").string()) == 0);
    CHECK(fs::exists(dir.path / "synth/annotations.txt"));

    write_text(dir.path / "bad.yaml", "model:\n  kind: crn\n  depth: 3\n");
    CHECK(run_cli("train --config " + (dir.path / "bad.yaml").string() + " --out " +
                  (dir.path / "bad").string()) == 2);

    write_text(dir.path / "diverge.yaml",
               "model:\n  kind: crn\n  num_classes: 2\n"
               "data:\n  source: synthetic\n  synthetic_train: 4\n"
               "train:\n  epochs: 3\n  batch_size: 2\n  lr: 1.0e+30\n");
    CHECK(run_cli("train --quiet --config " + (dir.path / "diverge.yaml").string() + " --out " +
                  (dir.path / "diverge").string()) == 3);

    write_text(dir.path / "run.yaml", kDetectorConfig);
    CHECK(run_cli("train --quiet --config " + (dir.path / "run.yaml").string() + " --out " +
                  (dir.path / "run").string()) == 0);
    const std::string ckpt = (dir.path / "run/checkpoint").string();
    CHECK(run_cli("eval --checkpoint " + ckpt + " --data " + (dir.path / "synth").string() +
                  " --split train --out " + (dir.path / "report.txt").string()) == 0);
    CHECK(fs::exists(dir.path / "report.txt"));
    CHECK(run_cli("detect --checkpoint " + ckpt + " --image " +
                  (dir.path / "synth/images/scene_00000.ppm").string() + " --out " +
                  (dir.path / "dets.txt").string()) == 0);
    CHECK(run_cli("detect --checkpoint " + ckpt + " --image " + (dir.path / "none.ppm").string()) == 2);

    fs::copy(dir.path / "run/checkpoint", dir.path / "broken");
    write_text(dir.path / "broken/params.bin", "garbage");
    CHECK(run_cli("eval --checkpoint " + (dir.path / "broken").string() + " --data " +
                  (dir.path / "synth").string()) == 4);
  }
}

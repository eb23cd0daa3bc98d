#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <random>

#include "helpers.hpp"
#include "mdn/data/synthetic.hpp"
#include "mdn/error.hpp"
#include "mdn/train/checkpoint.hpp"
#include "mdn/train/metrics.hpp"
#include "mdn/train/trainer.hpp"

using namespace mdn;
using namespace mdn::train;
using detection::CornerBox;
using detection::Detection;
using detection::GroundTruthBox;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<float> snapshot(const ParameterSet<float>& params) {
  std::vector<float> out;
  for (const auto& p : params) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

CornerBox random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(0.0, 0.7), ext(0.1, 0.3);
  const double x = pos(rng), y = pos(rng);
  return {x, y, x + ext(rng), y + ext(rng)};
}

CornerBox jitter(const CornerBox& b, std::mt19937_64& rng, double amount) {
  std::uniform_real_distribution<double> d(-amount, amount);
  return {b.xmin + d(rng), b.ymin + d(rng), b.xmax + d(rng), b.ymax + d(rng)};
}

data::DetectionDataset small_scenes(Index count, std::uint64_t seed) {
  data::SceneConfig cfg;
  cfg.image_size = 128;
  cfg.min_sign = 20;
  cfg.max_sign = 48;
  return data::generate_scenes(count, seed, cfg);
}

detection::MdnSpec small_mdn() { return {128, 3, 8}; }

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("eleven-point AP agrees with a threshold sweep") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t images = 10;
      std::vector<std::vector<GroundTruthBox>> gts(images);
      std::vector<std::vector<CornerBox>> gt_corners(images);
      std::vector<std::vector<Detection>> dets(images);
      std::vector<oracle::ScoredBox> scored;
      std::uniform_int_distribution<int> count(0, 3);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (std::size_t i = 0; i < images; ++i) {
        for (int g = count(rng); g > 0; --g) {
          const auto b = random_box(rng);
          gts[i].push_back({1, detection::to_center(b)});
          gt_corners[i].push_back(b);
        }
        for (int d = count(rng) + 1; d > 0; --d) {
          CornerBox b = (!gt_corners[i].empty() && unit(rng) < 0.7)
                            ? jitter(gt_corners[i][static_cast<std::size_t>(rng() % gt_corners[i].size())], rng, 0.05)
                            : random_box(rng);
          const double score = unit(rng);  // distinct with probability one
          dets[i].push_back({1, score, b});
          scored.push_back({i, score, b});
        }
      }
      const auto report =
          evaluate_detections(dets, gts, 1, [](int) { return std::string("all"); }, 0.5);
      const double expected = oracle::ap_all_thresholds(scored, gt_corners, 0.5);
      CHECK(report.classes.at(0).ap == doctest::Approx(expected).epsilon(1e-6));
    }
  }

  TEST_CASE("perfect and empty detections") {
    std::mt19937_64 rng(3);
    std::vector<std::vector<GroundTruthBox>> gts(4);
    std::vector<std::vector<Detection>> perfect(4), none(4);
    for (std::size_t i = 0; i < 4; ++i) {
      for (int cls = 1; cls <= 3; ++cls) {
        const auto b = random_box(rng);
        gts[i].push_back({cls, detection::to_center(b)});
        perfect[i].push_back({cls, 0.9, b});
      }
    }
    const auto group = [](int c) { return c == 3 ? std::string("danger") : std::string("round"); };
    const auto good = evaluate_detections(perfect, gts, 3, group, 0.5);
    CHECK(good.map == doctest::Approx(1.0));
    REQUIRE(good.groups.size() == 2);
    CHECK(good.groups[0].name == "danger");
    CHECK(good.groups[0].ground_truths == 4);
    CHECK(good.groups[1].ground_truths == 8);
    for (const auto& g : good.groups) {
      CHECK(g.recall == doctest::Approx(1.0));
      CHECK(g.precision == doctest::Approx(1.0));
    }
    const auto bad = evaluate_detections(none, gts, 3, group, 0.5);
    CHECK(bad.map == 0.0);
    for (const auto& g : bad.groups) {
      CHECK(g.recall == 0.0);
      CHECK(g.precision == 0.0);
    }
  }

  TEST_CASE("wrong class never matches") {
    std::vector<std::vector<GroundTruthBox>> gts{{{1, {0.5, 0.5, 0.2, 0.2}}}};
    std::vector<std::vector<Detection>> dets{{{2, 0.99, {0.4, 0.4, 0.6, 0.6}}}};
    const auto r = evaluate_detections(dets, gts, 2, [](int) { return std::string("g"); }, 0.5);
    CHECK(r.classes.at(0).recall == 0.0);
    CHECK(r.classes.at(1).detections == 1);
    CHECK(r.classes.at(1).true_positives == 0);
  }

  TEST_CASE("classifier accuracy counts matching predictions") {
    const auto ds = data::generate_classification(10, 5, 4);
    Crn crn({5}, 1);
    std::fill(crn.fc3.params.weight.data().begin(), crn.fc3.params.weight.data().end(), 0.0f);
    std::fill(crn.fc3.params.bias.data().begin(), crn.fc3.params.bias.data().end(), 0.0f);
    crn.fc3.params.bias.data()[0] = 1.0f;
    CHECK(evaluate_classifier(crn, ds) == doctest::Approx(0.2));

    Crn random({5}, 9);
    Index correct = 0;
    {
      NoGradGuard guard;
      for (const auto& s : ds.samples) {
        const data::Image* one[] = {&s.image};
        const auto logits = random.forward(data::stack_images(one), Mode::kEval);
        correct += classify_logits(logits.data()).class_id == s.label;
      }
    }
    CHECK(evaluate_classifier(random, ds, 3) == doctest::Approx(static_cast<double>(correct) / 10));
    CHECK_THROWS_AS(evaluate_classifier(random, data::ClassificationDataset{{}, 5}), DataError);
  }
}

TEST_SUITE("trainer") {
  TEST_CASE("zero learning rate leaves parameters and loss unchanged") {
    const auto ds = data::generate_classification(8, 4, 2);
    Crn crn({4}, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.lr = 0.0;
    cfg.eval_every = 0;
    // Batch-norm running statistics still move in train mode; compare weights only.
    const auto trainable = [&] {
      ParameterSet<float> out;
      for (const auto& p : crn.parameters())
        if (p.trainable) out.push_back(p);
      return snapshot(out);
    };
    const auto before = trainable();
    const auto history = train_classifier(crn, ds, nullptr, cfg);
    CHECK(trainable() == before);
    REQUIRE(history.size() == 2);
    CHECK(history[0].train_loss == doctest::Approx(history[1].train_loss).epsilon(1e-6));
  }

  TEST_CASE("classifier training is reproducible") {
    const auto ds = data::generate_classification(12, 3, 8);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 5;
    cfg.lr = 0.01;
    cfg.seed = 21;
    cfg.augment = true;
    Crn a({3}, 1), b({3}, 1);
    const auto ha = train_classifier(a, ds, &ds, cfg);
    const auto hb = train_classifier(b, ds, &ds, cfg);
    CHECK(format_metrics(ha, false) == format_metrics(hb, false));
    CHECK(snapshot(a.parameters()) == snapshot(b.parameters()));
    CHECK(ha.back().evaluated);
  }

  TEST_CASE("training stops once the accuracy target is reached") {
    const auto ds = data::generate_classification(4, 2, 6);
    Crn crn({2}, 5);
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.batch_size = 4;
    cfg.lr = 0.01;
    cfg.stop_at_accuracy = 0.5;
    const auto history = train_classifier(crn, ds, nullptr, cfg);
    CHECK(history.size() < 50);
    CHECK(history.back().train_accuracy >= 0.5);
  }

  TEST_CASE("non-finite loss raises a numeric error") {
    const auto ds = data::generate_classification(4, 2, 2);
    Crn crn({2}, 5);
    crn.fc3.params.weight.data()[0] = std::numeric_limits<float>::infinity();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train_classifier(crn, ds, nullptr, cfg), NumericError);
  }

  TEST_CASE("configuration is validated") {
    TrainConfig cfg;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.lr = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("detector training is reproducible and reports all columns") {
    const auto ds = small_scenes(4, 2);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.lr = 0.005;
    cfg.seed = 3;
    detection::Mdn a(small_mdn(), 7), b(small_mdn(), 7);
    const auto ha = train_detector(a, ds, nullptr, cfg);
    const auto hb = train_detector(b, ds, nullptr, cfg);
    const auto text = format_metrics(ha, true);
    CHECK(text == format_metrics(hb, true));
    CHECK(snapshot(a.parameters()) == snapshot(b.parameters()));
    CHECK(text.rfind("epoch;train_loss;conf_loss;loc_loss;map;", 0) == 0);
    CHECK(ha[0].train_loss > 0.0);
    CHECK(ha[0].train_loss == doctest::Approx(ha[0].conf_loss + ha[0].loc_loss));
  }

  TEST_CASE("images without objects contribute nothing") {
    auto ds = small_scenes(2, 5);
    for (auto& s : ds.samples) s.boxes.clear();
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 2;
    cfg.lr = 0.1;
    cfg.eval_every = 0;
    detection::Mdn mdn(small_mdn(), 1);
    const auto before = snapshot(mdn.parameters());
    const auto history = train_detector(mdn, ds, nullptr, cfg);
    CHECK(history.at(0).train_loss == 0.0);
    CHECK(snapshot(mdn.parameters()) == before);
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("save, load and save again gives identical bytes") {
    TempDir dir("ckpt");
    for (const auto kind : {ModelKind::kCrn, ModelKind::kMdn}) {
      ModelSpec spec;
      spec.kind = kind;
      spec.num_classes = 3;
      spec.input_size = kind == ModelKind::kCrn ? 32 : 128;
      spec.width = 8;
      spec.seed = 4;
      Model model(spec);
      save_checkpoint(model, dir / "a");
      const Model loaded = load_checkpoint(dir / "a");
      CHECK(loaded.spec() == spec);
      save_checkpoint(loaded, dir / "b");
      CHECK(slurp(dir / "a/manifest.txt") == slurp(dir / "b/manifest.txt"));
      CHECK(slurp(dir / "a/params.bin") == slurp(dir / "b/params.bin"));
      std::filesystem::remove_all(dir / "a");
      std::filesystem::remove_all(dir / "b");
    }
  }

  TEST_CASE("mismatched checkpoints are rejected with the tensor name") {
    TempDir dir("ckptbad");
    ModelSpec spec;
    spec.num_classes = 3;
    save_checkpoint(Model(spec), dir.path());
    spec.num_classes = 4;
    Model other(spec);
    try {
      load_checkpoint_into(other, dir.path());
      FAIL("expected a checkpoint error");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("fc3") != std::string::npos);
    }
    std::ofstream(dir / "params.bin", std::ios::trunc) << "x";
    CHECK_THROWS_AS(load_checkpoint(dir.path()), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), CheckpointError);
  }
}

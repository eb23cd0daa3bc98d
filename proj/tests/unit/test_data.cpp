#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "mdn/data/augment.hpp"
#include "mdn/data/datasets.hpp"
#include "mdn/data/synthetic.hpp"
#include "mdn/error.hpp"

using namespace mdn;
using namespace mdn::data;
using testing_support::TempDir;

namespace {

Image gradient_image(Index h, Index w) {
  Image img(3, h, w);
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) img.at(c, y, x) = static_cast<float>(0.01 * x + 0.02 * y + 0.1 * c);
  return img;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

// A classification tree with `counts[c]` 40 x 30 images in class c.
void write_classification_tree(const std::filesystem::path& root, const std::vector<int>& counts) {
  for (std::size_t c = 0; c < counts.size(); ++c) {
    const auto dir = root / ("0000" + std::to_string(c));
    std::filesystem::create_directories(dir);
    std::string table = "Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId\n";
    for (int i = 0; i < counts[c]; ++i) {
      const std::string name = "img_" + std::to_string(i) + ".ppm";
      Image img(3, 30, 40, static_cast<float>(c) / 4.0f);
      write_ppm(img, dir / name);
      table += name + ";40;30;5;5;35;25;" + std::to_string(c) + "\n";
    }
    write_text(dir / ("GT-0000" + std::to_string(c) + ".csv"), table);
  }
}

ClassificationDataset fixture(const std::vector<int>& counts) {
  ClassificationDataset ds;
  ds.num_classes = static_cast<Index>(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int i = 0; i < counts[c]; ++i) {
      Image img(3, 32, 32, 0.0f);
      img.at(0, i % 32, (i / 32) % 32) = 1.0f;
      img.at(1, 16, 16) = static_cast<float>(c) / 8.0f;
      ds.samples.push_back({img, static_cast<int>(c)});
    }
  return ds;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("ppm round trip quantizes to 8 bits") {
    TempDir dir("ppm");
    Image img = gradient_image(5, 7);
    write_ppm(img, dir / "a.ppm");
    const Image back = read_ppm(dir / "a.ppm");
    REQUIRE(back.width == 7);
    REQUIRE(back.height == 5);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(std::abs(back.pixels[i] - img.pixels[i]) <= 0.5f / 255.0f + 1e-6f);
    }
  }

  TEST_CASE("malformed or missing ppm is a data error") {
    TempDir dir("badppm");
    write_text(dir / "bad.ppm", "P3\n1 1\n255\n0 0 0\n");
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), DataError);
    write_text(dir / "short.ppm", "P6\n4 4\n255\nabc");
    CHECK_THROWS_AS(read_ppm(dir / "short.ppm"), DataError);
    CHECK_THROWS_AS(read_ppm(dir / "none.ppm"), DataError);
  }

  TEST_CASE("crop and resample of a gradient matches the closed form") {
    const Image img = gradient_image(60, 80);
    const double x1 = 10, y1 = 12, x2 = 50, y2 = 44;
    const Image crop = crop_resize(img, x1, y1, x2, y2, 32, 32);
    for (Index c = 0; c < 3; ++c)
      for (Index i = 0; i < 32; ++i)
        for (Index j = 0; j < 32; ++j) {
          const double sx = x1 + (j + 0.5) * (x2 - x1) / 32 - 0.5;
          const double sy = y1 + (i + 0.5) * (y2 - y1) / 32 - 0.5;
          CHECK(std::abs(crop.at(c, i, j) - (0.01 * sx + 0.02 * sy + 0.1 * c)) < 1e-5);
        }
  }

  TEST_CASE("classification tree loads with per-class counts") {
    TempDir dir("cls");
    write_classification_tree(dir.path(), {2, 3, 1});
    const auto ds = load_classification_dataset(dir.path(), 3);
    CHECK(ds.size() == 6);
    const auto counts = ds.class_counts();
    CHECK(counts.at(0) == 2);
    CHECK(counts.at(1) == 3);
    CHECK(counts.at(2) == 1);
    CHECK(ds.samples.front().image.width == 32);
  }

  TEST_CASE("bad annotation rows are rejected with their line") {
    TempDir dir("clsbad");
    write_classification_tree(dir.path(), {2});
    write_text(dir / "00000/GT-00000.csv",
               "Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId\n"
               "img_0.ppm;40;30;5;5;35;25;0\n"
               "img_1.ppm;40;30;20;5;10;25;0\n");
    try {
      load_classification_dataset(dir.path(), 1);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    write_text(dir / "00000/GT-00000.csv",
               "Filename;Width;Height;Roi.X1;Roi.Y1;Roi.X2;Roi.Y2;ClassId\n"
               "missing.ppm;40;30;5;5;35;25;0\n");
    CHECK_THROWS_AS(load_classification_dataset(dir.path(), 1), DataError);
  }

  TEST_CASE("balancing follows the two-tier rule with augmented copies") {
    const auto ds = fixture({3, 7, 15});
    const auto out = balance_classes(ds, 5, 10, 42);
    const auto counts = out.class_counts();
    CHECK(counts.at(0) == 5);
    CHECK(counts.at(1) == 10);
    CHECK(counts.at(2) == 15);
    // Added samples are transformed, not copied.
    for (std::size_t i = ds.size(); i < out.size(); ++i) {
      bool duplicate = false;
      for (const auto& s : ds.samples) duplicate |= s.image.pixels == out.samples[i].image.pixels;
      CHECK_FALSE(duplicate);
    }
    const auto again = balance_classes(ds, 5, 10, 42);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(again.samples[i].image.pixels == out.samples[i].image.pixels);
    }
    CHECK_THROWS_AS(balance_classes(ds, 10, 5, 1), ConfigError);
    auto gap = ds;
    gap.num_classes = 4;
    CHECK_THROWS_AS(balance_classes(gap, 5, 10, 1), DataError);
  }

  TEST_CASE("augmentation identity, determinism and ranges") {
    const Image img = gradient_image(16, 16);
    const Image same = apply_augment(img, AugmentParams{});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(same.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));
    }
    AugmentRanges zero{0, 0, 1, 1, 0, 1, 1};
    const Image z = augment_image(img, 99, zero);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      CHECK(z.pixels[i] == doctest::Approx(img.pixels[i]).epsilon(1e-6));
    }
    CHECK(augment_image(img, 5).pixels == augment_image(img, 5).pixels);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto p = sample_augment_params(seed);
      CHECK(std::abs(p.rotation_deg) <= 10.0);
      CHECK(std::abs(p.translate_x) <= 0.1);
      CHECK(p.scale >= 0.9);
      CHECK(p.scale <= 1.1);
      CHECK(std::abs(p.brightness) <= 0.2);
      CHECK(p.contrast >= 0.8);
      CHECK(p.contrast <= 1.2);
    }
    const Image bright = augment_image(img, 7);
    for (float v : bright.pixels) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }

  TEST_CASE("quarter-turn moves a delta pixel to the rotated position") {
    Image img(1, 9, 9, 0.0f);
    img.at(0, 3, 6) = 1.0f;  // (x, y) = (6, 3)
    AugmentParams p;
    p.rotation_deg = 90;
    const Image out = apply_augment(img, p);
    // Center (4, 4): (x, y) -> (4 - (y - 4), 4 + (x - 4)) = (5, 6).
    for (Index y = 0; y < 9; ++y)
      for (Index x = 0; x < 9; ++x) {
        CHECK(out.at(0, y, x) == doctest::Approx(x == 5 && y == 6 ? 1.0 : 0.0).epsilon(1e-5));
      }
  }

  TEST_CASE("detection dataset normalizes boxes and honors the split") {
    TempDir dir("det");
    std::filesystem::create_directories(dir / "images");
    write_ppm(Image(3, 768, 1024, 0.5f), dir / "images/big.ppm");
    for (int i = 0; i < 10; ++i) write_ppm(Image(3, 40, 50, 0.2f), dir / ("images/s" + std::to_string(i) + ".ppm"));
    write_ppm(Image(3, 40, 50, 0.2f), dir / "images/empty.ppm");
    std::string ann = "Filename;Xmin;Ymin;Xmax;Ymax;ClassId\nbig.ppm;100;100;200;200;2\n";
    std::string split = "Filename;Split\nbig.ppm;test\nempty.ppm;train\n";
    int boxes = 0;
    for (int i = 0; i < 10; ++i) {
      const std::string name = "s" + std::to_string(i) + ".ppm";
      split += name + ";train\n";
      for (int k = 0; k < (i < 4 ? 2 : 1); ++k, ++boxes) {
        ann += name + ";" + std::to_string(5 + 10 * k) + ";5;" + std::to_string(15 + 10 * k) + ";20;1\n";
      }
    }
    write_text(dir / "annotations.txt", ann);
    write_text(dir / "split.txt", split);
    write_text(dir / "classes.txt", "ClassId;Superclass\n1;prohibitory\n2;mandatory\n3;danger\n");

    const auto train = load_detection_dataset(dir.path(), "train", 64);
    CHECK(train.size() == 11);
    CHECK(boxes == 14);
    std::size_t total = 0;
    for (const auto& s : train.samples) {
      CHECK(s.image.width == 64);
      total += s.boxes.size();
      for (const auto& b : s.boxes) {
        const auto c = detection::to_corner(b.box);
        CHECK(c.xmin >= 0.0);
        CHECK(c.ymax <= 1.0);
      }
    }
    CHECK(total == 14);
    CHECK(train.samples.front().boxes.empty());
    CHECK(train.group_of(2) == "mandatory");

    const auto test = load_detection_dataset(dir.path(), "test", 384);
    REQUIRE(test.size() == 1);
    CHECK(test.samples[0].source_width == 1024);
    const auto c = detection::to_corner(test.samples[0].boxes[0].box);
    CHECK(c.xmin == doctest::Approx(100.0 / 1024));
    CHECK(c.ymin == doctest::Approx(100.0 / 768));
    CHECK(c.xmax == doctest::Approx(200.0 / 1024));
    CHECK(c.ymax == doctest::Approx(200.0 / 768));

    write_text(dir / "annotations.txt",
               "Filename;Xmin;Ymin;Xmax;Ymax;ClassId\nbig.ppm;100;100;1100;200;2\n");
    try {
      load_detection_dataset(dir.path(), "test", 64);
      FAIL("expected a data error");
    } catch (const DataError& e) {
      const std::string what = e.what();
      CHECK(what.find("line 2") != std::string::npos);
      CHECK(what.find("big.ppm") != std::string::npos);
    }
  }

  TEST_CASE("rendered signs cover their analytic extent") {
    for (const auto shape : {SignShape::kRing, SignShape::kDisk, SignShape::kTriangle,
                             SignShape::kSquare, SignShape::kDiamond}) {
      Image img(3, 100, 100, 0.0f);
      const double cx = 47.3, cy = 52.8, size = 31.4;
      const auto e = render_sign(img, {shape, {1, 0, 0}, {1, 1, 1}}, cx, cy, size);
      CHECK(std::abs(e.xmin - (cx - size / 2)) <= 1.0);
      CHECK(std::abs(e.xmax + 1 - (cx + size / 2)) <= 1.0);
      CHECK(std::abs(e.ymax + 1 - (cy + size / 2)) <= 1.0);
      if (shape != SignShape::kTriangle) CHECK(std::abs(e.ymin - (cy - size / 2)) <= 1.0);
    }
  }

  TEST_CASE("synthetic scenes are reproducible and annotate full signs") {
    SceneConfig cfg;
    cfg.image_size = 128;
    cfg.min_sign = 16;
    cfg.max_sign = 48;
    const auto a = generate_scenes(6, 3, cfg);
    const auto b = generate_scenes(6, 3, cfg);
    cfg.occlusion_probability = 1.0;
    cfg.fog_probability = 1.0;
    const auto occluded = generate_scenes(6, 3, cfg);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.samples[i].image.pixels == b.samples[i].image.pixels);
      CHECK(a.samples[i].image.pixels != occluded.samples[i].image.pixels);
      REQUIRE(a.samples[i].boxes.size() == occluded.samples[i].boxes.size());
      CHECK(a.samples[i].boxes.size() >= 1);
      for (std::size_t k = 0; k < a.samples[i].boxes.size(); ++k) {
        const auto& x = a.samples[i].boxes[k];
        const auto& y = occluded.samples[i].boxes[k];
        CHECK(x.class_id == y.class_id);
        CHECK(x.box.cx == y.box.cx);
        CHECK(x.box.w == y.box.w);
        CHECK(x.box.w * 128 >= 16 - 1e-9);
      }
    }
  }

  TEST_CASE("written scenes load back with identical boxes") {
    TempDir dir("synth");
    SceneConfig cfg;
    cfg.image_size = 96;
    cfg.min_sign = 12;
    cfg.max_sign = 40;
    const auto ds = generate_scenes(5, 11, cfg);
    write_detection_dataset(ds, dir.path(), 3);
    const auto train = load_detection_dataset(dir.path(), "train", 96);
    const auto test = load_detection_dataset(dir.path(), "test", 96);
    REQUIRE(train.size() == 3);
    REQUIRE(test.size() == 2);
    for (std::size_t i = 0; i < 3; ++i) {
      REQUIRE(train.samples[i].boxes.size() == ds.samples[i].boxes.size());
      for (std::size_t k = 0; k < ds.samples[i].boxes.size(); ++k) {
        CHECK(train.samples[i].boxes[k].box.cx == doctest::Approx(ds.samples[i].boxes[k].box.cx));
      }
    }
    CHECK(train.group_of(3) == "danger");
  }

  TEST_CASE("scene augmentation keeps boxes on their signs") {
    SceneConfig cfg;
    cfg.image_size = 128;
    cfg.min_sign = 20;
    cfg.max_sign = 40;
    const auto ds = generate_scenes(6, 4, cfg);
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      const auto& s = ds.samples[seed % ds.size()];
      const auto out = augment_scene(s, seed);
      REQUIRE(out.boxes.size() == s.boxes.size());
      CHECK(augment_scene(s, seed).image.pixels == out.image.pixels);
      for (std::size_t k = 0; k < out.boxes.size(); ++k) {
        const auto c = detection::to_corner(out.boxes[k].box);
        CHECK(c.xmin >= 0.0);
        CHECK(c.ymax <= 1.0);
        CHECK(out.boxes[k].class_id == s.boxes[k].class_id);
        // The sign's center pixel keeps its color up to the photometric change.
        const auto src = s.boxes[k].box;
        const auto dst = out.boxes[k].box;
        const Index sx = static_cast<Index>(src.cx * 128), sy = static_cast<Index>(src.cy * 128);
        const Index dx = static_cast<Index>(dst.cx * 128), dy = static_cast<Index>(dst.cy * 128);
        const double src_sum = s.image.at(0, sy, sx) + s.image.at(1, sy, sx) + s.image.at(2, sy, sx);
        const double dst_sum = out.image.at(0, dy, dx) + out.image.at(1, dy, dx) + out.image.at(2, dy, dx);
        CHECK(std::abs(src_sum - dst_sum) < 1.2);
      }
    }
    SceneAugmentRanges identity{0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0};
    const auto same = augment_scene(ds.samples[0], 3, identity);
    CHECK(same.boxes[0].box.cx == doctest::Approx(ds.samples[0].boxes[0].box.cx));
    for (std::size_t i = 0; i < same.image.pixels.size(); ++i) {
      CHECK(same.image.pixels[i] == doctest::Approx(ds.samples[0].image.pixels[i]).epsilon(1e-5));
    }
    SceneAugmentRanges mirror = identity;
    mirror.flip_probability = 1.0;
    const auto flipped = augment_scene(ds.samples[0], 3, mirror);
    CHECK(flipped.boxes[0].box.cx == doctest::Approx(1.0 - ds.samples[0].boxes[0].box.cx));
  }

  TEST_CASE("synthetic classification crops") {
    const auto ds = generate_classification(20, 5, 1);
    CHECK(ds.size() == 20);
    for (const auto& [label, count] : ds.class_counts()) CHECK(count == 4);
    for (const auto& s : ds.samples) {
      CHECK(s.image.width == 32);
      for (float v : s.image.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
    CHECK_THROWS_AS(generate_classification(5, 0, 1), ConfigError);
  }
}

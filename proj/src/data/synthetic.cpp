#include "mdn/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mdn/error.hpp"

namespace mdn::data {

namespace {

constexpr Color kRed{0.80f, 0.08f, 0.10f};
constexpr Color kBlue{0.10f, 0.25f, 0.75f};
constexpr Color kYellow{0.95f, 0.80f, 0.10f};
constexpr Color kWhite{0.95f, 0.95f, 0.95f};
constexpr Color kDark{0.08f, 0.08f, 0.08f};

constexpr std::array<Color, 9> kPalette{{
    kRed, kBlue, kYellow, {0.10f, 0.60f, 0.20f}, kWhite, {0.95f, 0.50f, 0.05f},
    {0.55f, 0.15f, 0.65f}, kDark, {0.10f, 0.70f, 0.75f},
}};

constexpr std::array<SignShape, 5> kShapes{SignShape::kRing, SignShape::kDisk,
                                           SignShape::kTriangle, SignShape::kSquare,
                                           SignShape::kDiamond};

double cross(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

bool in_triangle(double px, double py, double cx, double cy, double size) {
  const double h = size / 2.0;
  const double ax = cx, ay = cy - h;
  const double bx = cx + h, by = cy + h;
  const double qx = cx - h, qy = cy + h;
  const double d1 = cross(ax, ay, bx, by, px, py);
  const double d2 = cross(bx, by, qx, qy, px, py);
  const double d3 = cross(qx, qy, ax, ay, px, py);
  return d1 >= 0 && d2 >= 0 && d3 >= 0;
}

// Whether (px, py) is inside `shape` scaled by `f` about its own center.
bool inside(SignShape shape, double px, double py, double cx, double cy, double size, double f) {
  const double h = size / 2.0 * f;
  switch (shape) {
    case SignShape::kRing:
    case SignShape::kDisk:
      return (px - cx) * (px - cx) + (py - cy) * (py - cy) <= h * h;
    case SignShape::kSquare:
      return std::abs(px - cx) <= h && std::abs(py - cy) <= h;
    case SignShape::kDiamond:
      return std::abs(px - cx) + std::abs(py - cy) <= h;
    case SignShape::kTriangle: {
      // Scale about the centroid, which sits size/6 below the box center.
      const double gy = cy + size / 6.0;
      return in_triangle(cx + (px - cx) / f, gy + (py - gy) / f, cx, cy, size);
    }
  }
  return false;
}

void paint(Image& image, Index x, Index y, const Color& color) {
  for (Index c = 0; c < 3; ++c) image.at(c, y, x) = color[c];
}

Color jitter(const Color& c, double amount, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-amount, amount);
  Color out;
  for (std::size_t i = 0; i < 3; ++i) {
    out[i] = static_cast<float>(std::clamp(c[i] + d(rng), 0.0, 1.0));
  }
  return out;
}

void fill_background(Image& image, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> tone(0.2, 0.7);
  std::uniform_real_distribution<double> noise(-0.08, 0.08);
  Color top, bottom;
  for (std::size_t c = 0; c < 3; ++c) {
    top[c] = static_cast<float>(tone(rng));
    bottom[c] = static_cast<float>(tone(rng));
  }
  const double denom = std::max<Index>(1, image.height - 1);
  for (Index y = 0; y < image.height; ++y) {
    const double t = static_cast<double>(y) / denom;
    for (Index x = 0; x < image.width; ++x) {
      for (Index c = 0; c < 3; ++c) {
        const double v = (1 - t) * top[c] + t * bottom[c] + noise(rng);
        image.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

}  // namespace

PaintedExtent render_sign(Image& image, const SignStyle& style, double cx, double cy,
                          double size) {
  PaintedExtent extent{image.width, image.height, -1, -1};
  const double h = size / 2.0;
  const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - h)));
  const Index x1 = std::min<Index>(image.width - 1, static_cast<Index>(std::ceil(cx + h)));
  const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - h)));
  const Index y1 = std::min<Index>(image.height - 1, static_cast<Index>(std::ceil(cy + h)));
  const double inner_scale = style.shape == SignShape::kRing       ? 0.7
                             : style.shape == SignShape::kTriangle ? 0.6
                             : style.shape == SignShape::kDisk     ? 0.35
                                                                   : 0.5;
  for (Index y = y0; y <= y1; ++y) {
    const double py = static_cast<double>(y) + 0.5;
    for (Index x = x0; x <= x1; ++x) {
      const double px = static_cast<double>(x) + 0.5;
      if (!inside(style.shape, px, py, cx, cy, size, 1.0)) continue;
      paint(image, x, y,
            inside(style.shape, px, py, cx, cy, size, inner_scale) ? style.inner : style.outer);
      extent.xmin = std::min(extent.xmin, x);
      extent.ymin = std::min(extent.ymin, y);
      extent.xmax = std::max(extent.xmax, x);
      extent.ymax = std::max(extent.ymax, y);
    }
  }
  return extent;
}

SignStyle scene_style(int class_id) {
  switch (class_id) {
    case 1:
      return {SignShape::kRing, kRed, kWhite};
    case 2:
      return {SignShape::kDisk, kBlue, kWhite};
    case 3:
      return {SignShape::kTriangle, kDark, kYellow};
    default:
      throw ContractError("scene classes are 1..3, got " + std::to_string(class_id));
  }
}

void SceneConfig::validate() const {
  if (image_size < 16) throw ConfigError("synthetic image size must be at least 16");
  if (min_sign < 4 || max_sign < min_sign || max_sign > image_size) {
    throw ConfigError("synthetic sign sizes must satisfy 4 <= min <= max <= image size");
  }
  if (min_signs < 0 || max_signs < min_signs) {
    throw ConfigError("synthetic sign counts must satisfy 0 <= min <= max");
  }
  if (fog_probability < 0 || fog_probability > 1 || occlusion_probability < 0 ||
      occlusion_probability > 1) {
    throw ConfigError("synthetic probabilities must lie in [0, 1]");
  }
}

DetectionDataset generate_scenes(Index count, std::uint64_t seed, const SceneConfig& config,
                                 Index first_index) {
  config.validate();
  DetectionDataset ds;
  ds.num_classes = 3;
  ds.superclass = {{1, "prohibitory"}, {2, "mandatory"}, {3, "danger"}};
  const Index s = config.image_size;
  const double sd = static_cast<double>(s);
  for (Index i = 0; i < count; ++i) {
    const Index index = first_index + i;
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(index)));
    DetectionSample sample;
    char id[32];
    std::snprintf(id, sizeof(id), "scene_%05td", index);
    sample.image_id = id;
    sample.image = Image(3, s, s);
    sample.source_width = s;
    sample.source_height = s;
    fill_background(sample.image, rng);

    const int wanted =
        std::uniform_int_distribution<int>(config.min_signs, config.max_signs)(rng);
    std::vector<detection::CornerBox> placed;
    for (int k = 0; k < wanted; ++k) {
      for (int attempt = 0; attempt < 100; ++attempt) {
        const Index size =
            std::uniform_int_distribution<Index>(config.min_sign, config.max_sign)(rng);
        const Index x = std::uniform_int_distribution<Index>(0, s - size)(rng);
        const Index y = std::uniform_int_distribution<Index>(0, s - size)(rng);
        const detection::CornerBox px{static_cast<double>(x), static_cast<double>(y),
                                      static_cast<double>(x + size), static_cast<double>(y + size)};
        const bool clash = std::any_of(placed.begin(), placed.end(), [&](const auto& o) {
          return px.xmin < o.xmax + 2 && o.xmin < px.xmax + 2 && px.ymin < o.ymax + 2 &&
                 o.ymin < px.ymax + 2;
        });
        if (clash) continue;
        placed.push_back(px);
        const int cls = std::uniform_int_distribution<int>(1, 3)(rng);
        SignStyle style = scene_style(cls);
        style.outer = jitter(style.outer, 0.05, rng);
        style.inner = jitter(style.inner, 0.05, rng);
        const double half = static_cast<double>(size) / 2.0;
        render_sign(sample.image, style, px.xmin + half, px.ymin + half,
                    static_cast<double>(size));
        sample.boxes.push_back(
            {cls, detection::to_center({px.xmin / sd, px.ymin / sd, px.xmax / sd, px.ymax / sd})});
        break;
      }
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (const auto& b : placed) {
      if (unit(rng) >= config.occlusion_probability) continue;
      // Cover one corner of the sign with a dark-green patch.
      const double w = b.xmax - b.xmin;
      const double fw = 0.3 + 0.2 * unit(rng);
      const double fh = 0.3 + 0.2 * unit(rng);
      const bool right = unit(rng) < 0.5;
      const bool low = unit(rng) < 0.5;
      const Index ox0 = static_cast<Index>(right ? b.xmax - fw * w : b.xmin);
      const Index oy0 = static_cast<Index>(low ? b.ymax - fh * w : b.ymin);
      const Index ox1 = static_cast<Index>(ox0 + fw * w);
      const Index oy1 = static_cast<Index>(oy0 + fh * w);
      const Color leaf{0.15f, 0.35f, 0.12f};
      for (Index y = std::max<Index>(0, oy0); y < std::min(s, oy1); ++y) {
        for (Index x = std::max<Index>(0, ox0); x < std::min(s, ox1); ++x) paint(sample.image, x, y, leaf);
      }
    }
    if (unit(rng) < config.fog_probability) {
      const float alpha = static_cast<float>(0.25 + 0.25 * unit(rng));
      for (float& v : sample.image.pixels) v = (1.0f - alpha) * v + alpha * 0.85f;
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

SignStyle classifier_style(int label) {
  if (label < 0) throw ContractError("classifier labels are non-negative");
  const auto l = static_cast<std::size_t>(label);
  const Color outer = kPalette[l % kPalette.size()];
  const Color inner = kPalette[(l / kPalette.size() + l + 4) % kPalette.size()];
  return {kShapes[l % kShapes.size()], outer, inner == outer ? kWhite : inner};
}

ClassificationDataset generate_classification(Index count, Index num_classes,
                                              std::uint64_t seed) {
  if (num_classes < 1 || num_classes > 45) {
    throw ConfigError("synthetic classification supports 1..45 classes");
  }
  ClassificationDataset ds;
  ds.num_classes = num_classes;
  for (Index i = 0; i < count; ++i) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const int label = static_cast<int>(i % num_classes);
    Image img(3, kClassifierInput, kClassifierInput);
    fill_background(img, rng);
    SignStyle style = classifier_style(label);
    style.outer = jitter(style.outer, 0.05, rng);
    style.inner = jitter(style.inner, 0.05, rng);
    const double size = std::uniform_real_distribution<double>(18.0, 28.0)(rng);
    std::uniform_real_distribution<double> offset(-2.5, 2.5);
    render_sign(img, style, 16.0 + offset(rng), 16.0 + offset(rng), size);
    const float gain = static_cast<float>(std::uniform_real_distribution<double>(0.8, 1.1)(rng));
    for (float& v : img.pixels) v = std::clamp(v * gain, 0.0f, 1.0f);
    ds.samples.push_back({std::move(img), label});
  }
  return ds;
}

}  // namespace mdn::data

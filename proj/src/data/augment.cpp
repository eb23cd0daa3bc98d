#include "mdn/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mdn::data {

AugmentParams sample_augment_params(std::uint64_t seed, const AugmentRanges& ranges) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, std::nextafter(hi, hi + 1.0))(rng);
  };
  AugmentParams p;
  p.rotation_deg = uniform(-ranges.max_rotation_deg, ranges.max_rotation_deg);
  p.translate_x = uniform(-ranges.max_translate, ranges.max_translate);
  p.translate_y = uniform(-ranges.max_translate, ranges.max_translate);
  p.scale = uniform(ranges.min_scale, ranges.max_scale);
  p.brightness = uniform(-ranges.max_brightness, ranges.max_brightness);
  p.contrast = uniform(ranges.min_contrast, ranges.max_contrast);
  return p;
}

Image apply_augment(const Image& image, const AugmentParams& params) {
  Image out(image.channels, image.height, image.width);
  const double theta = params.rotation_deg * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cx = 0.5 * static_cast<double>(image.width - 1);
  const double cy = 0.5 * static_cast<double>(image.height - 1);
  const double tx = params.translate_x * static_cast<double>(image.width);
  const double ty = params.translate_y * static_cast<double>(image.height);
  const double inv_scale = 1.0 / params.scale;
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < image.width; ++x) {
      const double dx = (static_cast<double>(x) - cx - tx) * inv_scale;
      const double dy = (static_cast<double>(y) - cy - ty) * inv_scale;
      // R(-theta) applied to (dx, dy).
      const double sx = cx + cos_t * dx + sin_t * dy;
      const double sy = cy - sin_t * dx + cos_t * dy;
      for (Index c = 0; c < image.channels; ++c) {
        const double v = sample_bilinear(image, c, sx, sy);
        const double adjusted = (v - 0.5) * params.contrast + 0.5 + params.brightness;
        out.at(c, y, x) = static_cast<float>(std::clamp(adjusted, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace mdn::data

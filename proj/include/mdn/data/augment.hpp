#pragma once

#include <cstdint>

#include "mdn/data/image.hpp"

namespace mdn::data {

// One concrete augmentation. Geometry maps an input point p (pixel centers,
// image center c) to c + scale * R(rotation) (p - c) + t, where t is the
// translation as a fraction of the image size and R(a) = [[cos a, -sin a],
// [sin a, cos a]] acts on (x, y) with y pointing down.
struct AugmentParams {
  double rotation_deg = 0.0;
  double translate_x = 0.0;
  double translate_y = 0.0;
  double scale = 1.0;
  double brightness = 0.0;
  double contrast = 1.0;
};

struct AugmentRanges {
  double max_rotation_deg = 10.0;
  double max_translate = 0.1;
  double min_scale = 0.9;
  double max_scale = 1.1;
  double max_brightness = 0.2;
  double min_contrast = 0.8;
  double max_contrast = 1.2;
};

// Derives an independent stream seed (splitmix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

AugmentParams sample_augment_params(std::uint64_t seed, const AugmentRanges& ranges = {});

// Inverse-warps with bilinear sampling (border clamp), then applies
// v' = (v - 0.5) * contrast + 0.5 + brightness and clips to [0, 1].
Image apply_augment(const Image& image, const AugmentParams& params);

inline Image augment_image(const Image& image, std::uint64_t seed,
                           const AugmentRanges& ranges = {}) {
  return apply_augment(image, sample_augment_params(seed, ranges));
}

}  // namespace mdn::data

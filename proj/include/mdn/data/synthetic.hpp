#pragma once

#include <array>
#include <cstdint>

#include "mdn/data/datasets.hpp"

namespace mdn::data {

enum class SignShape { kRing, kDisk, kTriangle, kSquare, kDiamond };

using Color = std::array<float, 3>;

struct SignStyle {
  SignShape shape = SignShape::kRing;
  Color outer{};
  Color inner{};
};

// Inclusive pixel bounds of what a render call painted.
struct PaintedExtent {
  Index xmin = 0, ymin = 0, xmax = -1, ymax = -1;
  bool empty() const { return xmax < xmin; }
};

// Paints a sign occupying the square [cx - size/2, cx + size/2] x
// [cy - size/2, cy + size/2] (pixel-edge coordinates). A pixel is painted
// when its center lies inside the shape.
PaintedExtent render_sign(Image& image, const SignStyle& style, double cx, double cy,
                          double size);

// Styles of the three scene superclasses, indexed by class id 1..3:
// 1 prohibitory (red ring), 2 mandatory (blue disk), 3 danger (yellow
// triangle with dark border).
SignStyle scene_style(int class_id);

struct SceneConfig {
  Index image_size = 384;
  Index min_sign = 20;
  Index max_sign = 120;
  int min_signs = 1;
  int max_signs = 3;
  double fog_probability = 0.0;
  double occlusion_probability = 0.0;

  void validate() const;
};

// Scene i is a pure function of (seed, i). Signs never overlap and stay
// inside the frame; boxes are the exact painted squares.
DetectionDataset generate_scenes(Index count, std::uint64_t seed, const SceneConfig& config,
                                 Index first_index = 0);

// Distinct (shape, color) style for a 0-based classifier label.
SignStyle classifier_style(int label);

// 32 x 32 sign crops with random size, offset, background and lighting.
ClassificationDataset generate_classification(Index count, Index num_classes,
                                              std::uint64_t seed);

}  // namespace mdn::data

#pragma once

#include <random>
#include <vector>

#include "mdn/detection/anchors.hpp"
#include "mdn/detection/match.hpp"

namespace testing_support {

inline mdn::detection::Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(0.1, 0.9), s(0.05, 0.5);
  return {c(rng), c(rng), s(rng), s(rng)};
}

// Random default boxes and ground truths for matching and loss checks.
struct Instance {
  mdn::detection::AnchorSet anchors;
  std::vector<mdn::detection::Box> anchor_boxes;
  std::vector<mdn::detection::GroundTruthBox> gts;
};

inline Instance random_instance(std::mt19937_64& rng, int max_anchors = 30, int max_gts = 5) {
  Instance inst;
  const int na = std::uniform_int_distribution<int>(1, max_anchors)(rng);
  const int ng = std::uniform_int_distribution<int>(0, max_gts)(rng);
  for (int a = 0; a < na; ++a) {
    mdn::detection::DefaultBox d;
    d.box = random_box(rng);
    inst.anchors.push_back(d);
    inst.anchor_boxes.push_back(d.box);
  }
  for (int g = 0; g < ng; ++g) {
    inst.gts.push_back({std::uniform_int_distribution<int>(1, 3)(rng), random_box(rng)});
  }
  return inst;
}

// Convolution geometry: batch, channels, height, width, out channels, kernel, stride, padding.
struct Geometry {
  mdn::Index n, c, h, w, o, k, s, p;
};

inline Geometry random_geometry(std::mt19937_64& rng) {
  auto pick = [&](mdn::Index lo, mdn::Index hi) {
    return std::uniform_int_distribution<mdn::Index>(lo, hi)(rng);
  };
  Geometry g{pick(1, 2), pick(1, 3), pick(3, 7), pick(3, 7), pick(1, 3), pick(1, 3), pick(1, 2), 0};
  g.p = pick(0, g.k - 1);
  return g;
}

}  // namespace testing_support

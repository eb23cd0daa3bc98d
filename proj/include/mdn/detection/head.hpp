#pragma once

#include <vector>

#include "mdn/detection/anchors.hpp"
#include "mdn/layers.hpp"
#include "mdn/mfpn.hpp"

namespace mdn::detection {

// Five-scale prediction head. Level l runs a 3x3 stride-2 conv (conv5_2 ..
// conv9_2) on pyramid level l, then two 3x3 predictors emitting
// K * (num_classes + 1) class logits and K * 4 box offsets per cell.
struct HeadSpec {
  Index num_classes = 3;  // excluding background
  Index in_channels = 256;
  std::vector<Index> level_channels{256, 256, 512, 512, 512};

  static HeadSpec standard(Index num_classes, Index width = 256);
};

template <typename T>
struct BasicHeadOutput {
  std::vector<BasicTensor<T>> class_maps;  // N x K*(C+1) x H x W per level
  std::vector<BasicTensor<T>> box_maps;    // N x K*4 x H x W per level, offsets (cx, cy, w, h)
};

template <typename T>
class BasicHead {
 public:
  BasicHead(const HeadSpec& spec, Initializer& init);

  const HeadSpec& spec() const { return spec_; }

  BasicHeadOutput<T> forward(const BasicFeaturePyramid<T>& pyramid, Mode mode,
                             ShapeTrace* trace = nullptr) const;

  void collect(const std::string& prefix, ParameterSet<T>& out) const;

  // Output grid size of each level for the given pyramid level sizes.
  static std::vector<Index> output_sizes(const std::vector<Index>& pyramid_sizes);

  std::vector<ConvBn<T>> scale_convs;
  std::vector<Conv2d<T>> class_predictors;
  std::vector<Conv2d<T>> box_predictors;

 private:
  HeadSpec spec_;
};

}  // namespace mdn::detection

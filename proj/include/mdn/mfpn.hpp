#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdn/crn.hpp"
#include "mdn/layers.hpp"

namespace mdn {

struct ConvRow {
  Index in_channels = 0;
  Index out_channels = 0;
  Index kernel = 3;
  Index stride = 2;
};

// Modified feature pyramid trunk.
//
// A stride-8 stem brings the image to the Conv4 input resolution. Five 3x3
// stride-2 convolutions (conv4..conv8) descend; five 3x3 stride-2 transposed
// convolutions (dconv9, dconv8..dconv5) climb back, each added to a 1x1
// projection of the same-resolution map on the way down. The five sums are the
// pyramid levels, all `pyramid_channels` wide.
//
// With input 512 the chain is 64 -> 32 -> 16 -> 8 -> 4 -> 2 down and
// 2 -> 4 -> 8 -> 16 -> 32 -> 64 up; with input 384 it is 48 -> 24 -> 12 -> 6 -> 3 -> 2
// and the deconvolutions pick output padding to land on 3, 6, 12, 24, 48.
struct MfpnSpec {
  Index input_size = 384;
  std::vector<ConvRow> stem;
  std::vector<ConvRow> down;  // conv4 .. conv8
  Index pyramid_channels = 256;

  // Table geometry with every channel count scaled by width / 256.
  static MfpnSpec standard(Index input_size, Index width = 256);

  Index stem_stride() const;
  // Throws ConfigError when rows do not chain or input_size is not divisible.
  void validate() const;
};

inline constexpr int kPyramidLevels = 5;

// Multi-resolution maps handed to the detection head, finest first.
template <typename T>
struct BasicFeaturePyramid {
  std::vector<std::string> names;
  std::vector<BasicTensor<T>> levels;
};

using FeaturePyramid = BasicFeaturePyramid<float>;

template <typename T>
class BasicMfpn {
 public:
  BasicMfpn(const MfpnSpec& spec, std::uint64_t seed);

  const MfpnSpec& spec() const { return spec_; }

  BasicFeaturePyramid<T> forward(const BasicTensor<T>& image, Mode mode,
                                 ShapeTrace* trace = nullptr) const;

  ParameterSet<T> parameters() const;

  // Spatial size of each pyramid level, finest first, for the configured input.
  std::vector<Index> level_sizes() const;

  std::vector<ConvBn<T>> stem;
  std::vector<ConvBn<T>> down;         // conv4 .. conv8
  std::vector<Deconv2d<T>> up;         // dconv9, dconv8, dconv7, dconv6, dconv5
  std::vector<BatchNorm2d<T>> up_bn;
  std::vector<Conv2d<T>> lateral;      // conv7, conv6, conv5, conv4, stem projections

 private:
  MfpnSpec spec_;
};

using Mfpn = BasicMfpn<float>;

}  // namespace mdn

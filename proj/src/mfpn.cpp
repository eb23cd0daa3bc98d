#include "mdn/mfpn.hpp"

#include <algorithm>

#include "mdn/error.hpp"

namespace mdn {

namespace {

Index scaled(Index channels, Index width) { return std::max<Index>(1, channels * width / 256); }

const char* const kDownNames[] = {"conv4", "conv5", "conv6", "conv7", "conv8"};
const char* const kUpNames[] = {"dconv9", "dconv8", "dconv7", "dconv6", "dconv5"};
const char* const kLateralNames[] = {"lateral_conv7", "lateral_conv6", "lateral_conv5",
                                     "lateral_conv4", "lateral_stem"};

}  // namespace

MfpnSpec MfpnSpec::standard(Index input_size, Index width) {
  if (width < 1) throw ConfigError("mfpn: width must be positive");
  MfpnSpec s;
  s.input_size = input_size;
  s.stem = {{3, scaled(64, width), 3, 2},
            {scaled(64, width), scaled(128, width), 3, 2},
            {scaled(128, width), scaled(256, width), 3, 2}};
  // Conv6's 512-channel input row follows Conv5's 256-channel output.
  s.down = {{scaled(256, width), scaled(256, width), 3, 2},
            {scaled(256, width), scaled(256, width), 3, 2},
            {scaled(256, width), scaled(512, width), 3, 2},
            {scaled(512, width), scaled(1024, width), 3, 2},
            {scaled(1024, width), scaled(1024, width), 3, 2}};
  s.pyramid_channels = scaled(256, width);
  return s;
}

Index MfpnSpec::stem_stride() const {
  Index stride = 1;
  for (const auto& r : stem) stride *= r.stride;
  return stride;
}

void MfpnSpec::validate() const {
  if (stem.empty()) throw ConfigError("mfpn: stem needs at least one row");
  if (down.size() != static_cast<std::size_t>(kPyramidLevels)) {
    throw ConfigError("mfpn: down path needs exactly 5 rows (conv4..conv8)");
  }
  if (pyramid_channels < 1) throw ConfigError("mfpn: pyramid_channels must be positive");
  if (input_size < 1 || input_size % stem_stride() != 0) {
    throw ConfigError("mfpn: input_size " + std::to_string(input_size) +
                      " is not divisible by the stem stride " + std::to_string(stem_stride()));
  }
  if (stem.front().in_channels != 3) throw ConfigError("mfpn: stem must start from 3 channels");
  Index channels = 3;
  for (const auto& rows : {stem, down}) {
    for (const auto& r : rows) {
      if (r.in_channels != channels) {
        throw ConfigError("mfpn: row expects " + std::to_string(r.in_channels) +
                          " input channels but receives " + std::to_string(channels));
      }
      if (r.kernel < 1 || r.stride < 1 || r.out_channels < 1) {
        throw ConfigError("mfpn: kernel, stride and channels must be positive");
      }
      channels = r.out_channels;
    }
  }
  for (const auto& r : down) {
    if (r.stride != 2) throw ConfigError("mfpn: down-path rows must have stride 2");
  }
  Index size = input_size / stem_stride();
  for (const auto& r : down) {
    size = conv_output_size(size, r.kernel, r.stride, r.kernel / 2);
    if (size < 1) {
      throw ConfigError("mfpn: input_size " + std::to_string(input_size) +
                        " is too small for the down path");
    }
  }
}

template <typename T>
BasicMfpn<T>::BasicMfpn(const MfpnSpec& spec, std::uint64_t seed) : spec_(spec) {
  spec_.validate();
  Initializer init(seed);
  for (const auto& r : spec_.stem) {
    stem.emplace_back(r.in_channels, r.out_channels, r.kernel, r.stride, r.kernel / 2, init);
  }
  for (const auto& r : spec_.down) {
    down.emplace_back(r.in_channels, r.out_channels, r.kernel, r.stride, r.kernel / 2, init);
  }
  const Index u = spec_.pyramid_channels;
  // dconv9 climbs straight from conv8; the rest climb from the previous fused level.
  up.emplace_back(spec_.down.back().out_channels, u, 3, 2, 1, false, init);
  up_bn.emplace_back(u);
  for (int i = 1; i < kPyramidLevels; ++i) {
    up.emplace_back(u, u, 3, 2, 1, false, init);
    up_bn.emplace_back(u);
  }
  // Lateral sources, coarse to fine: conv7, conv6, conv5, conv4, stem.
  for (int i = 0; i < kPyramidLevels; ++i) {
    const int src = 3 - i;  // index into down; -1 means the stem output
    const Index in = src >= 0 ? spec_.down[src].out_channels : spec_.stem.back().out_channels;
    lateral.emplace_back(in, u, 1, 1, 0, true, init);
  }
}

template <typename T>
std::vector<Index> BasicMfpn<T>::level_sizes() const {
  std::vector<Index> sizes;
  Index size = spec_.input_size / spec_.stem_stride();
  sizes.push_back(size);
  for (int i = 0; i < kPyramidLevels - 1; ++i) {
    const auto& r = spec_.down[i];
    size = conv_output_size(size, r.kernel, r.stride, r.kernel / 2);
    sizes.push_back(size);
  }
  return sizes;
}

template <typename T>
BasicFeaturePyramid<T> BasicMfpn<T>::forward(const BasicTensor<T>& image, Mode mode,
                                             ShapeTrace* trace) const {
  const Shape& s = image.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != spec_.input_size || s[3] != spec_.input_size) {
    throw DimensionError("mfpn: expected N x 3 x " + std::to_string(spec_.input_size) + " x " +
                         std::to_string(spec_.input_size) + " input, got " + shape_to_string(s));
  }
  auto x = image;
  for (std::size_t i = 0; i < stem.size(); ++i) {
    auto y = stem[i].forward(x, mode);
    if (trace) trace->push_back({"stem" + std::to_string(i + 1), x.shape(), y.shape()});
    x = y;
  }
  std::vector<BasicTensor<T>> downs{x};  // stem output, conv4 .. conv8 outputs
  for (std::size_t i = 0; i < down.size(); ++i) {
    auto y = down[i].forward(downs.back(), mode);
    if (trace) trace->push_back({kDownNames[i], downs.back().shape(), y.shape()});
    downs.push_back(y);
  }

  std::vector<BasicTensor<T>> fused;  // coarse to fine
  auto current = downs.back();
  for (int i = 0; i < kPyramidLevels; ++i) {
    const auto& target = downs[static_cast<std::size_t>(4 - i)];
    const Index want = target.dim(2);
    const Index base = transposed_output_size(current.dim(2), 3, up[i].stride, up[i].padding, 0);
    const Index output_padding = want - base;
    if (output_padding < 0 || output_padding >= up[i].stride) {
      throw DimensionError("mfpn: cannot upsample " + std::to_string(current.dim(2)) + " to " +
                           std::to_string(want));
    }
    auto upsampled = up_bn[i](up[i](current, output_padding), mode);
    auto projected = lateral[i](target);
    if (upsampled.shape() != projected.shape()) {
      throw DimensionError("mfpn: fusion shapes differ, " + shape_to_string(upsampled.shape()) +
                           " vs " + shape_to_string(projected.shape()));
    }
    auto level = relu(add(upsampled, projected));
    if (trace) trace->push_back({kUpNames[i], current.shape(), upsampled.shape()});
    fused.push_back(level);
    current = level;
  }

  BasicFeaturePyramid<T> pyramid;
  for (int i = kPyramidLevels - 1; i >= 0; --i) {
    pyramid.levels.push_back(fused[static_cast<std::size_t>(i)]);
    pyramid.names.push_back("p" + std::to_string(fused[static_cast<std::size_t>(i)].dim(2)));
  }
  return pyramid;
}

template <typename T>
ParameterSet<T> BasicMfpn<T>::parameters() const {
  ParameterSet<T> out;
  for (std::size_t i = 0; i < stem.size(); ++i) stem[i].collect("stem" + std::to_string(i + 1), out);
  for (std::size_t i = 0; i < down.size(); ++i) down[i].collect(kDownNames[i], out);
  for (std::size_t i = 0; i < up.size(); ++i) {
    up[i].collect(kUpNames[i], out);
    up_bn[i].collect(std::string(kUpNames[i]) + ".bn", out);
    lateral[i].collect(kLateralNames[i], out);
  }
  return out;
}

template class BasicMfpn<float>;
template class BasicMfpn<double>;

}  // namespace mdn

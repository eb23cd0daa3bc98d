#include "mdn/detection/head.hpp"

#include <algorithm>

#include "mdn/error.hpp"

namespace mdn::detection {

namespace {
const char* const kScaleNames[] = {"conv5_2", "conv6_2", "conv7_2", "conv8_2", "conv9_2"};
}

HeadSpec HeadSpec::standard(Index num_classes, Index width) {
  HeadSpec s;
  s.num_classes = num_classes;
  auto scaled = [width](Index c) { return std::max<Index>(1, c * width / 256); };
  s.in_channels = scaled(256);
  s.level_channels = {scaled(256), scaled(256), scaled(512), scaled(512), scaled(512)};
  return s;
}

template <typename T>
BasicHead<T>::BasicHead(const HeadSpec& spec, Initializer& init) : spec_(spec) {
  if (spec.num_classes < 1) throw ConfigError("head: num_classes must be positive");
  if (spec.level_channels.size() != static_cast<std::size_t>(kPyramidLevels)) {
    throw ConfigError("head: expected 5 level channel counts");
  }
  for (int l = 0; l < kPyramidLevels; ++l) {
    const Index c = spec.level_channels[static_cast<std::size_t>(l)];
    scale_convs.emplace_back(spec.in_channels, c, 3, 2, 1, init);
    class_predictors.emplace_back(c, kBoxesPerCell * (spec.num_classes + 1), 3, 1, 1, true, init);
    box_predictors.emplace_back(c, kBoxesPerCell * 4, 3, 1, 1, true, init);
  }
}

template <typename T>
std::vector<Index> BasicHead<T>::output_sizes(const std::vector<Index>& pyramid_sizes) {
  std::vector<Index> out;
  for (Index s : pyramid_sizes) out.push_back(conv_output_size(s, 3, 2, 1));
  return out;
}

template <typename T>
BasicHeadOutput<T> BasicHead<T>::forward(const BasicFeaturePyramid<T>& pyramid, Mode mode,
                                         ShapeTrace* trace) const {
  if (pyramid.levels.size() != static_cast<std::size_t>(kPyramidLevels)) {
    throw DimensionError("head: expected 5 pyramid levels, got " +
                         std::to_string(pyramid.levels.size()));
  }
  BasicHeadOutput<T> out;
  for (int l = 0; l < kPyramidLevels; ++l) {
    const auto& level = pyramid.levels[static_cast<std::size_t>(l)];
    auto features = scale_convs[l].forward(level, mode);
    if (trace) trace->push_back({kScaleNames[l], level.shape(), features.shape()});
    out.class_maps.push_back(class_predictors[l](features));
    out.box_maps.push_back(box_predictors[l](features));
  }
  return out;
}

template <typename T>
void BasicHead<T>::collect(const std::string& prefix, ParameterSet<T>& out) const {
  for (int l = 0; l < kPyramidLevels; ++l) {
    const std::string name = prefix + kScaleNames[l];
    scale_convs[l].collect(name, out);
    class_predictors[l].collect(name + ".class", out);
    box_predictors[l].collect(name + ".box", out);
  }
}

template class BasicHead<float>;
template class BasicHead<double>;

}  // namespace mdn::detection

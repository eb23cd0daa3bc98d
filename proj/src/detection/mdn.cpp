#include "mdn/detection/mdn.hpp"

#include <algorithm>
#include <cmath>

#include "mdn/error.hpp"

namespace mdn::detection {

template <typename T>
BasicMdn<T>::BasicMdn(const MdnSpec& spec, std::uint64_t seed)
    : trunk(MfpnSpec::standard(spec.input_size, spec.width), seed),
      head([&] {
        Initializer init(seed ^ 0x9e3779b97f4a7c15ULL);
        return BasicHead<T>(HeadSpec::standard(spec.num_classes, spec.width), init);
      }()),
      spec_(spec) {
  std::vector<std::pair<Index, Index>> grid;
  for (Index s : BasicHead<T>::output_sizes(trunk.level_sizes())) grid.emplace_back(s, s);
  anchors_ = generate_default_boxes(grid);
}

template <typename T>
BasicHeadOutput<T> BasicMdn<T>::forward_maps(const BasicTensor<T>& images, Mode mode,
                                             ShapeTrace* trace) const {
  return head.forward(trunk.forward(images, mode, trace), mode, trace);
}

template <typename T>
typename BasicMdn<T>::Output BasicMdn<T>::forward(const BasicTensor<T>& images, Mode mode,
                                                  ShapeTrace* trace) const {
  auto maps = forward_maps(images, mode, trace);
  Output out{gather_anchor_rows(maps.class_maps, spec_.num_classes + 1),
             gather_anchor_rows(maps.box_maps, Index{4})};
  if (out.class_logits.dim(1) != static_cast<Index>(anchors_.size())) {
    throw DimensionError("mdn: head produced " + std::to_string(out.class_logits.dim(1)) +
                         " rows for " + std::to_string(anchors_.size()) + " default boxes");
  }
  return out;
}

template <typename T>
ParameterSet<T> BasicMdn<T>::parameters() const {
  ParameterSet<T> out;
  for (auto& p : trunk.parameters()) {
    p.name = "mfpn." + p.name;
    out.push_back(std::move(p));
  }
  head.collect("head.", out);
  return out;
}

std::vector<Detection> decode_detections(std::span<const float> class_logits,
                                         std::span<const float> box_offsets,
                                         const AnchorSet& anchors, Index num_classes,
                                         const DetectOptions& options) {
  const std::size_t width = static_cast<std::size_t>(num_classes + 1);
  if (class_logits.size() != anchors.size() * width || box_offsets.size() != anchors.size() * 4) {
    throw DimensionError("decode_detections: prediction sizes do not match the default boxes");
  }
  std::vector<Detection> candidates;
  std::vector<double> p(width);
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const float* row = class_logits.data() + a * width;
    const double mx = *std::max_element(row, row + width);
    double total = 0.0;
    for (std::size_t k = 0; k < width; ++k) {
      p[k] = std::exp(static_cast<double>(row[k]) - mx);
      total += p[k];
    }
    for (std::size_t k = 1; k < width; ++k) {
      const double score = p[k] / total;
      if (score < options.threshold) continue;
      const float* o = box_offsets.data() + a * 4;
      const Box b = decode({o[0], o[1], o[2], o[3]}, anchors[a].box);
      candidates.push_back({static_cast<int>(k), score, to_corner(b)});
    }
  }
  std::vector<Detection> out;
  for (Detection d : nms(candidates, options.nms_iou)) {
    d.box.xmin = std::clamp(d.box.xmin, 0.0, 1.0);
    d.box.ymin = std::clamp(d.box.ymin, 0.0, 1.0);
    d.box.xmax = std::clamp(d.box.xmax, 0.0, 1.0);
    d.box.ymax = std::clamp(d.box.ymax, 0.0, 1.0);
    if (d.box.xmin < d.box.xmax && d.box.ymin < d.box.ymax) out.push_back(d);
  }
  return out;
}

std::vector<std::vector<Detection>> detect_batch(const Mdn& model, const Tensor& images,
                                                 const DetectOptions& options) {
  NoGradGuard no_grad;
  auto out = model.forward(images, Mode::kEval);
  const std::size_t n = static_cast<std::size_t>(images.dim(0));
  const std::size_t a = model.anchors().size();
  const std::size_t width = static_cast<std::size_t>(model.spec().num_classes + 1);
  std::vector<std::vector<Detection>> results;
  for (std::size_t b = 0; b < n; ++b) {
    results.push_back(decode_detections(out.class_logits.data().subspan(b * a * width, a * width),
                                        out.box_offsets.data().subspan(b * a * 4, a * 4),
                                        model.anchors(), model.spec().num_classes, options));
  }
  return results;
}

std::vector<Detection> detect(const Mdn& model, const Tensor& image,
                              const DetectOptions& options) {
  const Shape& s = image.shape();
  if (s.size() == 3) {
    Tensor batch(Shape{1, s[0], s[1], s[2]},
                 std::vector<float>(image.data().begin(), image.data().end()));
    return detect_batch(model, batch, options).front();
  }
  return detect_batch(model, image, options).front();
}

template class BasicMdn<float>;
template class BasicMdn<double>;

}  // namespace mdn::detection

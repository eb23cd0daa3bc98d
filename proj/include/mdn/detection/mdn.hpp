#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdn/detection/head.hpp"
#include "mdn/detection/nms.hpp"
#include "mdn/mfpn.hpp"

namespace mdn::detection {

struct MdnSpec {
  Index input_size = 384;
  Index num_classes = 3;  // excluding background
  Index width = 256;      // channel scale; 256 reproduces the table widths
};

// Trunk + five-scale head + the default boxes for the configured input size.
template <typename T>
class BasicMdn {
 public:
  BasicMdn(const MdnSpec& spec, std::uint64_t seed);

  struct Output {
    BasicTensor<T> class_logits;  // N x A x (num_classes + 1)
    BasicTensor<T> box_offsets;   // N x A x 4
  };

  const MdnSpec& spec() const { return spec_; }
  const AnchorSet& anchors() const { return anchors_; }

  Output forward(const BasicTensor<T>& images, Mode mode, ShapeTrace* trace = nullptr) const;
  BasicHeadOutput<T> forward_maps(const BasicTensor<T>& images, Mode mode,
                                  ShapeTrace* trace = nullptr) const;

  ParameterSet<T> parameters() const;

  BasicMfpn<T> trunk;
  BasicHead<T> head;

 private:
  MdnSpec spec_;
  AnchorSet anchors_;
};

using Mdn = BasicMdn<float>;

struct DetectOptions {
  double threshold = 0.5;
  double nms_iou = 0.45;
};

// Post-processing for one image: softmax per anchor, decode offsets, keep
// (anchor, class >= 1) pairs scoring >= threshold, per-class NMS, clip to the
// unit square (boxes that collapse under clipping are dropped).
std::vector<Detection> decode_detections(std::span<const float> class_logits,
                                         std::span<const float> box_offsets,
                                         const AnchorSet& anchors, Index num_classes,
                                         const DetectOptions& options);

// Eval-mode detection on a 3 x S x S image.
std::vector<Detection> detect(const Mdn& model, const Tensor& image,
                              const DetectOptions& options = {});

// Same for every image of an N x 3 x S x S batch.
std::vector<std::vector<Detection>> detect_batch(const Mdn& model, const Tensor& images,
                                                 const DetectOptions& options = {});

}  // namespace mdn::detection

#include "mdn/crn.hpp"

#include <cmath>

#include "mdn/error.hpp"

namespace mdn {

namespace {

template <typename T>
void record(ShapeTrace* trace, const char* layer, const BasicTensor<T>& in,
            const BasicTensor<T>& out) {
  if (trace) trace->push_back({layer, in.shape(), out.shape()});
}

}  // namespace

template <typename T>
BasicCrn<T>::BasicCrn(const CrnSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.num_classes < 1) throw ContractError("crn: num_classes must be positive");
  Initializer init(seed);
  constexpr Index c1 = CrnSpec::kConv1Channels;
  constexpr Index c2 = CrnSpec::kConv2Channels;
  constexpr Index c3 = CrnSpec::kConv3Channels;
  constexpr Index fc = CrnSpec::kFcWidth;
  conv1 = ConvBn<T>(CrnSpec::kInputChannels, c1, 3, 1, 1, init);
  conv2_1 = ConvBn<T>(c1, c2, 3, 1, 1, init);
  conv2_2 = ConvBn<T>(c2, c2, 3, 1, 1, init);
  conv3_1 = ConvBn<T>(c2, c3, 3, 1, 1, init);
  conv3_2 = ConvBn<T>(c3, c3, 3, 1, 1, init);
  conv3_3 = ConvBn<T>(c3, c3, 3, 1, 1, init);
  skip1 = Conv2d<T>(c1, c2, 1, 1, 0, true, init);
  skip2 = Conv2d<T>(c2, c3, 1, 1, 0, true, init);
  constexpr Index flat = c3 * (CrnSpec::kInputSize / 4) * (CrnSpec::kInputSize / 4);
  fc1 = Linear<T>(flat, fc, init);
  fc2 = Linear<T>(fc, fc, init);
  fc3 = Linear<T>(fc, spec.num_classes, init);
}

template <typename T>
BasicTensor<T> BasicCrn<T>::forward(const BasicTensor<T>& batch, Mode mode,
                                    ShapeTrace* trace) const {
  const Shape& s = batch.shape();
  if (s.size() != 4 || s[1] != CrnSpec::kInputChannels || s[2] != CrnSpec::kInputSize ||
      s[3] != CrnSpec::kInputSize) {
    throw DimensionError("crn: expected N x 3 x 32 x 32 input, got " + shape_to_string(s));
  }
  auto x1 = conv1.forward(batch, mode);
  record(trace, "conv1", batch, x1);
  auto p1 = maxpool2d(x1);
  record(trace, "maxpool1", x1, p1);

  auto x21 = conv2_1.forward(p1, mode);
  record(trace, "conv2_1", p1, x21);
  auto x22 = conv2_2.forward(x21, mode, false);
  if (skips_enabled_) x22 = add(x22, skip1(p1));
  x22 = relu(x22);
  record(trace, "conv2_2", x21, x22);
  auto p2 = maxpool2d(x22);
  record(trace, "maxpool2", x22, p2);

  auto x31 = conv3_1.forward(p2, mode);
  record(trace, "conv3_1", p2, x31);
  auto x32 = conv3_2.forward(x31, mode);
  record(trace, "conv3_2", x31, x32);
  auto x33 = conv3_3.forward(x32, mode, false);
  if (skips_enabled_) x33 = add(x33, skip2(p2));
  x33 = relu(x33);
  record(trace, "conv3_3", x32, x33);

  auto f1 = relu(fc1(x33));
  record(trace, "fc1", x33, f1);
  auto f2 = relu(fc2(f1));
  record(trace, "fc2", f1, f2);
  auto logits = fc3(f2);
  record(trace, "fc3", f2, logits);
  return logits;
}

template <typename T>
ParameterSet<T> BasicCrn<T>::parameters() const {
  ParameterSet<T> out;
  conv1.collect("conv1", out);
  conv2_1.collect("conv2_1", out);
  conv2_2.collect("conv2_2", out);
  skip1.collect("skip1", out);
  conv3_1.collect("conv3_1", out);
  conv3_2.collect("conv3_2", out);
  conv3_3.collect("conv3_3", out);
  skip2.collect("skip2", out);
  fc1.collect("fc1", out);
  fc2.collect("fc2", out);
  fc3.collect("fc3", out);
  return out;
}

Classification classify_logits(std::span<const float> logits) {
  if (logits.empty()) throw ContractError("classify: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  double total = 0.0;
  for (float v : logits) total += std::exp(static_cast<double>(v) - logits[best]);
  return {static_cast<int>(best), static_cast<float>(1.0 / total)};
}

Classification classify(const Crn& model, const Tensor& image) {
  const Shape& s = image.shape();
  Tensor batch;
  if (s.size() == 3) {
    batch = Tensor(Shape{1, s[0], s[1], s[2]},
                   std::vector<float>(image.data().begin(), image.data().end()));
  } else {
    batch = image;
  }
  NoGradGuard no_grad;
  auto logits = model.forward(batch, Mode::kEval);
  return classify_logits(logits.data().subspan(0, static_cast<std::size_t>(logits.dim(1))));
}

template class BasicCrn<float>;
template class BasicCrn<double>;

}  // namespace mdn

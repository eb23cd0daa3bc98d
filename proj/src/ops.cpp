#include "mdn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "mdn/error.hpp"

namespace mdn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct Geometry {
  Index channels, height, width;
  Index kh, kw, stride, padding;
  Index out_h, out_w;
};

// Unfolds one C x H x W image into (C*kh*kw) x (out_h*out_w) patch columns.
template <typename T>
void im2col(const T* image, const Geometry& g, T* col) {
  const Index cols = g.out_h * g.out_w;
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ky = 0; ky < g.kh; ++ky) {
      for (Index kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          T* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= g.height) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src = image + (c * g.height + iy) * g.width;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < g.width) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates patch columns back into the image.
template <typename T>
void col2im(const T* col, const Geometry& g, T* image) {
  const Index cols = g.out_h * g.out_w;
  for (Index c = 0; c < g.channels; ++c) {
    for (Index ky = 0; ky < g.kh; ++ky) {
      for (Index kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((c * g.kh + ky) * g.kw + kx) * cols;
        for (Index oy = 0; oy < g.out_h; ++oy) {
          const Index iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= g.height) continue;
          T* dst = image + (c * g.height + iy) * g.width;
          const T* src = row + oy * g.out_w;
          for (Index ox = 0; ox < g.out_w; ++ox) {
            const Index ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < g.width) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw DimensionError(std::string(op) + ": " + what + " must have rank " +
                         std::to_string(rank) + ", got " + shape_to_string(s));
  }
}

template <typename T>
void add_channel_bias(T* out, const T* bias, Index n, Index channels, Index plane) {
  for (Index b = 0; b < n; ++b) {
    for (Index c = 0; c < channels; ++c) {
      T* p = out + (b * channels + c) * plane;
      const T v = bias[c];
      for (Index i = 0; i < plane; ++i) p[i] += v;
    }
  }
}

template <typename T>
void accumulate_channel_bias_grad(const T* grad, T* dbias, Index n, Index channels, Index plane) {
  for (Index b = 0; b < n; ++b) {
    for (Index c = 0; c < channels; ++c) {
      const T* p = grad + (b * channels + c) * plane;
      T acc = T(0);
      for (Index i = 0; i < plane; ++i) acc += p[i];
      dbias[c] += acc;
    }
  }
}

template <typename T>
void check_bias(const LayerParams<T>& params, Index expected, const char* op) {
  if (params.bias.defined() && params.bias.numel() != expected) {
    throw DimensionError(std::string(op) + ": bias length " + std::to_string(params.bias.numel()) +
                         " != output channels " + std::to_string(expected));
  }
}

}  // namespace

Index conv_output_size(Index in, Index kernel, Index stride, Index padding) {
  if (stride <= 0 || padding < 0 || kernel <= 0) return 0;
  const Index span = in + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

Index transposed_output_size(Index in, Index kernel, Index stride, Index padding,
                             Index output_padding) {
  return (in - 1) * stride - 2 * padding + kernel + output_padding;
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const LayerParams<T>& params, Index stride,
                      Index padding) {
  const Shape& xs = input.shape();
  const Shape& ws = params.weight.shape();
  require_rank(xs, 4, "conv2d", "input");
  require_rank(ws, 4, "conv2d", "weight");
  if (xs[1] != ws[1]) {
    throw DimensionError("conv2d: input channels (input axis 1 = " + std::to_string(xs[1]) +
                         ") != weight InC (weight axis 1 = " + std::to_string(ws[1]) + ")");
  }
  if (stride <= 0 || padding < 0) throw DimensionError("conv2d: stride must be > 0, padding >= 0");
  const Index n = xs[0];
  const Index out_c = ws[0];
  Geometry g{xs[1], xs[2], xs[3], ws[2], ws[3], stride, padding, 0, 0};
  g.out_h = conv_output_size(g.height, g.kh, stride, padding);
  g.out_w = conv_output_size(g.width, g.kw, stride, padding);
  if (g.out_h < 1 || g.out_w < 1) {
    throw DimensionError("conv2d: non-positive output size for input H x W (axes 2,3) " +
                         shape_to_string(xs) + " with kernel " + shape_to_string(ws));
  }
  check_bias(params, out_c, "conv2d");

  const Index patch = g.channels * g.kh * g.kw;
  const Index plane = g.out_h * g.out_w;
  std::vector<T> out(static_cast<std::size_t>(n * out_c * plane));
  std::vector<T> col(static_cast<std::size_t>(patch * plane));
  ConstMatMap<T> w(params.weight.data().data(), out_c, patch);
  ConstMatMap<T> colm(col.data(), patch, plane);
  const T* x = input.data().data();
  for (Index b = 0; b < n; ++b) {
    im2col(x + b * g.channels * g.height * g.width, g, col.data());
    MatMap<T> y(out.data() + b * out_c * plane, out_c, plane);
    y.noalias() = w * colm;
  }
  if (params.bias.defined()) add_channel_bias(out.data(), params.bias.data().data(), n, out_c, plane);

  return make_op_result<T>(
      Shape{n, out_c, g.out_h, g.out_w}, std::move(out), "conv2d",
      {&input, &params.weight, params.bias.defined() ? &params.bias : nullptr},
      [g, n, out_c, patch, plane](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const T* gy = self.grad.data();
        const Index in_size = g.channels * g.height * g.width;
        std::vector<T> col(static_cast<std::size_t>(patch * plane));
        ConstMatMap<T> colm(col.data(), patch, plane);
        ConstMatMap<T> w(wn.data.data(), out_c, patch);
        for (Index b = 0; b < n; ++b) {
          ConstMatMap<T> gb(gy + b * out_c * plane, out_c, plane);
          if (wn.requires_grad) {
            im2col(xn.data.data() + b * in_size, g, col.data());
            MatMap<T> dw(wn.grad.data(), out_c, patch);
            dw.noalias() += gb * colm.transpose();
          }
          if (xn.requires_grad) {
            MatMap<T> dcol(col.data(), patch, plane);
            dcol.noalias() = w.transpose() * gb;
            col2im(col.data(), g, xn.grad.data() + b * in_size);
          }
        }
        if (self.inputs[2] && self.inputs[2]->requires_grad) {
          accumulate_channel_bias_grad(gy, self.inputs[2]->grad.data(), n, out_c, plane);
        }
      });
}

template <typename T>
BasicTensor<T> transposed_conv2d(const BasicTensor<T>& input, const LayerParams<T>& params,
                                 Index stride, Index padding, Index output_padding) {
  const Shape& xs = input.shape();
  const Shape& ws = params.weight.shape();
  require_rank(xs, 4, "transposed_conv2d", "input");
  require_rank(ws, 4, "transposed_conv2d", "weight");
  if (xs[1] != ws[0]) {
    throw DimensionError("transposed_conv2d: input channels (input axis 1 = " +
                         std::to_string(xs[1]) + ") != weight InC (weight axis 0 = " +
                         std::to_string(ws[0]) + ")");
  }
  if (stride <= 0 || padding < 0 || output_padding < 0) {
    throw DimensionError("transposed_conv2d: stride must be > 0, padding and output_padding >= 0");
  }
  const Index n = xs[0];
  const Index in_c = xs[1];
  const Index in_h = xs[2];
  const Index in_w = xs[3];
  const Index out_c = ws[1];
  // Geometry of the forward conv this op is the adjoint of: out -> in.
  Geometry g{out_c, 0, 0, ws[2], ws[3], stride, padding, in_h, in_w};
  g.height = transposed_output_size(in_h, g.kh, stride, padding, output_padding);
  g.width = transposed_output_size(in_w, g.kw, stride, padding, output_padding);
  if (g.height < 1 || g.width < 1) {
    throw DimensionError("transposed_conv2d: geometry yields non-positive output for input " +
                         shape_to_string(xs));
  }
  if (conv_output_size(g.height, g.kh, stride, padding) != in_h ||
      conv_output_size(g.width, g.kw, stride, padding) != in_w) {
    throw DimensionError("transposed_conv2d: output_padding " + std::to_string(output_padding) +
                         " is not reachable for stride " + std::to_string(stride));
  }
  check_bias(params, out_c, "transposed_conv2d");

  const Index patch = out_c * g.kh * g.kw;
  const Index in_plane = in_h * in_w;
  const Index out_size = out_c * g.height * g.width;
  std::vector<T> out(static_cast<std::size_t>(n * out_size), T(0));
  std::vector<T> col(static_cast<std::size_t>(patch * in_plane));
  ConstMatMap<T> w(params.weight.data().data(), in_c, patch);
  const T* x = input.data().data();
  for (Index b = 0; b < n; ++b) {
    ConstMatMap<T> xb(x + b * in_c * in_plane, in_c, in_plane);
    MatMap<T> colm(col.data(), patch, in_plane);
    colm.noalias() = w.transpose() * xb;
    col2im(col.data(), g, out.data() + b * out_size);
  }
  if (params.bias.defined()) {
    add_channel_bias(out.data(), params.bias.data().data(), n, out_c, g.height * g.width);
  }

  return make_op_result<T>(
      Shape{n, out_c, g.height, g.width}, std::move(out), "transposed_conv2d",
      {&input, &params.weight, params.bias.defined() ? &params.bias : nullptr},
      [g, n, in_c, patch, in_plane, out_size](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        const T* gy = self.grad.data();
        std::vector<T> col(static_cast<std::size_t>(patch * in_plane));
        ConstMatMap<T> colm(col.data(), patch, in_plane);
        ConstMatMap<T> w(wn.data.data(), in_c, patch);
        for (Index b = 0; b < n; ++b) {
          im2col(gy + b * out_size, g, col.data());
          if (xn.requires_grad) {
            MatMap<T> dx(xn.grad.data() + b * in_c * in_plane, in_c, in_plane);
            dx.noalias() += w * colm;
          }
          if (wn.requires_grad) {
            ConstMatMap<T> xb(xn.data.data() + b * in_c * in_plane, in_c, in_plane);
            MatMap<T> dw(wn.grad.data(), in_c, patch);
            dw.noalias() += xb * colm.transpose();
          }
        }
        if (self.inputs[2] && self.inputs[2]->requires_grad) {
          accumulate_channel_bias_grad(gy, self.inputs[2]->grad.data(), n, g.channels,
                                       g.height * g.width);
        }
      });
}

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, Index kernel, Index stride) {
  const Shape& xs = input.shape();
  require_rank(xs, 4, "maxpool2d", "input");
  if (kernel <= 0 || stride <= 0) throw DimensionError("maxpool2d: kernel and stride must be > 0");
  const Index h = xs[2];
  const Index w = xs[3];
  if (h < kernel || w < kernel || (h - kernel) % stride != 0 || (w - kernel) % stride != 0 ||
      (kernel == stride && (h % stride != 0 || w % stride != 0))) {
    throw DimensionError("maxpool2d: spatial dims (axes 2,3) " + shape_to_string(xs) +
                         " do not tile with kernel " + std::to_string(kernel) + ", stride " +
                         std::to_string(stride));
  }
  const Index oh = (h - kernel) / stride + 1;
  const Index ow = (w - kernel) / stride + 1;
  const Index planes = xs[0] * xs[1];
  std::vector<T> out(static_cast<std::size_t>(planes * oh * ow));
  auto argmax = std::make_shared<std::vector<Index>>(out.size());
  const T* x = input.data().data();
  for (Index p = 0; p < planes; ++p) {
    const T* src = x + p * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox) {
        Index best = (oy * stride) * w + ox * stride;
        for (Index ky = 0; ky < kernel; ++ky) {
          for (Index kx = 0; kx < kernel; ++kx) {
            const Index idx = (oy * stride + ky) * w + ox * stride + kx;
            if (src[idx] > src[best]) best = idx;
          }
        }
        const Index o = (p * oh + oy) * ow + ox;
        out[o] = src[best];
        (*argmax)[o] = p * h * w + best;
      }
    }
  }
  return make_op_result<T>(Shape{xs[0], xs[1], oh, ow}, std::move(out), "maxpool2d", {&input},
                           [argmax](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             for (std::size_t i = 0; i < argmax->size(); ++i) {
                               dx[(*argmax)[i]] += self.grad[i];
                             }
                           });
}

template <typename T>
BasicTensor<T> batchnorm(const BasicTensor<T>& input, BatchNormParams<T>& params, Mode mode,
                         T momentum) {
  const Shape& xs = input.shape();
  if (xs.size() != 4 && xs.size() != 2) {
    throw DimensionError("batchnorm: input must be N x C or N x C x H x W, got " +
                         shape_to_string(xs));
  }
  const Index n = xs[0];
  const Index c = xs[1];
  const Index plane = xs.size() == 4 ? xs[2] * xs[3] : 1;
  for (const auto* t : {&params.gamma, &params.beta, &params.running_mean, &params.running_var}) {
    if (t->numel() != c) {
      throw DimensionError("batchnorm: per-channel parameter length " + std::to_string(t->numel()) +
                           " != input channels (axis 1) " + std::to_string(c));
    }
  }
  const Index count = n * plane;
  const T* x = input.data().data();
  const T* gamma = params.gamma.data().data();
  const T* beta = params.beta.data().data();
  auto xhat = std::make_shared<std::vector<T>>(input.data().size());
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<std::size_t>(c));
  std::vector<T> out(input.data().size());

  for (Index ch = 0; ch < c; ++ch) {
    T mu;
    T var;
    if (mode == Mode::kTrain) {
      double acc = 0.0;
      for (Index b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * plane;
        for (Index i = 0; i < plane; ++i) acc += p[i];
      }
      mu = static_cast<T>(acc / static_cast<double>(count));
      double sq = 0.0;
      for (Index b = 0; b < n; ++b) {
        const T* p = x + (b * c + ch) * plane;
        for (Index i = 0; i < plane; ++i) {
          const double d = static_cast<double>(p[i]) - static_cast<double>(mu);
          sq += d * d;
        }
      }
      var = static_cast<T>(sq / static_cast<double>(count));
      const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
      T& rm = params.running_mean.data()[ch];
      T& rv = params.running_var.data()[ch];
      rm = (T(1) - momentum) * rm + momentum * mu;
      rv = (T(1) - momentum) * rv + momentum * unbiased;
    } else {
      mu = params.running_mean.data()[ch];
      var = params.running_var.data()[ch];
    }
    const T is = T(1) / std::sqrt(var + params.epsilon);
    (*inv_std)[ch] = is;
    for (Index b = 0; b < n; ++b) {
      const Index base = (b * c + ch) * plane;
      for (Index i = 0; i < plane; ++i) {
        const T h = (x[base + i] - mu) * is;
        (*xhat)[base + i] = h;
        out[base + i] = gamma[ch] * h + beta[ch];
      }
    }
  }

  const bool train = mode == Mode::kTrain;
  return make_op_result<T>(
      xs, std::move(out), "batchnorm", {&input, &params.gamma, &params.beta},
      [xhat, inv_std, n, c, plane, count, train](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& gn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const T* gy = self.grad.data();
        for (Index ch = 0; ch < c; ++ch) {
          T sum_dy = T(0);
          T sum_dy_xhat = T(0);
          for (Index b = 0; b < n; ++b) {
            const Index base = (b * c + ch) * plane;
            for (Index i = 0; i < plane; ++i) {
              sum_dy += gy[base + i];
              sum_dy_xhat += gy[base + i] * (*xhat)[base + i];
            }
          }
          if (gn.requires_grad) gn.grad[ch] += sum_dy_xhat;
          if (bn.requires_grad) bn.grad[ch] += sum_dy;
          if (!xn.requires_grad) continue;
          const T g = gn.data[ch] * (*inv_std)[ch];
          const T m = static_cast<T>(count);
          for (Index b = 0; b < n; ++b) {
            const Index base = (b * c + ch) * plane;
            for (Index i = 0; i < plane; ++i) {
              if (train) {
                xn.grad[base + i] +=
                    g * (gy[base + i] - sum_dy / m - (*xhat)[base + i] * sum_dy_xhat / m);
              } else {
                xn.grad[base + i] += g * gy[base + i];
              }
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  return make_op_result<T>(input.shape(), std::move(out), "relu", {&input},
                           [](detail::Node<T>& self) {
                             auto& in = *self.inputs[0];
                             for (std::size_t i = 0; i < in.data.size(); ++i) {
                               if (in.data[i] > T(0)) in.grad[i] += self.grad[i];
                             }
                           });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shapes differ, " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
  }
  auto x = a.data();
  auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return make_op_result<T>(a.shape(), std::move(out), "add", {&a, &b},
                           [](detail::Node<T>& self) {
                             for (auto& in : self.inputs) {
                               if (!in->requires_grad) continue;
                               for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                 in->grad[i] += self.grad[i];
                               }
                             }
                           });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& input, T factor) {
  auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return make_op_result<T>(input.shape(), std::move(out), "scale", {&input},
                           [factor](detail::Node<T>& self) {
                             auto& in = *self.inputs[0];
                             for (std::size_t i = 0; i < self.grad.size(); ++i) {
                               in.grad[i] += factor * self.grad[i];
                             }
                           });
}

template <typename T>
BasicTensor<T> fully_connected(const BasicTensor<T>& input, const LayerParams<T>& params) {
  const Shape& ws = params.weight.shape();
  require_rank(ws, 2, "fully_connected", "weight");
  if (input.ndim() < 1) throw DimensionError("fully_connected: undefined input");
  const Index n = input.dim(0);
  const Index in_dim = input.numel() / n;
  if (in_dim != ws[1]) {
    throw DimensionError("fully_connected: flattened input width " + std::to_string(in_dim) +
                         " (input axes 1..) != weight InDim (weight axis 1 = " +
                         std::to_string(ws[1]) + ")");
  }
  const Index out_dim = ws[0];
  check_bias(params, out_dim, "fully_connected");
  std::vector<T> out(static_cast<std::size_t>(n * out_dim));
  ConstMatMap<T> x(input.data().data(), n, in_dim);
  ConstMatMap<T> w(params.weight.data().data(), out_dim, in_dim);
  MatMap<T> y(out.data(), n, out_dim);
  y.noalias() = x * w.transpose();
  if (params.bias.defined()) {
    const T* bias = params.bias.data().data();
    for (Index b = 0; b < n; ++b) {
      for (Index o = 0; o < out_dim; ++o) out[b * out_dim + o] += bias[o];
    }
  }
  return make_op_result<T>(
      Shape{n, out_dim}, std::move(out), "fully_connected",
      {&input, &params.weight, params.bias.defined() ? &params.bias : nullptr},
      [n, in_dim, out_dim](detail::Node<T>& self) {
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        ConstMatMap<T> gy(self.grad.data(), n, out_dim);
        if (xn.requires_grad) {
          ConstMatMap<T> w(wn.data.data(), out_dim, in_dim);
          MatMap<T> dx(xn.grad.data(), n, in_dim);
          dx.noalias() += gy * w;
        }
        if (wn.requires_grad) {
          ConstMatMap<T> x(xn.data.data(), n, in_dim);
          MatMap<T> dw(wn.grad.data(), out_dim, in_dim);
          dw.noalias() += gy.transpose() * x;
        }
        if (self.inputs[2] && self.inputs[2]->requires_grad) {
          auto& db = self.inputs[2]->grad;
          for (Index b = 0; b < n; ++b) {
            for (Index o = 0; o < out_dim; ++o) db[o] += self.grad[b * out_dim + o];
          }
        }
      });
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& input, std::size_t axis) {
  const Shape& s = input.shape();
  if (axis >= s.size()) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_to_string(s));
  }
  Index outer = 1;
  Index inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const Index len = s[axis];
  auto x = input.data();
  auto out = std::make_shared<std::vector<T>>(x.size());
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * len * inner + in;
      T mx = x[base];
      for (Index k = 1; k < len; ++k) mx = std::max(mx, x[base + k * inner]);
      T total = T(0);
      for (Index k = 0; k < len; ++k) {
        const T e = std::exp(x[base + k * inner] - mx);
        (*out)[base + k * inner] = e;
        total += e;
      }
      for (Index k = 0; k < len; ++k) (*out)[base + k * inner] /= total;
    }
  }
  std::vector<T> values = *out;
  return make_op_result<T>(s, std::move(values), "softmax", {&input},
                           [out, outer, inner, len](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             const auto& y = *out;
                             for (Index o = 0; o < outer; ++o) {
                               for (Index in = 0; in < inner; ++in) {
                                 const Index base = o * len * inner + in;
                                 T dot = T(0);
                                 for (Index k = 0; k < len; ++k) {
                                   dot += self.grad[base + k * inner] * y[base + k * inner];
                                 }
                                 for (Index k = 0; k < len; ++k) {
                                   const Index i = base + k * inner;
                                   dx[i] += y[i] * (self.grad[i] - dot);
                                 }
                               }
                             }
                           });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw DimensionError("reshape: " + shape_to_string(input.shape()) + " cannot become " +
                         shape_to_string(shape));
  }
  std::vector<T> values(input.data().begin(), input.data().end());
  return make_op_result<T>(std::move(shape), std::move(values), "reshape", {&input},
                           [](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += self.grad[i];
                           });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input) {
  T total = T(0);
  for (T v : input.data()) total += v;
  return make_op_result<T>(Shape{1}, std::vector<T>{total}, "sum", {&input},
                           [](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             for (auto& d : dx) d += self.grad[0];
                           });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& input) {
  return scale(sum(input), T(1) / static_cast<T>(input.numel()));
}

template <typename T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  require_rank(s, 2, "cross_entropy", "logits");
  const Index n = s[0];
  const Index classes = s[1];
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) +
                         " labels for batch of " + std::to_string(n));
  }
  auto x = logits.data();
  auto probs = std::make_shared<std::vector<T>>(x.size());
  auto label_copy = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
  T loss = T(0);
  for (Index b = 0; b < n; ++b) {
    const int label = labels[b];
    if (label < 0 || label >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    const T* row = x.data() + b * classes;
    const T mx = *std::max_element(row, row + classes);
    T total = T(0);
    for (Index k = 0; k < classes; ++k) total += std::exp(row[k] - mx);
    const T log_z = mx + std::log(total);
    for (Index k = 0; k < classes; ++k) (*probs)[b * classes + k] = std::exp(row[k] - log_z);
    loss += log_z - row[label];
  }
  loss /= static_cast<T>(n);
  return make_op_result<T>(Shape{1}, std::vector<T>{loss}, "cross_entropy", {&logits},
                           [probs, label_copy, n, classes](detail::Node<T>& self) {
                             auto& dx = self.inputs[0]->grad;
                             const T g = self.grad[0] / static_cast<T>(n);
                             for (Index b = 0; b < n; ++b) {
                               for (Index k = 0; k < classes; ++k) {
                                 T p = (*probs)[b * classes + k];
                                 if (k == (*label_copy)[b]) p -= T(1);
                                 dx[b * classes + k] += g * p;
                               }
                             }
                           });
}

template <typename T>
BasicTensor<T> gather_anchor_rows(const std::vector<BasicTensor<T>>& maps, Index width) {
  if (maps.empty()) throw DimensionError("gather_anchor_rows: no maps");
  if (width <= 0) throw DimensionError("gather_anchor_rows: width must be positive");
  const Index n = maps.front().dim(0);
  struct Level {
    Index k, h, w, offset;
  };
  std::vector<Level> levels;
  Index anchors = 0;
  for (const auto& m : maps) {
    require_rank(m.shape(), 4, "gather_anchor_rows", "map");
    if (m.dim(0) != n) throw DimensionError("gather_anchor_rows: batch sizes differ");
    if (m.dim(1) % width != 0) {
      throw DimensionError("gather_anchor_rows: channels (axis 1) " + std::to_string(m.dim(1)) +
                           " not divisible by width " + std::to_string(width));
    }
    Level l{m.dim(1) / width, m.dim(2), m.dim(3), anchors};
    anchors += l.k * l.h * l.w;
    levels.push_back(l);
  }
  std::vector<T> out(static_cast<std::size_t>(n * anchors * width));
  for (std::size_t li = 0; li < maps.size(); ++li) {
    const Level& l = levels[li];
    const T* src = maps[li].data().data();
    const Index plane = l.h * l.w;
    for (Index b = 0; b < n; ++b) {
      for (Index kk = 0; kk < l.k; ++kk) {
        for (Index j = 0; j < width; ++j) {
          const T* ch = src + (b * l.k * width + kk * width + j) * plane;
          for (Index p = 0; p < plane; ++p) {
            const Index a = l.offset + p * l.k + kk;
            out[(b * anchors + a) * width + j] = ch[p];
          }
        }
      }
    }
  }
  std::vector<const BasicTensor<T>*> ptrs;
  for (const auto& m : maps) ptrs.push_back(&m);
  // make_op_result takes an initializer_list; wire the inputs up manually.
  auto result = make_op_result<T>(Shape{n, anchors, width}, std::move(out), "gather_anchor_rows",
                                  {}, {});
  bool track = false;
  if (grad_enabled()) {
    for (const auto& m : maps) track = track || m.requires_grad();
  }
  if (track) {
    auto node = result.node();
    node->requires_grad = true;
    for (const auto& m : maps) node->inputs.push_back(m.node());
    node->backward = [levels, n, anchors, width](detail::Node<T>& self) {
      for (std::size_t li = 0; li < levels.size(); ++li) {
        auto& in = *self.inputs[li];
        if (!in.requires_grad) continue;
        const Level& l = levels[li];
        const Index plane = l.h * l.w;
        for (Index b = 0; b < n; ++b) {
          for (Index kk = 0; kk < l.k; ++kk) {
            for (Index j = 0; j < width; ++j) {
              T* ch = in.grad.data() + (b * l.k * width + kk * width + j) * plane;
              for (Index p = 0; p < plane; ++p) {
                const Index a = l.offset + p * l.k + kk;
                ch[p] += self.grad[(b * anchors + a) * width + j];
              }
            }
          }
        }
      }
    };
  }
  return result;
}

#define MDN_INSTANTIATE_OPS(T)                                                                   \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const LayerParams<T>&, Index, Index);    \
  template BasicTensor<T> transposed_conv2d(const BasicTensor<T>&, const LayerParams<T>&, Index, \
                                            Index, Index);                                       \
  template BasicTensor<T> maxpool2d(const BasicTensor<T>&, Index, Index);                        \
  template BasicTensor<T> batchnorm(const BasicTensor<T>&, BatchNormParams<T>&, Mode, T);        \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                           \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                     \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                                       \
  template BasicTensor<T> fully_connected(const BasicTensor<T>&, const LayerParams<T>&);         \
  template BasicTensor<T> softmax(const BasicTensor<T>&, std::size_t);                           \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                 \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                            \
  template BasicTensor<T> mean(const BasicTensor<T>&);                                           \
  template BasicTensor<T> cross_entropy(const BasicTensor<T>&, std::span<const int>);            \
  template BasicTensor<T> gather_anchor_rows(const std::vector<BasicTensor<T>>&, Index);

MDN_INSTANTIATE_OPS(float)
MDN_INSTANTIATE_OPS(double)

}  // namespace mdn

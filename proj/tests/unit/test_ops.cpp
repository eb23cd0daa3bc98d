#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "instances.hpp"
#include "mdn/error.hpp"

using namespace mdn;
using testing_support::Projection;
using testing_support::random_geometry;
using testing_support::random_tensor;
using testing_support::values;

namespace {

double max_abs_diff(std::span<const double> a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("ops") {
  TEST_CASE("output size helpers") {
    CHECK(conv_output_size(64, 3, 2, 1) == 32);
    CHECK(conv_output_size(3, 3, 2, 1) == 2);
    CHECK(transposed_output_size(2, 3, 2, 1, 1) == 4);
    CHECK(transposed_output_size(2, 3, 2, 1, 0) == 3);
    CHECK(conv_output_size(2, 5, 1, 0) == 0);
  }

  TEST_CASE("conv2d matches the nested-loop oracle") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = random_geometry(rng);
      if (g.h + 2 * g.p < g.k || g.w + 2 * g.p < g.k) continue;
      auto x = random_tensor({g.n, g.c, g.h, g.w}, rng, -1, 1, false);
      LayerParams<double> p{random_tensor({g.o, g.c, g.k, g.k}, rng, -1, 1, false),
                            random_tensor({g.o}, rng, -1, 1, false)};
      Index oh = 0, ow = 0;
      const auto ref = oracle::conv2d(values(x), g.n, g.c, g.h, g.w, values(p.weight), g.o, g.k,
                                      values(p.bias), g.s, g.p, oh, ow);
      const auto y = conv2d(x, p, g.s, g.p);
      CHECK(y.shape() == Shape{g.n, g.o, oh, ow});
      CHECK(max_abs_diff(y.data(), ref) < 1e-12);
    }
  }

  TEST_CASE("transposed_conv2d matches the scatter oracle") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
      auto g = random_geometry(rng);
      const Index op = g.s > 1 ? std::uniform_int_distribution<Index>(0, g.s - 1)(rng) : 0;
      if ((g.h - 1) * g.s - 2 * g.p + g.k + op < 1) continue;
      auto x = random_tensor({g.n, g.c, g.h, g.w}, rng, -1, 1, false);
      LayerParams<double> p{random_tensor({g.c, g.o, g.k, g.k}, rng, -1, 1, false),
                            random_tensor({g.o}, rng, -1, 1, false)};
      Index oh = 0, ow = 0;
      const auto ref = oracle::deconv2d(values(x), g.n, g.c, g.h, g.w, values(p.weight), g.o, g.k,
                                        values(p.bias), g.s, g.p, op, oh, ow);
      const auto y = transposed_conv2d(x, p, g.s, g.p, op);
      CHECK(y.shape() == Shape{g.n, g.o, oh, ow});
      CHECK(max_abs_diff(y.data(), ref) < 1e-12);
    }
  }

  TEST_CASE("transposed_conv2d rejects output padding that does not invert the conv") {
    Tensor64 x(Shape{1, 1, 2, 2}, 1.0);
    LayerParams<double> p{Tensor64(Shape{1, 1, 3, 3}, 1.0), {}};
    CHECK_THROWS_AS(transposed_conv2d(x, p, 2, 1, 2), DimensionError);
  }

  TEST_CASE("conv2d rejects channel mismatch") {
    Tensor64 x(Shape{1, 2, 4, 4}, 1.0);
    LayerParams<double> p{Tensor64(Shape{1, 3, 3, 3}, 1.0), {}};
    CHECK_THROWS_AS(conv2d(x, p, 1, 1), DimensionError);
  }

  TEST_CASE("maxpool picks window maxima and routes grad to the first maximum") {
    std::mt19937_64 rng(13);
    auto x = random_tensor({2, 3, 6, 6}, rng);
    const auto y = maxpool2d(x, 2, 2);
    CHECK(max_abs_diff(y.data(), oracle::maxpool(values(x), 2, 3, 6, 6, 2, 2)) == 0.0);

    Tensor64 t(Shape{1, 1, 2, 2}, std::vector<double>{3, 3, 1, 3});
    t.set_requires_grad(true);
    backward(sum(maxpool2d(t, 2, 2)));
    CHECK(t.grad()[0] == 1.0);
    CHECK(t.grad()[1] == 0.0);
    CHECK(t.grad()[3] == 0.0);
  }

  TEST_CASE("batchnorm train mode standardizes and updates running statistics") {
    std::mt19937_64 rng(14);
    auto x = random_tensor({4, 2, 3, 3}, rng, 2.0, 5.0, false);
    BatchNormParams<double> p{Tensor64(Shape{2}, 1.0), Tensor64(Shape{2}, 0.0),
                              Tensor64(Shape{2}, 0.0), Tensor64(Shape{2}, 1.0)};
    const auto y = batchnorm(x, p, Mode::kTrain, 0.1);
    for (Index c = 0; c < 2; ++c) {
      double mean = 0, sq = 0, xmean = 0, xsq = 0;
      const Index m = 4 * 9;
      for (Index b = 0; b < 4; ++b)
        for (Index i = 0; i < 9; ++i) {
          const double v = y.data()[(b * 2 + c) * 9 + i];
          const double xv = x.data()[(b * 2 + c) * 9 + i];
          mean += v;
          sq += v * v;
          xmean += xv;
          xsq += xv * xv;
        }
      mean /= m;
      xmean /= m;
      CHECK(std::abs(mean) < 1e-12);
      CHECK(sq / m == doctest::Approx(1.0).epsilon(1e-3));
      const double unbiased = (xsq - m * xmean * xmean) / (m - 1);
      CHECK(p.running_mean.data()[c] == doctest::Approx(0.1 * xmean));
      CHECK(p.running_var.data()[c] == doctest::Approx(0.9 + 0.1 * unbiased));
    }
    // Eval mode reads the running estimates.
    const auto e = batchnorm(x, p, Mode::kEval, 0.1);
    const double expect = (x.data()[0] - p.running_mean.data()[0]) /
                          std::sqrt(p.running_var.data()[0] + p.epsilon);
    CHECK(e.data()[0] == doctest::Approx(expect));
  }

  TEST_CASE("relu, add and scale") {
    Tensor64 a(Shape{3}, std::vector<double>{-1, 0.5, 2});
    Tensor64 b(Shape{3}, std::vector<double>{1, 1, 1});
    CHECK(values(relu(a)) == std::vector<double>{0, 0.5, 2});
    CHECK(values(add(a, b)) == std::vector<double>{0, 1.5, 3});
    CHECK(values(scale(a, 2.0)) == std::vector<double>{-2, 1, 4});
    CHECK_THROWS_AS(add(a, Tensor64(Shape{2}, 0.0)), DimensionError);
  }

  TEST_CASE("softmax rows sum to one and survive large logits") {
    Tensor64 x(Shape{2, 3}, std::vector<double>{1000, 1001, 1002, -5, 0, 5});
    const auto y = softmax(x, 1);
    for (int r = 0; r < 2; ++r) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += y.data()[r * 3 + k];
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(std::isfinite(y.data()[2]));
  }

  TEST_CASE("cross entropy of uniform logits is log C") {
    Tensor64 x(Shape{2, 4}, 0.0);
    const std::vector<int> labels{1, 3};
    CHECK(cross_entropy(x, labels).item() == doctest::Approx(std::log(4.0)));
    const std::vector<int> bad{0, 4};
    CHECK_THROWS_AS(cross_entropy(x, bad), ContractError);
  }

  TEST_CASE("fully_connected flattens trailing dimensions") {
    Tensor64 x(Shape{2, 2, 1, 1}, std::vector<double>{1, 2, 3, 4});
    LayerParams<double> p{Tensor64(Shape{1, 2}, std::vector<double>{1, 10}),
                          Tensor64(Shape{1}, std::vector<double>{0.5})};
    CHECK(values(fully_connected(x, p)) == std::vector<double>{21.5, 43.5});
  }

  TEST_CASE("gather_anchor_rows orders anchors by level, row, column, box") {
    // One level, K = 2 boxes, width 1, grid 1 x 2: channels are (k * width + j).
    Tensor64 m(Shape{1, 2, 1, 2}, std::vector<double>{10, 11, 20, 21});
    const auto rows = gather_anchor_rows<double>({m}, 1);
    CHECK(rows.shape() == Shape{1, 4, 1});
    CHECK(values(rows) == std::vector<double>{10, 20, 11, 21});
  }

  TEST_CASE("finite-difference gradients of every differentiable op") {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 3; ++trial) {
      CAPTURE(trial);
      auto x = random_tensor({2, 2, 5, 5}, rng);
      LayerParams<double> cp{random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)};
      Projection proj(Shape{2, 3, 3, 3}, rng);
      auto f = [&] { return proj(conv2d(x, cp, 2, 1)); };
      SUBCASE("conv2d") {
        backward(f());
        for (auto* t : {&x, &cp.weight, &cp.bias}) {
          CHECK(oracle::max_fd_error(*t, [&] { return f().item(); }, testing_support::grads(*t)) <
                1e-3);
        }
      }
      SUBCASE("transposed_conv2d") {
        LayerParams<double> dp{random_tensor({2, 3, 3, 3}, rng), random_tensor({3}, rng)};
        Projection dproj(Shape{2, 3, 10, 10}, rng);
        auto g = [&] { return dproj(transposed_conv2d(x, dp, 2, 1, 1)); };
        backward(g());
        for (auto* t : {&x, &dp.weight, &dp.bias}) {
          CHECK(oracle::max_fd_error(*t, [&] { return g().item(); }, testing_support::grads(*t)) <
                1e-3);
        }
      }
      SUBCASE("batchnorm") {
        BatchNormParams<double> bp{random_tensor({2}, rng, 0.5, 1.5), random_tensor({2}, rng),
                                   Tensor64(Shape{2}, 0.0), Tensor64(Shape{2}, 1.0)};
        Projection bproj(Shape{2, 2, 5, 5}, rng);
        auto g = [&] { return bproj(batchnorm(x, bp, Mode::kTrain, 0.1)); };
        backward(g());
        for (auto* t : {&x, &bp.gamma, &bp.beta}) {
          CHECK(oracle::max_fd_error(*t, [&] { return g().item(); }, testing_support::grads(*t)) <
                1e-3);
        }
      }
      SUBCASE("fully_connected") {
        LayerParams<double> fp{random_tensor({4, 50}, rng), random_tensor({4}, rng)};
        Projection fproj(Shape{2, 4}, rng);
        auto g = [&] { return fproj(fully_connected(x, fp)); };
        backward(g());
        for (auto* t : {&x, &fp.weight, &fp.bias}) {
          CHECK(oracle::max_fd_error(*t, [&] { return g().item(); }, testing_support::grads(*t)) <
                1e-3);
        }
      }
      SUBCASE("maxpool, relu, softmax, cross entropy, gather") {
        auto xp = random_tensor({2, 2, 4, 4}, rng);
        Projection sproj(Shape{2, 2, 2, 2}, rng);
        auto g = [&] { return sproj(softmax(relu(maxpool2d(xp, 2, 2)), 1)); };
        backward(g());
        CHECK(oracle::max_fd_error(xp, [&] { return g().item(); }, testing_support::grads(xp)) <
              1e-3);
        auto logits = random_tensor({3, 5}, rng);
        const std::vector<int> labels{0, 4, 2};
        backward(cross_entropy(logits, labels));
        CHECK(oracle::max_fd_error(
                  logits, [&] { return cross_entropy(logits, labels).item(); },
                  testing_support::grads(logits)) < 1e-3);
        auto m1 = random_tensor({2, 6, 2, 2}, rng);
        auto m2 = random_tensor({2, 6, 1, 1}, rng);
        Projection gproj(Shape{2, 15, 2}, rng);
        auto h = [&] { return gproj(gather_anchor_rows<double>({m1, m2}, 2)); };
        backward(h());
        CHECK(oracle::max_fd_error(m1, [&] { return h().item(); }, testing_support::grads(m1)) <
              1e-3);
      }
    }
  }

  TEST_CASE("conv and transposed conv are adjoint") {
    std::mt19937_64 rng(16);
    for (int done = 0; done < 10;) {
      auto g = random_geometry(rng);
      g.w = g.h + g.s;  // a whole stride wider, so both axes share one output padding
      if (g.h + 2 * g.p < g.k) continue;
      ++done;
      auto x = random_tensor({g.n, g.c, g.h, g.w}, rng, -1, 1, false);
      LayerParams<double> p{random_tensor({g.o, g.c, g.k, g.k}, rng, -1, 1, false), {}};
      const auto y = conv2d(x, p, g.s, g.p);
      auto u = random_tensor(y.shape(), rng, -1, 1, false);
      const Index op = g.h - transposed_output_size(y.dim(2), g.k, g.s, g.p, 0);
      // The conv weight doubles as the transposed conv's weight.
      const auto v = transposed_conv2d(u, LayerParams<double>{p.weight, {}}, g.s, g.p, op);
      REQUIRE(v.shape() == x.shape());
      const double lhs = std::inner_product(y.data().begin(), y.data().end(), u.data().begin(), 0.0);
      const double rhs = std::inner_product(x.data().begin(), x.data().end(), v.data().begin(), 0.0);
      CHECK(std::abs(lhs - rhs) < 1e-4);
    }
  }
}

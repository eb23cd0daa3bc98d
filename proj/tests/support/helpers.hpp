#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "mdn/ops.hpp"
#include "oracles.hpp"

namespace testing_support {

inline mdn::Tensor64 random_tensor(const mdn::Shape& shape, std::mt19937_64& rng,
                                   double lo = -1.0, double hi = 1.0, bool grad = true) {
  mdn::Tensor64 t(shape, oracle::random_values(static_cast<std::size_t>(mdn::shape_numel(shape)),
                                               rng, lo, hi));
  if (grad) t.set_requires_grad(true);
  return t;
}

inline std::vector<double> values(const mdn::Tensor64& t) {
  return {t.data().begin(), t.data().end()};
}

inline std::vector<double> grads(const mdn::Tensor64& t) {
  return {t.grad().begin(), t.grad().end()};
}

// Scalar readout sum_i r_i * y_i with fixed random r, built from library ops
// so that every element of y gets a distinct gradient.
class Projection {
 public:
  Projection(const mdn::Shape& shape, std::mt19937_64& rng) {
    const mdn::Index per_row = mdn::shape_numel(shape) / shape[0];
    params_.weight = mdn::Tensor64(mdn::Shape{1, per_row},
                                   oracle::random_values(static_cast<std::size_t>(per_row), rng));
  }
  mdn::Tensor64 operator()(const mdn::Tensor64& y) const {
    return mdn::sum(mdn::fully_connected(y, params_));
  }

 private:
  mdn::LayerParams<double> params_;
};

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mdn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support

#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "mdn/tensor.hpp"

namespace mdn::data {

// Planar float image (C x H x W), values nominally in [0, 1].
struct Image {
  Index channels = 3;
  Index height = 0;
  Index width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(Index c, Index h, Index w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(static_cast<std::size_t>(c * h * w), fill) {}

  float& at(Index c, Index y, Index x) { return pixels[static_cast<std::size_t>((c * height + y) * width + x)]; }
  float at(Index c, Index y, Index x) const {
    return pixels[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  bool empty() const { return pixels.empty(); }
};

// Binary PPM (P6, maxval <= 255). Throws DataError on malformed files.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);

// Bilinear sample at continuous pixel coordinates (pixel centers at integers),
// clamping to the border.
float sample_bilinear(const Image& image, Index channel, double x, double y);

// Bilinear resample of the rectangle [x1, x2) x [y1, y2) (pixel units) onto an
// out_h x out_w grid with half-pixel alignment:
//   src_x = x1 + (j + 0.5) * (x2 - x1) / out_w - 0.5
Image crop_resize(const Image& image, double x1, double y1, double x2, double y2, Index out_h,
                  Index out_w);
Image resize(const Image& image, Index out_h, Index out_w);

void clip_unit(Image& image);

// Stacks equally sized images into an N x C x H x W tensor.
Tensor stack_images(std::span<const Image* const> images);
Image image_from_tensor(const Tensor& chw);

// Burns a rectangle outline (pixel coordinates, inclusive) into the image.
void draw_rectangle(Image& image, Index x0, Index y0, Index x1, Index y1,
                    const std::array<float, 3>& color, Index thickness = 2);

}  // namespace mdn::data

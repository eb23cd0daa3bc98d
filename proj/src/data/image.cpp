#include "mdn/data/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "mdn/error.hpp"

namespace mdn::data {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(ch);
  }
  if (token.empty()) throw DataError(path.string() + ": truncated PPM header");
  return token;
}

Index parse_header_int(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const long v = std::stol(token, &used);
    if (used != token.size() || v <= 0) throw std::invalid_argument(token);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad PPM header value '" + token + "'");
  }
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  if (next_token(in, path) != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
  const Index width = parse_header_int(next_token(in, path), path);
  const Index height = parse_header_int(next_token(in, path), path);
  const Index maxval = parse_header_int(next_token(in, path), path);
  if (maxval > 255) throw DataError(path.string() + ": 16-bit PPM is not supported");
  std::vector<unsigned char> raw(static_cast<std::size_t>(width * height * 3));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw DataError(path.string() + ": truncated pixel data");
  }
  Image img(3, height, width);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (Index y = 0; y < height; ++y) {
    for (Index x = 0; x < width; ++x) {
      for (Index c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(raw[static_cast<std::size_t>((y * width + x) * 3 + c)]) * inv;
      }
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 3) throw DataError("write_ppm: image must have 3 channels");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write image " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> raw(static_cast<std::size_t>(image.width * image.height * 3));
  for (Index y = 0; y < image.height; ++y) {
    for (Index x = 0; x < image.width; ++x) {
      for (Index c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        raw[static_cast<std::size_t>((y * image.width + x) * 3 + c)] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("short write to " + path.string());
}

float sample_bilinear(const Image& image, Index channel, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(image.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(image.height - 1));
  const Index x0 = static_cast<Index>(std::floor(x));
  const Index y0 = static_cast<Index>(std::floor(y));
  const Index x1 = std::min(x0 + 1, image.width - 1);
  const Index y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = (1 - fx) * image.at(channel, y0, x0) + fx * image.at(channel, y0, x1);
  const double bottom = (1 - fx) * image.at(channel, y1, x0) + fx * image.at(channel, y1, x1);
  return static_cast<float>((1 - fy) * top + fy * bottom);
}

Image crop_resize(const Image& image, double x1, double y1, double x2, double y2, Index out_h,
                  Index out_w) {
  if (!(x2 > x1) || !(y2 > y1) || out_h < 1 || out_w < 1) {
    throw DataError("crop_resize: empty source or target rectangle");
  }
  Image out(image.channels, out_h, out_w);
  const double sx = (x2 - x1) / static_cast<double>(out_w);
  const double sy = (y2 - y1) / static_cast<double>(out_h);
  for (Index c = 0; c < image.channels; ++c) {
    for (Index i = 0; i < out_h; ++i) {
      const double y = y1 + (static_cast<double>(i) + 0.5) * sy - 0.5;
      for (Index j = 0; j < out_w; ++j) {
        const double x = x1 + (static_cast<double>(j) + 0.5) * sx - 0.5;
        out.at(c, i, j) = sample_bilinear(image, c, x, y);
      }
    }
  }
  return out;
}

Image resize(const Image& image, Index out_h, Index out_w) {
  if (image.height == out_h && image.width == out_w) return image;
  return crop_resize(image, 0.0, 0.0, static_cast<double>(image.width),
                     static_cast<double>(image.height), out_h, out_w);
}

void clip_unit(Image& image) {
  for (float& v : image.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

Tensor stack_images(std::span<const Image* const> images) {
  if (images.empty()) throw DataError("stack_images: no images");
  const Image& first = *images.front();
  std::vector<float> values;
  values.reserve(images.size() * first.pixels.size());
  for (const Image* img : images) {
    if (img->channels != first.channels || img->height != first.height ||
        img->width != first.width) {
      throw DimensionError("stack_images: images differ in size");
    }
    values.insert(values.end(), img->pixels.begin(), img->pixels.end());
  }
  return Tensor(Shape{static_cast<Index>(images.size()), first.channels, first.height, first.width},
                std::move(values));
}

Image image_from_tensor(const Tensor& chw) {
  const Shape& s = chw.shape();
  if (s.size() != 3) throw DimensionError("image_from_tensor: expected C x H x W");
  Image img(s[0], s[1], s[2]);
  std::copy(chw.data().begin(), chw.data().end(), img.pixels.begin());
  return img;
}

void draw_rectangle(Image& image, Index x0, Index y0, Index x1, Index y1,
                    const std::array<float, 3>& color, Index thickness) {
  auto paint = [&](Index x, Index y) {
    if (x < 0 || y < 0 || x >= image.width || y >= image.height) return;
    for (Index c = 0; c < std::min<Index>(3, image.channels); ++c) image.at(c, y, x) = color[c];
  };
  for (Index t = 0; t < thickness; ++t) {
    for (Index x = x0; x <= x1; ++x) {
      paint(x, y0 + t);
      paint(x, y1 - t);
    }
    for (Index y = y0; y <= y1; ++y) {
      paint(x0 + t, y);
      paint(x1 - t, y);
    }
  }
}

}  // namespace mdn::data

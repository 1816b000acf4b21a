#include "wr/image.hpp"

#include "wr/error.hpp"

namespace wr {

GrayImage::GrayImage(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) fail(ErrorCode::InvalidArgument, "image dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

BinaryImage::BinaryImage(int w, int h, bool fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) fail(ErrorCode::InvalidArgument, "image dimensions must be positive");
  ink.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
}

std::size_t BinaryImage::ink_count() const {
  std::size_t n = 0;
  for (auto v : ink) n += v != 0;
  return n;
}

GrayImage crop(const GrayImage& img, const Rect& r) {
  if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0 || r.x + r.width > img.width ||
      r.y + r.height > img.height) {
    fail(ErrorCode::InvalidArgument, "crop rectangle outside image");
  }
  GrayImage out(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) out.at(x, y) = img.at(r.x + x, r.y + y);
  }
  return out;
}

GrayImage invert(const GrayImage& img) {
  GrayImage out = img;
  for (auto& p : out.pixels) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

GrayImage to_gray(const BinaryImage& img) {
  GrayImage out(img.width, img.height);
  for (std::size_t i = 0; i < img.ink.size(); ++i) out.pixels[i] = img.ink[i] ? 0 : 255;
  return out;
}

}  // namespace wr

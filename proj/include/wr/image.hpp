#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace wr {

/// Row-major 8-bit grayscale raster.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255);

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool operator==(const GrayImage&) const = default;
};

/// Row-major ink mask; nonzero means ink.
struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> ink;

  BinaryImage() = default;
  BinaryImage(int w, int h, bool fill = false);

  bool at(int x, int y) const { return ink[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { ink[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  /// Out-of-bounds reads are non-ink.
  bool ink_at(int x, int y) const { return contains(x, y) && at(x, y); }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t ink_count() const;
  bool operator==(const BinaryImage&) const = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  bool operator==(const Rect&) const = default;
};

GrayImage crop(const GrayImage& img, const Rect& r);
GrayImage invert(const GrayImage& img);
/// Ink rendered black (0) on white (255).
GrayImage to_gray(const BinaryImage& img);

GrayImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const GrayImage& img);
std::vector<std::uint8_t> encode_png(const GrayImage& img);

}  // namespace wr

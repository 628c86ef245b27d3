#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "axp/geometry.hpp"

namespace axp {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major, no padding.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }
  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  Rgb at(int x, int y) const;
  void set(int x, int y, Rgb c);
  /// No-op outside the raster.
  void put(int x, int y, Rgb c) {
    if (contains(x, y)) set(x, y, c);
  }

  const std::vector<std::uint8_t>& bytes() const noexcept { return data_; }
  std::vector<std::uint8_t>& bytes() noexcept { return data_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Drawing primitives. Pixel (i, j) is inked when its center (i, j) lies inside
// the shape; there is no anti-aliasing.

/// Inks every pixel within `radius` of segment ab.
void fill_capsule(Image& img, const Pixel& a, const Pixel& b, double radius, Rgb color);
void fill_disk(Image& img, const Pixel& center, double radius, Rgb color);
/// Convex polygon, either winding.
void fill_convex_polygon(Image& img, const std::vector<Pixel>& poly, Rgb color);

// PNG I/O: 8-bit RGB, no alpha, fixed compression settings so output bytes are
// a pure function of the pixels.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

struct PngInfo {
  int width = 0;
  int height = 0;
};
/// Reads only the header. Returns false for anything that is not a readable PNG.
bool probe_png(const std::filesystem::path& path, PngInfo& info);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace axp

#include "axp/raster.hpp"

#include <png.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace axp {

Image::Image(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw Error(ErrorCode::InvalidConfig, "negative image size");
  data_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < data_.size(); i += 3) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
  }
}

Rgb Image::at(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  return {data_[i], data_[i + 1], data_[i + 2]};
}

void Image::set(int x, int y, Rgb c) {
  const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
  data_[i] = c.r;
  data_[i + 1] = c.g;
  data_[i + 2] = c.b;
}

namespace {

// Liang-Barsky clip of segment ab against [xmin,xmax]x[ymin,ymax].
bool clip_segment(Pixel& a, Pixel& b, double xmin, double ymin, double xmax, double ymax) {
  const double dx = b.u - a.u;
  const double dy = b.v - a.v;
  double t0 = 0.0;
  double t1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.u - xmin, xmax - a.u, a.v - ymin, ymax - a.v};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  const Pixel a0 = a;
  a = {a0.u + t0 * dx, a0.v + t0 * dy};
  b = {a0.u + t1 * dx, a0.v + t1 * dy};
  return true;
}

double dist2_to_segment(double px, double py, const Pixel& a, const Pixel& b) {
  const double dx = b.u - a.u;
  const double dy = b.v - a.v;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((px - a.u) * dx + (py - a.v) * dy) / len2, 0.0, 1.0);
  const double ex = a.u + t * dx - px;
  const double ey = a.v + t * dy - py;
  return ex * ex + ey * ey;
}

}  // namespace

void fill_capsule(Image& img, const Pixel& a, const Pixel& b, double radius, Rgb color) {
  if (img.empty()) return;
  if (!std::isfinite(a.u) || !std::isfinite(a.v) || !std::isfinite(b.u) || !std::isfinite(b.v)) return;
  Pixel ca = a;
  Pixel cb = b;
  const double m = radius + 1.0;
  if (!clip_segment(ca, cb, -m, -m, img.width() - 1 + m, img.height() - 1 + m)) return;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ca.u, cb.u) - radius)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(std::max(ca.u, cb.u) + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ca.v, cb.v) - radius)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(std::max(ca.v, cb.v) + radius)));
  const double r2 = radius * radius;
  // The clip margin exceeds the radius, so clipping never changes which
  // in-image pixels are inked.
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (dist2_to_segment(x, y, ca, cb) <= r2) img.set(x, y, color);
    }
  }
}

void fill_disk(Image& img, const Pixel& c, double radius, Rgb color) {
  fill_capsule(img, c, c, radius, color);
}

void fill_convex_polygon(Image& img, const std::vector<Pixel>& poly, Rgb color) {
  if (poly.size() < 3 || img.empty()) return;
  double area2 = 0.0;
  double umin = poly[0].u, umax = poly[0].u, vmin = poly[0].v, vmax = poly[0].v;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Pixel& p = poly[i];
    const Pixel& q = poly[(i + 1) % poly.size()];
    if (!std::isfinite(p.u) || !std::isfinite(p.v)) return;
    area2 += p.u * q.v - q.u * p.v;
    umin = std::min(umin, p.u);
    umax = std::max(umax, p.u);
    vmin = std::min(vmin, p.v);
    vmax = std::max(vmax, p.v);
  }
  if (area2 == 0.0) return;
  const double sign = area2 > 0.0 ? 1.0 : -1.0;
  const int x0 = std::max(0, static_cast<int>(std::ceil(umin)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::floor(umax)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(vmin)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::floor(vmax)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      bool inside = true;
      for (std::size_t i = 0; i < poly.size() && inside; ++i) {
        const Pixel& p = poly[i];
        const Pixel& q = poly[(i + 1) % poly.size()];
        const double e = (q.u - p.u) * (y - p.v) - (q.v - p.v) * (x - p.u);
        inside = sign * e >= 0.0;
      }
      if (inside) img.set(x, y, color);
    }
  }
}

namespace {

// libpng reports errors through longjmp; the message is stashed here and
// turned into an exception once control is back in C++ frames.
struct PngErrorSink {
  char message[256] = {0};
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<PngErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof sink->message, "%s", msg);
  png_longjmp(png, 1);
}
void png_warning_fn(png_structp, png_const_charp) {}

void png_write_to_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}
void png_flush_noop(png_structp) {}

struct ReadCursor {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos;
};

void png_read_from_vector(png_structp png, png_bytep data, png_size_t len) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated stream");
  std::memcpy(data, cur->bytes->data() + cur->pos, len);
  cur->pos += len;
}

bool encode_rows(png_structp png, png_infop info, const Image& img, std::vector<std::uint8_t>* out) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_write_fn(png, out, png_write_to_vector, png_flush_noop);
  png_set_IHDR(png, info, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_SUB);
  png_write_info(png, info);
  const std::size_t row_bytes = static_cast<std::size_t>(img.width()) * 3;
  for (int y = 0; y < img.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(img.bytes().data() + y * row_bytes));
  }
  png_write_end(png, nullptr);
  return true;
}

bool read_header(png_structp png, png_infop info, ReadCursor* cursor, int* w, int* h) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_set_read_fn(png, cursor, png_read_from_vector);
  png_read_info(png, info);
  *w = static_cast<int>(png_get_image_width(png, info));
  *h = static_cast<int>(png_get_image_height(png, info));
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<png_size_t>(*w) * 3) png_error(png, "unexpected row layout");
  return true;
}

bool read_rows(png_structp png, std::vector<png_bytep>* rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw Error(ErrorCode::IoFailure, "cannot encode an empty image");
  std::vector<std::uint8_t> out;
  PngErrorSink sink;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  const bool ok = encode_rows(png, info, img, &out);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw Error(ErrorCode::IoFailure, std::string("png encode: ") + sink.message);
  return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::IoFailure, "not a PNG stream");
  }
  PngErrorSink sink;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  ReadCursor cursor{&bytes, 0};
  int w = 0;
  int h = 0;
  Image img;
  bool ok = read_header(png, info, &cursor, &w, &h);
  if (ok) {
    img = Image(w, h);
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[y] = img.bytes().data() + static_cast<std::size_t>(y) * w * 3;
    ok = read_rows(png, &rows);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) throw Error(ErrorCode::IoFailure, std::string("png decode: ") + sink.message);
  return img;
}

void write_png(const std::filesystem::path& path, const Image& img) { write_file_atomic(path, encode_png(img)); }

Image read_png(const std::filesystem::path& path) { return decode_png(read_file_bytes(path)); }

bool probe_png(const std::filesystem::path& path, PngInfo& info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  unsigned char head[24];
  in.read(reinterpret_cast<char*>(head), sizeof head);
  if (in.gcount() != sizeof head) return false;
  if (png_sig_cmp(head, 0, 8) != 0) return false;
  if (std::memcmp(head + 12, "IHDR", 4) != 0) return false;
  auto be32 = [](const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  };
  const std::uint32_t w = be32(head + 16);
  const std::uint32_t h = be32(head + 20);
  if (w == 0 || h == 0 || w > 1u << 20 || h > 1u << 20) return false;
  info.width = static_cast<int>(w);
  info.height = static_cast<int>(h);
  return true;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

template <typename Bytes>
void write_atomic_impl(const std::filesystem::path& path, const Bytes& contents) {
  static std::atomic<unsigned long> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
  std::filesystem::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(contents.data()), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::IoFailure, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  write_atomic_impl(path, contents);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents) {
  write_atomic_impl(path, contents);
}

}  // namespace axp

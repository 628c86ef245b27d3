#include "axp/glyphs.hpp"

#include <algorithm>
#include <cctype>

namespace axp {

namespace {

constexpr GlyphRows kDigits[10] = {
    {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E},  // 0
    {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},  // 1
    {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F},  // 2
    {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},  // 3
    {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02},  // 4
    {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},  // 5
    {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E},  // 6
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E},  // 8
    {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},  // 9
};

constexpr GlyphRows kLetters[26] = {
    {0x0E, 0x11, 0x11, 0x11, 0x1F, 0x11, 0x11},  // A
    {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},  // B
    {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E},  // C
    {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C},  // D
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F},  // E
    {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},  // F
    {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F},  // G
    {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},  // H
    {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},  // J
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11},  // K
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},  // L
    {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11},  // M
    {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},  // N
    {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // O
    {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},  // P
    {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D},  // Q
    {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},  // R
    {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E},  // S
    {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},  // T
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E},  // U
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},  // V
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A},  // W
    {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},  // X
    {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04},  // Y
    {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},  // Z
};

constexpr GlyphRows kMinus = {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00};
constexpr GlyphRows kDot = {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C};

}  // namespace

std::optional<GlyphRows> glyph_for(char c) {
  if (c >= '0' && c <= '9') return kDigits[c - '0'];
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up >= 'A' && up <= 'Z') return kLetters[up - 'A'];
  if (c == '-') return kMinus;
  if (c == '.') return kDot;
  return std::nullopt;
}

int glyph_scale(int label_height) { return std::max(1, label_height / kGlyphHeight); }

TextExtent measure_text(std::string_view text, int scale) {
  if (text.empty()) return {0, 0};
  const int n = static_cast<int>(text.size());
  return {(n * kGlyphAdvance - (kGlyphAdvance - kGlyphWidth)) * scale, kGlyphHeight * scale};
}

void draw_text(Image& img, int x, int y, std::string_view text, int scale, Rgb color) {
  int pen = x;
  for (char c : text) {
    if (auto g = glyph_for(c)) {
      for (int row = 0; row < kGlyphHeight; ++row) {
        for (int col = 0; col < kGlyphWidth; ++col) {
          if (!((*g)[row] & (0x10 >> col))) continue;
          for (int sy = 0; sy < scale; ++sy) {
            for (int sx = 0; sx < scale; ++sx) img.put(pen + col * scale + sx, y + row * scale + sy, color);
          }
        }
      }
    }
    pen += kGlyphAdvance * scale;
  }
}

bool text_present(const Image& img, int x, int y, std::string_view text, int scale, Rgb color) {
  int pen = x;
  for (char c : text) {
    if (auto g = glyph_for(c)) {
      for (int row = 0; row < kGlyphHeight; ++row) {
        for (int col = 0; col < kGlyphWidth; ++col) {
          if (!((*g)[row] & (0x10 >> col))) continue;
          for (int sy = 0; sy < scale; ++sy) {
            for (int sx = 0; sx < scale; ++sx) {
              const int px = pen + col * scale + sx;
              const int py = y + row * scale + sy;
              if (!img.contains(px, py) || !(img.at(px, py) == color)) return false;
            }
          }
        }
      }
    }
    pen += kGlyphAdvance * scale;
  }
  return true;
}

}  // namespace axp

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "axp/raster.hpp"

namespace axp {

/// Embedded 5x7 bitmap font: digits, '-', '.', 'A'-'Z' (lowercase maps to
/// uppercase). Each row is 5 bits, bit 4 is the leftmost column.
inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
inline constexpr int kGlyphAdvance = 6;

using GlyphRows = std::array<std::uint8_t, kGlyphHeight>;

std::optional<GlyphRows> glyph_for(char c);

/// Integer upscale factor used for a requested text height in pixels.
int glyph_scale(int label_height);

struct TextExtent {
  int width = 0;
  int height = 0;
};

TextExtent measure_text(std::string_view text, int scale);

/// Draws text with its top-left corner at (x, y). Unknown characters advance
/// without ink. Clipped to the raster.
void draw_text(Image& img, int x, int y, std::string_view text, int scale, Rgb color);

/// True when every set bit of the text bitmap at (x, y) carries `color`.
bool text_present(const Image& img, int x, int y, std::string_view text, int scale, Rgb color);

}  // namespace axp

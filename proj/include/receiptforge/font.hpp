#pragma once

// Embedded 5x7 bitmap font (ASCII upper case, digits, common punctuation and
// a few Latin-1 capitals). Lower case renders with the upper-case glyph.

#include "receiptforge/core.hpp"

#include <array>
#include <cstdint>
#include <string_view>

namespace receiptforge::font {

inline constexpr int kGlyphWidth = 5;
inline constexpr int kGlyphHeight = 7;
/// Horizontal advance in font pixels (glyph plus one blank column).
inline constexpr int kAdvance = 6;

/// Rows top to bottom; bit 4 is the leftmost column.
using Glyph = std::array<std::uint8_t, kGlyphHeight>;

/// Glyph for a code point; unknown code points render as a hollow box.
Glyph glyph(char32_t cp);
bool has_glyph(char32_t cp);

/// Number of code points in a UTF-8 string.
int text_length(std::string_view utf8);

/// Draws `utf8` with its top-left corner at (x, y), each font pixel a
/// scale x scale block of value `ink`. Pixels outside the image are dropped.
void draw_text(GrayImage& img, int x, int y, std::string_view utf8, int scale, std::uint8_t ink);

/// Cell extent of a drawn string without the blank column after the last
/// glyph; zero width for an empty string.
BBox text_box(int x, int y, std::string_view utf8, int scale);

}  // namespace receiptforge::font

#include "receiptforge/font.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace receiptforge::font {

namespace {

struct GlyphDef {
    char32_t cp;
    const char* rows;  // 7 rows of 5 cells, '#' for ink
};

// clang-format off
constexpr GlyphDef kGlyphs[] = {
    {U' ', "..... ..... ..... ..... ..... ..... ....."},
    {U'A', ".###. #...# #...# ##### #...# #...# #...#"},
    {U'B', "####. #...# #...# ####. #...# #...# ####."},
    {U'C', ".###. #...# #.... #.... #.... #...# .###."},
    {U'D', "####. #...# #...# #...# #...# #...# ####."},
    {U'E', "##### #.... #.... ####. #.... #.... #####"},
    {U'F', "##### #.... #.... ####. #.... #.... #...."},
    {U'G', ".###. #...# #.... #.### #...# #...# .####"},
    {U'H', "#...# #...# #...# ##### #...# #...# #...#"},
    {U'I', ".###. ..#.. ..#.. ..#.. ..#.. ..#.. .###."},
    {U'J', "..### ...#. ...#. ...#. ...#. #..#. .##.."},
    {U'K', "#...# #..#. #.#.. ##... #.#.. #..#. #...#"},
    {U'L', "#.... #.... #.... #.... #.... #.... #####"},
    {U'M', "#...# ##.## #.#.# #.#.# #...# #...# #...#"},
    {U'N', "#...# #...# ##..# #.#.# #..## #...# #...#"},
    {U'O', ".###. #...# #...# #...# #...# #...# .###."},
    {U'P', "####. #...# #...# ####. #.... #.... #...."},
    {U'Q', ".###. #...# #...# #...# #.#.# #..#. .##.#"},
    {U'R', "####. #...# #...# ####. #.#.. #..#. #...#"},
    {U'S', ".#### #.... #.... .###. ....# ....# ####."},
    {U'T', "##### ..#.. ..#.. ..#.. ..#.. ..#.. ..#.."},
    {U'U', "#...# #...# #...# #...# #...# #...# .###."},
    {U'V', "#...# #...# #...# #...# #...# .#.#. ..#.."},
    {U'W', "#...# #...# #...# #.#.# #.#.# #.#.# .#.#."},
    {U'X', "#...# #...# .#.#. ..#.. .#.#. #...# #...#"},
    {U'Y', "#...# #...# .#.#. ..#.. ..#.. ..#.. ..#.."},
    {U'Z', "##### ....# ...#. ..#.. .#... #.... #####"},
    {U'0', ".###. #...# #..## #.#.# ##..# #...# .###."},
    {U'1', "..#.. .##.. ..#.. ..#.. ..#.. ..#.. .###."},
    {U'2', ".###. #...# ....# ...#. ..#.. .#... #####"},
    {U'3', "##### ...#. ..#.. ...#. ....# #...# .###."},
    {U'4', "...#. ..##. .#.#. #..#. ##### ...#. ...#."},
    {U'5', "##### #.... ####. ....# ....# #...# .###."},
    {U'6', "..##. .#... #.... ####. #...# #...# .###."},
    {U'7', "##### ....# ...#. ..#.. .#... .#... .#..."},
    {U'8', ".###. #...# #...# .###. #...# #...# .###."},
    {U'9', ".###. #...# #...# .#### ....# ...#. .##.."},
    {U'.', "..... ..... ..... ..... ..... .##.. .##.."},
    {U',', "..... ..... ..... ..... .##.. ..#.. .#..."},
    {U'\'', "..#.. ..#.. .#... ..... ..... ..... ....."},
    {U'/', "....# ....# ...#. ..#.. .#... #.... #...."},
    {U'%', "##..# ##..# ...#. ..#.. .#... #..## #..##"},
    {U'*', "..... ..#.. #.#.# .###. #.#.# ..#.. ....."},
    {U'-', "..... ..... ..... ##### ..... ..... ....."},
    {U':', "..... .##.. .##.. ..... .##.. .##.. ....."},
    {U'+', "..... ..#.. ..#.. ##### ..#.. ..#.. ....."},
    {U'=', "..... ..... ##### ..... ##### ..... ....."},
    {U'(', "...#. ..#.. .#... .#... .#... ..#.. ...#."},
    {U')', ".#... ..#.. ...#. ...#. ...#. ..#.. .#..."},
    {U'!', "..#.. ..#.. ..#.. ..#.. ..#.. ..... ..#.."},
    {U'?', ".###. #...# ....# ...#. ..#.. ..... ..#.."},
    {U'&', ".##.. #..#. #.#.. .#... #.#.# #..#. .##.#"},
    {U'#', ".#.#. .#.#. ##### .#.#. ##### .#.#. .#.#."},
    {U'$', "..#.. .#### #.#.. .###. ..#.# ####. ..#.."},
    {U'€', "..### .#... ####. .#... ####. .#... ..###"},
    {U'£', "..##. .#..# .#... ###.. .#... .#... #####"},
    {U'É', "...#. ..#.. ##### #.... ####. #.... #####"},
    {U'È', ".#... ..#.. ##### #.... ####. #.... #####"},
    {U'À', ".#... ..#.. .###. #...# ##### #...# #...#"},
    {U'Ç', ".###. #...# #.... #...# .###. ..#.. .##.."},
};
// clang-format on

constexpr Glyph kUnknown = {0x1F, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1F};

const std::map<char32_t, Glyph>& table() {
    static const std::map<char32_t, Glyph> t = [] {
        std::map<char32_t, Glyph> m;
        for (const auto& def : kGlyphs) {
            Glyph g{};
            const std::string rows = def.rows;
            for (int r = 0; r < kGlyphHeight; ++r) {
                for (int c = 0; c < kGlyphWidth; ++c) {
                    if (rows[static_cast<std::size_t>(r * (kGlyphWidth + 1) + c)] == '#') {
                        g[static_cast<std::size_t>(r)] |= static_cast<std::uint8_t>(1u << (kGlyphWidth - 1 - c));
                    }
                }
            }
            m.emplace(def.cp, g);
        }
        return m;
    }();
    return t;
}

char32_t canonical(char32_t cp) {
    if (cp >= U'a' && cp <= U'z') return cp - U'a' + U'A';
    if (cp == U'é') return U'É';
    if (cp == U'è') return U'È';
    if (cp == U'à') return U'À';
    if (cp == U'ç') return U'Ç';
    return cp;
}

char32_t decode(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = b0 < 0x80 ? 1 : (b0 & 0xE0) == 0xC0 ? 2 : (b0 & 0xF0) == 0xE0 ? 3 : (b0 & 0xF8) == 0xF0 ? 4 : 1;
    if (i + static_cast<std::size_t>(len) > s.size()) len = 1;
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]) & 0x3F);
    i += static_cast<std::size_t>(len);
    return cp;
}

}  // namespace

Glyph glyph(char32_t cp) {
    const auto it = table().find(canonical(cp));
    return it == table().end() ? kUnknown : it->second;
}

bool has_glyph(char32_t cp) { return table().count(canonical(cp)) > 0; }

int text_length(std::string_view utf8) {
    int n = 0;
    for (std::size_t i = 0; i < utf8.size();) {
        decode(utf8, i);
        ++n;
    }
    return n;
}

void draw_text(GrayImage& img, int x, int y, std::string_view utf8, int scale, std::uint8_t ink) {
    int pen = x;
    for (std::size_t i = 0; i < utf8.size();) {
        const Glyph g = glyph(decode(utf8, i));
        for (int r = 0; r < kGlyphHeight; ++r) {
            for (int c = 0; c < kGlyphWidth; ++c) {
                if (!(g[static_cast<std::size_t>(r)] & (1u << (kGlyphWidth - 1 - c)))) continue;
                for (int dy = 0; dy < scale; ++dy) {
                    const int py = y + r * scale + dy;
                    if (py < 0 || py >= img.height()) continue;
                    for (int dx = 0; dx < scale; ++dx) {
                        const int px = pen + c * scale + dx;
                        if (px >= 0 && px < img.width()) img.at(px, py) = ink;
                    }
                }
            }
        }
        pen += kAdvance * scale;
    }
}

BBox text_box(int x, int y, std::string_view utf8, int scale) {
    const int n = text_length(utf8);
    const int w = n == 0 ? 0 : (n * kAdvance - 1) * scale;
    return {double(x), double(y), double(w), double(kGlyphHeight * scale)};
}

}  // namespace receiptforge::font

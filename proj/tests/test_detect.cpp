#include "receiptforge/detect.hpp"
#include "receiptforge/error.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cctype>
#include <random>
#include <string_view>

using namespace receiptforge;
using Catch::Approx;

namespace {

HeatMap map_with(int gw, int gh, int positives, double score) {
    HeatMap hm(gw, gh, 227, 227, {"receipt", "not_receipt"},
               std::vector<double>(static_cast<std::size_t>(gw * gh * 2), 0.0));
    for (int k = 0; k < gw * gh; ++k) {
        const double s = k < positives ? score : 0.0;
        hm.set_score(k / gw, k % gw, 0, s);
        hm.set_score(k / gw, k % gw, 1, 1.0 - s);
    }
    return hm;
}

bool is_label_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || std::string_view(" .,'-/%*").find(c) != std::string_view::npos;
}

bool parse_amount(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i == 0) return false;
    if (i == s.size()) return true;
    if (s[i] != '.' && s[i] != ',') return false;
    const std::size_t frac = s.size() - i - 1;
    if (frac < 1 || frac > 2) return false;
    for (std::size_t k = i + 1; k < s.size(); ++k)
        if (!std::isdigit(static_cast<unsigned char>(s[k]))) return false;
    return true;
}

bool strip_currency_prefix(std::string_view& s) {
    for (std::string_view c : {"€", "$", "£", "EUR", "eur", "Eur"}) {
        if (s.substr(0, c.size()) == c) {
            s.remove_prefix(c.size());
            if (!s.empty() && s.front() == ' ') s.remove_prefix(1);
            return true;
        }
    }
    return false;
}

bool strip_currency_suffix(std::string_view& s) {
    for (std::string_view c : {"€", "$", "£", "EUR", "eur", "Eur"}) {
        if (s.size() >= c.size() && s.substr(s.size() - c.size()) == c) {
            s.remove_suffix(c.size());
            if (!s.empty() && s.back() == ' ') s.remove_suffix(1);
            return true;
        }
    }
    return false;
}

bool price_oracle(std::string_view s) {
    std::string_view a = s;
    if (strip_currency_prefix(a) && parse_amount(a)) return true;
    std::string_view b = s;
    if (strip_currency_suffix(b) && parse_amount(b)) return true;
    return parse_amount(s);
}

// Brute force over every split of the line into label, gap and price.
bool grammar_oracle(std::string line) {
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    for (std::size_t l = 2; l <= std::min<std::size_t>(40, line.size()); ++l) {
        const std::string_view label(line.data(), l);
        if (!std::all_of(label.begin(), label.end(), is_label_char)) break;
        if (std::count_if(label.begin(), label.end(), [](unsigned char c) { return std::isalpha(c); }) < 2) continue;
        for (std::size_t g = l + 1; g < line.size(); ++g) {
            const std::string_view gap(line.data() + l, g - l);
            const bool spaces = gap.size() >= 2 && gap.find_first_not_of(' ') == std::string_view::npos;
            const bool tabs = gap.find_first_not_of('\t') == std::string_view::npos;
            if (!spaces && !tabs) continue;
            if (price_oracle(std::string_view(line).substr(g))) return true;
        }
    }
    return false;
}

}  // namespace

TEST_CASE("the documented example line is a product line") {
    const auto m = find_product_lines("BRICK LP        0.79€");
    REQUIRE(m.size() == 1);
    CHECK(m[0].parts.label == "BRICK LP");
    CHECK(m[0].parts.amount == "0.79");
    CHECK(m[0].parts.currency == "€");
}

TEST_CASE("empty text has no product line") { CHECK(find_product_lines("").empty()); }

TEST_CASE("price-terminated and plain lines") {
    CHECK(find_product_lines("2 YAOURT NATURE   1,35").size() == 1);
    CHECK(find_product_lines("MERCI DE VOTRE VISITE").empty());
    CHECK(find_product_lines("TOTAL            12,50").size() == 1);
    CHECK(find_product_lines("PAIN COMPLET  2.10 EUR").size() == 1);
    CHECK(find_product_lines("LAIT  $3").size() == 1);
}

TEST_CASE("grammar agrees with a brute-force split oracle") {
    const std::vector<std::string> lines = {
        "BRICK LP        0.79€", "A  1", "ABC 1,00", "ABC  1,000", "ABC  12,5", "  X  3.30€  ", "12,50",
        "VIN ROUGE  €4.50",      "PAIN\t0,99", "TEL 01 20 59 34 07", "CAFE  1,2,3", "SUCRE  1.99 EUR",
        "SUCRE  1.99 USD",       "JUS  0.50£",         "AB  1",          "AB CD EF  €12",
        "A1  2,00",              "LAIT 1/2 ECR  0,89", "X  1,00"};
    for (const auto& l : lines) {
        INFO(l);
        CHECK(!find_product_lines(l).empty() == grammar_oracle(l));
    }
}

TEST_CASE("text detection is true iff some line matches") {
    CHECK(detect_by_text("HALLE\nBRICK LP        0.79€\nMERCI"));
    CHECK_FALSE(detect_by_text("Lorem ipsum dolor sit amet,\nconsectetur adipiscing elit.\nSed do eiusmod."));
}

TEST_CASE("one valid line among a hundred price-less lines is found") {
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> letter('A', 'Z'), len(3, 20);
    std::string text;
    for (int i = 0; i < 100; ++i) {
        std::string l;
        for (int k = len(rng); k > 0; --k) l += static_cast<char>(letter(rng));
        REQUIRE_FALSE(grammar_oracle(l));
        text += l + "\n";
        if (i == 57) text += "CAFE MOULU  3,49€\n";
    }
    const auto m = find_product_lines(text);
    REQUIRE(m.size() == 1);
    CHECK(m[0].line_index == 58);
    CHECK(detect_by_text(text));
}

TEST_CASE("trailing whitespace does not change the matches") {
    const std::string a = "BRICK LP        0.79€\nMERCI\nLAIT  1,00";
    const std::string b = "BRICK LP        0.79€   \nMERCI \t\nLAIT  1,00  ";
    const auto ma = find_product_lines(a), mb = find_product_lines(b);
    REQUIRE(ma.size() == mb.size());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(ma[i].line_index == mb[i].line_index);
        CHECK(ma[i].parts.label == mb[i].parts.label);
        CHECK(ma[i].parts.amount == mb[i].parts.amount);
    }
}

TEST_CASE("image detection ratios and hits") {
    const DetectionConfig cfg;
    const auto thirty = detect_by_image(map_with(10, 10, 30, 0.9), cfg);
    CHECK(thirty.hit);
    CHECK(thirty.positive_ratio == Approx(0.30));
    const auto none = detect_by_image(map_with(10, 10, 0, 0.9), cfg);
    CHECK_FALSE(none.hit);
    CHECK(none.positive_ratio == 0.0);
    const auto ten = detect_by_image(map_with(10, 10, 10, 0.9), cfg);
    CHECK_FALSE(ten.hit);
    CHECK(ten.positive_ratio == Approx(0.10));
}

TEST_CASE("inclusive thresholds at the exact boundary") {
    const DetectionConfig cfg;
    CHECK(detect_by_image(map_with(40, 25, 250, 0.70), cfg).hit);
    CHECK_FALSE(detect_by_image(map_with(40, 25, 249, 0.70), cfg).hit);
    CHECK_FALSE(detect_by_image(map_with(40, 25, 250, 0.699), cfg).hit);
    CHECK(detect_by_image(map_with(4, 1, 1, 0.70), cfg).hit);
}

TEST_CASE("image detection rejects a map without the target class") {
    HeatMap hm(1, 1, 227, 227, {"logo", "background"}, {0.5, 0.5});
    try {
        detect_by_image(hm, {});
        FAIL("expected ClassMismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ClassMismatch);
    }
}

TEST_CASE("fusion is logical OR") {
    for (bool t : {false, true})
        for (bool i : {false, true}) CHECK(fuse_detection(t, i) == (t || i));
}

TEST_CASE("adding a product line never flips a fused hit to a miss") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> pos(0, 100);
    for (int k = 0; k < 50; ++k) {
        const HeatMap hm = map_with(10, 10, pos(rng), 0.9);
        const std::string text = k % 2 ? "MERCI" : "";
        const bool before = detect_receipt(text, hm, {}).fused;
        const bool after = detect_receipt(text + "\nPAIN  1,00", hm, {}).fused;
        CHECK(after);
        CHECK((!before || after));
    }
}

TEST_CASE("raising a cell score never turns an image hit into a miss") {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        HeatMap hm = map_with(6, 5, 0, 0.0);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 6; ++j) {
                const double s = u(rng);
                hm.set_score(i, j, 0, s);
                hm.set_score(i, j, 1, 1.0 - s);
            }
        bool prev = detect_by_image(hm, {}).hit;
        for (int step = 0; step < 10; ++step) {
            const int i = static_cast<int>(u(rng) * 5), j = static_cast<int>(u(rng) * 6);
            const double s = std::min(1.0, hm.score(i, j, 0) + u(rng) * 0.5);
            hm.set_score(i, j, 0, s);
            hm.set_score(i, j, 1, 1.0 - s);
            const bool now = detect_by_image(hm, {}).hit;
            CHECK((!prev || now));
            prev = now;
        }
    }
}

TEST_CASE("verdict carries both paths and the fused result") {
    const auto v = detect_receipt("BRICK LP        0.79€", map_with(4, 4, 0, 0.9), {});
    CHECK(v.text_hit);
    CHECK_FALSE(v.image_hit);
    CHECK(v.fused);
    CHECK(v.product_line_count == 1);
}

TEST_CASE("detection config is validated") {
    DetectionConfig cfg;
    cfg.heat_threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.receipt_ratio = -0.1;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

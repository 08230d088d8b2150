#include "receiptforge/error.hpp"
#include "receiptforge/ocr.hpp"
#include "receiptforge/synth.hpp"

#include "repair_oracle.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cctype>
#include <random>

using namespace receiptforge;
using Catch::Approx;

namespace {

std::vector<TextUnit> two_lines() {
    return {{0, 0, "BRICK LP", {10, 10, 80, 20}},
            {0, 16, "0.79€", {150, 10, 40, 20}},
            {1, 0, "PAIN COMPLET", {10, 40, 100, 20}},
            {1, 16, "2,10", {150, 40, 40, 20}}};
}

}  // namespace

TEST_CASE("the literal price example is repaired") {
    CHECK(repair_numeric("I00", RepairContext::PriceColumn) == "100");
    CHECK(repair_numeric("100", RepairContext::PriceColumn) == "100");
    CHECK(repair_numeric("O.5O", RepairContext::PriceColumn) == "0.50");
    CHECK(repair_numeric("OIL", RepairContext::FreeText) == "OIL");
    CHECK(repair_numeric("I00", RepairContext::FreeText) == "I00");
}

TEST_CASE("words in a price column are left alone") {
    CHECK(repair_numeric("LOT", RepairContext::PriceColumn) == "LOT");
    CHECK(repair_numeric("OIL", RepairContext::PriceColumn) == "OIL");
    CHECK(repair_numeric("SOS", RepairContext::PriceColumn) == "SOS");
    CHECK(repair_numeric("  I,5O €", RepairContext::PriceColumn) == "  1,50 €");
}

TEST_CASE("price tokens agree with a direct parser") {
    std::mt19937 rng(17);
    for (int k = 0; k < 5000; ++k) {
        std::string t = oracle::fuzz_token_text(rng);
        t.erase(std::remove(t.begin(), t.end(), ' '), t.end());
        INFO(t);
        CHECK(is_price_token(t) == oracle::price_oracle(t));
    }
    CHECK(is_price_token("0.79€"));
    CHECK(is_price_token("EUR12"));
    CHECK_FALSE(is_price_token("1,234"));
}

TEST_CASE("repair is idempotent, preserves prices and agrees with the rule on fuzzed tokens") {
    std::mt19937 rng(99);
    for (int k = 0; k < 10000; ++k) {
        const std::string t = oracle::fuzz_token_text(rng);
        INFO(t);
        const std::string once = repair_numeric(t, RepairContext::PriceColumn);
        CHECK(repair_numeric(once, RepairContext::PriceColumn) == once);
        CHECK(once.size() == t.size());
        CHECK(once == oracle::repair_oracle(t));
        if (t.find(' ') == std::string::npos && oracle::price_oracle(t)) CHECK(once == t);
        CHECK(repair_numeric(t, RepairContext::FreeText) == t);
    }
}

TEST_CASE("stub OCR returns covered lines top first") {
    const StubOcr ocr(two_lines());
    const GrayImage img(200, 80, 255);
    const auto first = ocr.recognize(img, BBox{10, 10, 80, 20});
    REQUIRE(first.size() == 1);
    CHECK(first[0].text == "BRICK LP");
    CHECK(first[0].confidence == 1.0);
    const auto both = ocr.recognize(img, BBox{0, 0, 200, 70});
    REQUIRE(both.size() == 2);
    CHECK(both[0].text == "BRICK LP        0.79€");
    CHECK(both[1].text == "PAIN COMPLET    2,10");
    CHECK(ocr.recognize(img, std::nullopt).size() == 2);
}

TEST_CASE("stub OCR drops lines covered by less than half") {
    const StubOcr ocr(two_lines());
    const GrayImage img(200, 80, 255);
    // 40 % of the first label box.
    CHECK(ocr.recognize(img, BBox{10, 10, 32, 20}).empty());
    CHECK(ocr.recognize(img, BBox{10, 10, 40, 20}).size() == 1);
}

TEST_CASE("stub OCR reproduces generated text") {
    const SynthAssets assets = default_assets(1, 3);
    SyntheticSpec spec;
    spec.store_id = assets.stores.stores()[0].store_id;
    spec.seed = 4;
    const RenderedSample s = generate(spec, assets);
    const StubOcr ocr(s.truth.units);
    const auto lines = ocr.recognize(GrayImage(s.truth.receipt_width, s.truth.receipt_height, 255), std::nullopt);
    std::string joined;
    for (const auto& l : lines) joined += (joined.empty() ? "" : "\n") + l.text;
    CHECK(joined == s.truth.text());
}

TEST_CASE("missing unit sidecar raises OracleLoadError") {
    try {
        stub_ocr("/nonexistent/receipt.json");
        FAIL("expected OracleLoadError");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OracleLoadError);
    }
}

TEST_CASE("noise at rate zero is the identity and rate one forces swaps") {
    CHECK(inject_noise("BRICK LP  0.79€", 0.0, 5) == "BRICK LP  0.79€");
    const ConfusionTable table({}, {{'1', 'I'}, {'0', 'O'}});
    CHECK(inject_noise("100", 1.0, 5, table, kNoiseSwap) == "IOO");
}

TEST_CASE("noise is reproducible per seed") {
    const std::string text = "LAIT DEMI ECREME UHT   1,05 EUR";
    CHECK(inject_noise(text, 0.2, 77) == inject_noise(text, 0.2, 77));
    int differ = 0;
    for (std::uint64_t s = 0; s < 20; ++s) differ += inject_noise(text, 0.2, s) != inject_noise(text, 0.2, s + 100);
    CHECK(differ > 0);
}

TEST_CASE("empirical noise rate is close to the nominal rate") {
    std::string text;
    for (int k = 0; k < 2000; ++k) text += "PAIN 0,99 LAIT 1 ";
    text.resize(100000, 'A');
    for (double rate : {0.01, 0.05, 0.1, 0.3}) {
        NoiseStats st;
        inject_noise(text, rate, 3, ConfusionTable::standard(), kNoiseAll, &st);
        CHECK(st.characters == 100000);
        CHECK(double(st.events) / double(st.characters) == Approx(rate).margin(0.02));
    }
}

TEST_CASE("noisy OCR wraps its inner backend deterministically") {
    auto inner = std::make_shared<StubOcr>(two_lines());
    const GrayImage img(200, 80, 255);
    auto clean = noisy_ocr(inner, 0.0, 1);
    CHECK(clean->recognize(img, std::nullopt) == inner->recognize(img, std::nullopt));
    auto a = noisy_ocr(inner, 0.2, 9), b = noisy_ocr(inner, 0.2, 9);
    CHECK(a->recognize(img, BBox{0, 0, 200, 70}) == b->recognize(img, BBox{0, 0, 200, 70}));
    CHECK_THROWS_AS(NoisyOcr(inner, 1.5, 1), Error);
}

TEST_CASE("confusion table swaps keep the length") {
    const auto& t = ConfusionTable::standard();
    CHECK(t.to_digit('I') == '1');
    CHECK(t.to_digit('B') == '8');
    CHECK(t.to_letter('0') == 'O');
    CHECK_FALSE(t.to_digit('A'));
    std::mt19937 rng(2);
    for (int k = 0; k < 200; ++k) {
        const std::string s = oracle::fuzz_token_text(rng);
        CHECK(inject_noise(s, 1.0, k, t, kNoiseSwap).size() == s.size());
    }
}

#include "receiptforge/error.hpp"
#include "receiptforge/sign.hpp"
#include "receiptforge/synth.hpp"

#include <catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

using namespace receiptforge;
using Catch::Approx;

namespace {

// Dice coefficient from explicit bigram counts.
double dice_oracle(const std::string& a, const std::string& b) {
    if (a.size() < 2 || b.size() < 2) return a == b ? 1.0 : 0.0;
    std::map<std::string, int> ca, cb;
    for (std::size_t i = 0; i + 1 < a.size(); ++i) ++ca[a.substr(i, 2)];
    for (std::size_t i = 0; i + 1 < b.size(); ++i) ++cb[b.substr(i, 2)];
    int common = 0;
    for (const auto& [k, n] : ca)
        if (cb.count(k)) common += std::min(n, cb[k]);
    return 2.0 * common / double(a.size() - 1 + b.size() - 1);
}

StoreDb small_db() {
    StoreRecord a;
    a.store_id = "A";
    a.display_name = "Carrefour";
    a.name_variants = {"CARREFOUR"};
    a.phone_numbers = {"0450096543"};
    a.terminology = {"CARTE PASS", "PRIX MALINS"};
    StoreRecord b;
    b.store_id = "B";
    b.display_name = "Super Marche";
    b.name_variants = {"SUPER MARCHE", "SUPERMARCHE"};
    b.phone_numbers = {"0320597712"};
    b.terminology = {"VOTRE FIDELITE RECOMPENSEE"};
    b.logo_aspect = LogoAspect::Short;
    b.layout_priors = {0.75};
    return StoreDb({a, b});
}

template <typename F>
void expect_code(ErrorCode code, F&& f) {
    try {
        f();
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

// Hand-written acceptance table for one store: weight x logo relation.
enum class LogoRel { Match, Mismatch, Absent };

struct Row {
    int weight;
    LogoRel logo;
    bool accepted;
    SignBasis basis;
};

constexpr Row kTable[] = {
    {0, LogoRel::Match, false, SignBasis::TextUnanimous},
    {0, LogoRel::Mismatch, false, SignBasis::TextUnanimous},
    {0, LogoRel::Absent, false, SignBasis::TextUnanimous},
    {1, LogoRel::Match, false, SignBasis::TextUnanimous},
    {1, LogoRel::Mismatch, false, SignBasis::TextUnanimous},
    {1, LogoRel::Absent, false, SignBasis::TextUnanimous},
    {2, LogoRel::Match, true, SignBasis::Text2PlusLogo},
    {2, LogoRel::Mismatch, false, SignBasis::TextUnanimous},
    {2, LogoRel::Absent, false, SignBasis::TextUnanimous},
    {3, LogoRel::Match, true, SignBasis::TextUnanimous},
    {3, LogoRel::Mismatch, true, SignBasis::TextUnanimous},
    {3, LogoRel::Absent, true, SignBasis::TextUnanimous},
};

std::vector<std::string> subset(int bits) {
    std::vector<std::string> out;
    for (int k = 0; k < 3; ++k)
        if (bits & (1 << k)) out.push_back(std::string(1, char('A' + k)));
    return out;
}

double best_prob(const std::vector<double>& p) { return *std::max_element(p.begin(), p.end()); }

}  // namespace

TEST_CASE("bigram dice examples") {
    CHECK(bigram_dice("CARREFOUR", "CARREFOUR") == 1.0);
    CHECK(bigram_dice("ABCD", "WXYZ") == 0.0);
    CHECK(bigram_dice("CARREFOUR", "CARREF0UR") == Approx(0.75));
    CHECK(bigram_dice("A", "A") == 1.0);
    CHECK(bigram_dice("A", "B") == 0.0);
    CHECK(bigram_dice("A", "AB") == 0.0);
}

TEST_CASE("bigram dice agrees with explicit bigram counting and is symmetric") {
    std::mt19937 rng(41);
    std::uniform_int_distribution<int> len(0, 12), ch(0, 4);
    for (int k = 0; k < 2000; ++k) {
        std::string a, b;
        for (int i = len(rng); i > 0; --i) a += static_cast<char>('A' + ch(rng));
        for (int i = len(rng); i > 0; --i) b += static_cast<char>('A' + ch(rng));
        const double d = bigram_dice(a, b);
        CHECK(d == Approx(dice_oracle(a, b)).margin(1e-12));
        CHECK(d == bigram_dice(b, a));
        CHECK(BigramBag(a).dice(BigramBag(b)) == Approx(d).margin(1e-12));
    }
}

TEST_CASE("normalization folds case, diacritics and punctuation") {
    CHECK(normalize_text("Épicerie-du Coin!") == "EPICERIEDUCOIN");
    CHECK(normalize_words("  Crème   brûlée, 2x ") == "CREME BRULEE 2X");
}

TEST_CASE("store name criterion") {
    const StoreDb db = small_db();
    const auto exact = criterion_name("CARREFOUR\nRUE DE LA PAIX", db);
    CHECK(exact.stores == std::vector<std::string>{"A"});
    CHECK(exact.score == 1.0);
    const auto typo = criterion_name("CARREF0UR", db);
    CHECK(typo.stores == std::vector<std::string>{"A"});
    CHECK(typo.score == Approx(0.75));
    CHECK(criterion_name("LAIT DEMI ECREME  1,05", db).stores.empty());
}

TEST_CASE("store name criterion ignores case and diacritics") {
    const StoreDb db = small_db();
    for (const std::string text : {"super marché", "Super Marche", "SUPER MARCHÉ"}) {
        INFO(text);
        const auto r = criterion_name(text, db);
        CHECK(r.stores == std::vector<std::string>{"B"});
        CHECK(r.score == Approx(criterion_name("SUPER MARCHE", db).score));
    }
}

TEST_CASE("phone criterion") {
    const StoreDb db = small_db();
    CHECK(criterion_phone("Tel: 04.50.09.65.43", db) == std::vector<std::string>{"A"});
    CHECK(criterion_phone("TEL (03) 20-59-77-12", db) == std::vector<std::string>{"B"});
    CHECK(criterion_phone("MERCI DE VOTRE VISITE", db).empty());
    CHECK(criterion_phone("Tel: 01 23 45 67 89", db).empty());
    CHECK(extract_phone_numbers("Tel: 04.50.09.65.43") == std::vector<std::string>{"0450096543"});
}

TEST_CASE("terminology criterion") {
    const StoreDb db = small_db();
    CHECK(criterion_terminology("AVEC VOTRE CARTE PASS", db) == std::vector<std::string>{"A"});
    CHECK(criterion_terminology("VOTRE FIDELITE REC0MPENSEE", db) == std::vector<std::string>{"B"});
    CHECK(criterion_terminology("PRIX", db).empty());
    CHECK(criterion_terminology("BONNE JOURNEE", db).empty());
}

TEST_CASE("store database validation") {
    auto stores = small_db().stores();
    auto dup_phrase = stores;
    dup_phrase[1].terminology.push_back("CARTE PASS");
    expect_code(ErrorCode::ConfigError, [&] { StoreDb{dup_phrase}; });
    auto dup_id = stores;
    dup_id[1].store_id = "A";
    expect_code(ErrorCode::ConfigError, [&] { StoreDb{dup_id}; });
    auto no_names = stores;
    no_names[0].name_variants.clear();
    expect_code(ErrorCode::ConfigError, [&] { StoreDb{no_names}; });
    auto bad_phone = stores;
    bad_phone[0].phone_numbers = {"12345"};
    expect_code(ErrorCode::ConfigError, [&] { StoreDb{bad_phone}; });
}

TEST_CASE("store database round-trips through JSON") {
    const StoreDb db = small_db();
    const StoreDb back = parse_store_db(store_db_to_json(db));
    REQUIRE(back.stores().size() == 2);
    CHECK(back.stores()[1].name_variants == db.stores()[1].name_variants);
    CHECK(back.stores()[1].logo_aspect == LogoAspect::Short);
    CHECK(back.stores()[1].layout_priors == db.stores()[1].layout_priors);
    CHECK(back.find("A")->phone_numbers == db.find("A")->phone_numbers);
}

TEST_CASE("aggregating criteria counts how many name each store") {
    CHECK(aggregate_text_evidence({"A"}, {"A"}, {"B"}) == SignEvidence{{"A", 2}, {"B", 1}});
    CHECK(aggregate_text_evidence({}, {}, {}).empty());
    CHECK(aggregate_text_evidence({"A"}, {"A"}, {"A"}) == SignEvidence{{"A", 3}});
    CHECK(aggregate_text_evidence({"C", "B"}, {"B"}, {}) == SignEvidence{{"B", 2}, {"C", 1}});
}

TEST_CASE("text evidence combines all three criteria") {
    const StoreDb db = small_db();
    const auto ev = text_evidence("CARREFOUR\nTel: 04.50.09.65.43\nAVEC VOTRE CARTE PASS", db);
    CHECK(ev == SignEvidence{{"A", 3}});
}

TEST_CASE("sign fusion agrees with the hand-written table") {
    for (const Row& row : kTable) {
        SignEvidence ev;
        if (row.weight > 0) ev.push_back({"A", row.weight});
        std::optional<std::string> logo;
        if (row.logo == LogoRel::Match) logo = "A";
        if (row.logo == LogoRel::Mismatch) logo = "B";
        const SignDecision d = fuse_sign(ev, logo);
        INFO("weight " << row.weight << " logo " << static_cast<int>(row.logo));
        CHECK(d.accepted == row.accepted);
        if (row.accepted) {
            CHECK(d.store_id == "A");
            CHECK(d.basis == row.basis);
        }
    }
}

TEST_CASE("sign fusion never accepts a store named by fewer than two criteria") {
    // Every combination of three criteria over stores A, B, C and every logo.
    const std::vector<std::optional<std::string>> logos = {std::nullopt, "A", "B", "C", "Z"};
    int accepted = 0;
    for (int c1 = 0; c1 < 8; ++c1)
        for (int c2 = 0; c2 < 8; ++c2)
            for (int c3 = 0; c3 < 8; ++c3) {
                const SignEvidence ev = aggregate_text_evidence(subset(c1), subset(c2), subset(c3));
                int threes = 0;
                for (const auto& w : ev) threes += w.weight == 3;
                for (const auto& logo : logos) {
                    const SignDecision d = fuse_sign(ev, logo);
                    std::optional<std::string> expected;
                    // Several unanimous stores are ambiguous and left to the logo rule.
                    for (const auto& w : ev)
                        if (w.weight == 3 && threes == 1) expected = w.store_id;
                    if (!expected && logo)
                        for (const auto& w : ev)
                            if (w.store_id == *logo && w.weight >= 2) expected = w.store_id;
                    CHECK(d.accepted == expected.has_value());
                    if (d.accepted) {
                        ++accepted;
                        CHECK(d.store_id == *expected);
                        int weight = 0;
                        for (const auto& w : ev)
                            if (w.store_id == d.store_id) weight = w.weight;
                        CHECK(weight >= 2);
                    }
                }
            }
    CHECK(accepted > 0);
}

TEST_CASE("refining a logo crop never lowers the best probability") {
    const SynthAssets assets = default_assets(7, 5);
    const TemplateLogoClassifier cls(assets.logos);
    for (const auto& t : assets.logos) {
        const GrayImage& logo = t.images[0];
        const int bw = logo.width() * 3 / 10, bh = logo.height() * 3 / 10;
        const GrayImage bordered = pad_to(logo, logo.width() + 2 * bw, logo.height() + 2 * bh, bw, bh, 255);
        const RefinedLogo r = refine_logo_crop(bordered, cls);
        CHECK(r.probability >= best_prob(cls.classify(bordered)));
        CHECK(r.store_id == t.label);
    }
}

TEST_CASE("refining a blank crop falls back to the original") {
    const SynthAssets assets = default_assets(7, 5);
    const TemplateLogoClassifier cls(assets.logos);
    const GrayImage white(120, 60, 255);
    const RefinedLogo r = refine_logo_crop(white, cls);
    CHECK(r.probability == Approx(best_prob(cls.classify(white))));
}

TEST_CASE("logo is found in the upper half of an upright receipt") {
    const SynthAssets assets = default_assets(3, 10);
    const TemplateLogoSegmenter seg(assets.logos);
    const TemplateLogoClassifier cls(assets.logos);
    int found = 0;
    for (int k = 0; k < 5; ++k) {
        SyntheticSpec spec;
        spec.store_id = assets.stores.stores()[static_cast<std::size_t>(k)].store_id;
        spec.seed = 100 + k;
        spec.noise_sigma = 2.0;
        const RenderedSample s = generate(spec, assets);
        REQUIRE(s.truth.logo_box);
        const GrayImage receipt = crop(s.image, s.truth.quad.bounds());
        const auto logo = locate_logo(receipt, seg, cls);
        REQUIRE(logo);
        CHECK(logo->orientation == Orientation::Upright);
        CHECK(iou(logo->box, *s.truth.logo_box) >= 0.5);
        found += logo->store_id == spec.store_id;
    }
    CHECK(found >= 4);
}

TEST_CASE("logo at the bottom of an upside-down receipt is reported inverted") {
    const SynthAssets assets = default_assets(3, 10);
    const TemplateLogoSegmenter seg(assets.logos);
    const TemplateLogoClassifier cls(assets.logos);
    SyntheticSpec spec;
    spec.store_id = assets.stores.stores()[2].store_id;
    spec.seed = 9;
    spec.logo = LogoPlacement::BottomInverted;
    const RenderedSample s = generate(spec, assets);
    REQUIRE(s.truth.logo_box);
    const GrayImage receipt = crop(s.image, s.truth.quad.bounds());
    const auto logo = locate_logo(receipt, seg, cls);
    REQUIRE(logo);
    CHECK(logo->orientation == Orientation::Inverted);
    CHECK(logo->store_id == spec.store_id);
    const BBox& up = *s.truth.logo_box;
    const BBox flipped{receipt.width() - up.right(), receipt.height() - up.bottom(), up.w, up.h};
    CHECK(iou(logo->box, flipped) >= 0.5);
}

TEST_CASE("a receipt without a logo yields no logo") {
    const SynthAssets assets = default_assets(3, 10);
    const TemplateLogoSegmenter seg(assets.logos);
    const TemplateLogoClassifier cls(assets.logos);
    SyntheticSpec spec;
    spec.store_id = assets.stores.stores()[0].store_id;
    spec.seed = 5;
    spec.logo = LogoPlacement::None;
    const RenderedSample s = generate(spec, assets);
    CHECK_FALSE(locate_logo(crop(s.image, s.truth.quad.bounds()), seg, cls));
}

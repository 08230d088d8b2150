#include "receiptforge/error.hpp"
#include "receiptforge/pipeline.hpp"
#include "receiptforge/synth.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>

using namespace receiptforge;

namespace {

struct Fixture {
    SynthAssets assets = default_assets(21, 10);
    PipelineConfig cfg;
    HeuristicReceiptBackend heat{cfg.heat_input, cfg.heat_stride};
    TemplateLogoSegmenter seg{assets.logos, cfg.heat_input, cfg.logo_stride, cfg.logo_fill};
    TemplateLogoClassifier cls{assets.logos, cfg.heat_input, cfg.logo_temperature};

    PipelineResources resources(const OcrBackend* ocr) const {
        return {&heat, &assets.stores, &seg, &cls, ocr, &assets.ontology};
    }

    RenderedSample sample(LogoPlacement logo, std::uint64_t seed, int products = 6) const {
        SyntheticSpec spec;
        spec.store_id = assets.stores.stores()[4].store_id;
        spec.product_count = products;
        spec.logo = logo;
        spec.seed = seed;
        spec.rotation_deg = 2.0;
        return generate(spec, assets);
    }
};

bool stage_ran(const PipelineReport& r) { return r.crop && r.sign && r.layout; }

}  // namespace

TEST_CASE("a non-receipt short-circuits after detection") {
    const Fixture f;
    SyntheticSpec spec;
    spec.receipt = false;
    spec.background = Background::PhotoTile;
    spec.seed = 2;
    const RenderedSample s = generate(spec, f.assets);
    const PipelineReport r = run_pipeline(s.image, s.ocr_text, f.resources(nullptr), f.cfg);
    CHECK_FALSE(r.verdict.fused);
    CHECK_FALSE(r.crop);
    CHECK_FALSE(r.sign);
    CHECK(r.exit_code() == 2);
    const auto j = report_to_json(r);
    CHECK(j.at("receipt") == false);
}

TEST_CASE("a clean receipt is accepted with every product matched") {
    const Fixture f;
    const RenderedSample s = f.sample(LogoPlacement::Top, 40);
    const StubOcr ocr(s.truth.units);
    const PipelineReport r = run_pipeline(s.image, s.ocr_text, f.resources(&ocr), f.cfg);
    REQUIRE(r.verdict.fused);
    REQUIRE(stage_ran(r));
    CHECK(r.errors.empty());
    CHECK(r.sign->accepted);
    CHECK(r.sign->store_id == s.truth.store_id);
    CHECK(r.exit_code() == 0);
    REQUIRE(r.extraction);
    REQUIRE(r.extraction->products.size() == s.truth.products.size());
    for (std::size_t k = 0; k < s.truth.products.size(); ++k) {
        CHECK(r.extraction->products[k].match.matched);
        CHECK(r.extraction->products[k].match.concept_id == s.truth.products[k].concept_id);
    }
}

TEST_CASE("a receipt photographed upside down is turned and still parses") {
    const Fixture f;
    const RenderedSample s = f.sample(LogoPlacement::BottomInverted, 41);
    const StubOcr ocr(s.truth.units);
    const PipelineReport r = run_pipeline(s.image, s.ocr_text, f.resources(&ocr), f.cfg);
    REQUIRE(stage_ran(r));
    REQUIRE(r.logo);
    CHECK(r.logo->orientation == Orientation::Inverted);
    REQUIRE(r.extraction);
    CHECK(r.extraction->products.size() == s.truth.products.size());
    const auto j = report_to_json(r);
    CHECK(j.at("orientation") == "inverted");
}

TEST_CASE("missing text evidence sends the receipt to review") {
    const Fixture f;
    const RenderedSample s = f.sample(LogoPlacement::Top, 42);
    const PipelineReport r = run_pipeline(s.image, "", f.resources(nullptr), f.cfg);
    REQUIRE(r.verdict.fused);
    REQUIRE(r.sign);
    CHECK_FALSE(r.sign->accepted);
    CHECK(r.exit_code() == 3);
    CHECK(report_to_json(r).at("status") == "needs_review");
}

TEST_CASE("debug output carries every stage") {
    const Fixture f;
    const RenderedSample s = f.sample(LogoPlacement::Top, 43, 3);
    const StubOcr ocr(s.truth.units);
    const PipelineReport r = run_pipeline(s.image, s.ocr_text, f.resources(&ocr), f.cfg);
    const auto plain = report_to_json(r), debug = report_to_json(r, true);
    for (const char* key : {"receipt", "detection", "crop", "sign", "products", "status"}) {
        CHECK(plain.contains(key));
        CHECK(debug.contains(key));
    }
    CHECK_FALSE(plain.contains("layout"));
    CHECK(debug.contains("layout"));
    CHECK(debug.contains("logo"));
    CHECK(debug.at("crop").contains("wide_box"));
}

TEST_CASE("the pipeline is deterministic") {
    const Fixture f;
    const RenderedSample s = f.sample(LogoPlacement::Top, 44);
    const StubOcr ocr(s.truth.units);
    const auto a = report_to_json(run_pipeline(s.image, s.ocr_text, f.resources(&ocr), f.cfg), true).dump();
    const auto b = report_to_json(run_pipeline(s.image, s.ocr_text, f.resources(&ocr), f.cfg), true).dump();
    CHECK(a == b);
}

TEST_CASE("pipeline config parses nested sections and rejects unknown keys") {
    const PipelineConfig c = parse_pipeline_config(
        R"({"detection":{"heat_threshold":0.6},"heatmap":{"stride":100},"semantics":{"match_threshold":0.7}})");
    CHECK(c.detection.heat_threshold == 0.6);
    CHECK(c.heat_stride == 100);
    CHECK(c.match_threshold == 0.7);
    const PipelineConfig round = parse_pipeline_config(pipeline_config_to_json(c).dump());
    CHECK(pipeline_config_to_json(round) == pipeline_config_to_json(c));
    for (const char* bad : {R"({"detection":{"nope":1}})", R"({"nope":{}})", R"({"detection":{"heat_threshold":2}})",
                            "not json"}) {
        INFO(bad);
        try {
            parse_pipeline_config(bad);
            FAIL("expected ConfigError");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ConfigError);
        }
    }
}

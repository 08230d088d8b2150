#pragma once

// Synthetic receipt corpus: fictional stores, a mini product ontology, logo
// rasters, rendered receipt photographs and their ground truth.

#include "receiptforge/backends.hpp"
#include "receiptforge/ocr.hpp"
#include "receiptforge/semantics.hpp"
#include "receiptforge/sign.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace receiptforge {

enum class Background { Plain, Textured, PhotoTile };
enum class LogoPlacement { Top, BottomInverted, None };
/// Damage applied on top of rotation and noise. OcrMiss empties the page
/// OCR text; LowContrast prints on grey paper.
enum class Degradation { None, OcrMiss, LowContrast };

std::string_view to_string(Background b);
std::string_view to_string(LogoPlacement p);
std::string_view to_string(Degradation d);
Background parse_background(std::string_view s);
LogoPlacement parse_logo_placement(std::string_view s);
Degradation parse_degradation(std::string_view s);

struct SyntheticSpec {
    std::string sample_id = "sample";
    bool receipt = true;
    std::string store_id;  // receipts only
    int product_count = 6;
    double rotation_deg = 0.0;
    Background background = Background::Plain;
    double noise_sigma = 4.0;
    LogoPlacement logo = LogoPlacement::Top;
    double ocr_noise = 0.0;
    Degradation degradation = Degradation::None;
    bool flyer = false;  // non-receipts: add a printed sheet without prices
    std::uint64_t seed = 0;
};

struct GtLine {
    std::string text;
    BBox box;  // receipt-local
    std::string role;  // logo, header, product, total, footer
};

struct GtProduct {
    int line = 0;
    std::string label;
    std::string concept_id;
    int quantity = 1;
    std::int64_t price_cents = 0;
};

struct GroundTruth {
    std::string sample_id;
    bool receipt_present = false;
    std::string store_id;
    Quad quad;  // receipt corners in the image, clockwise from top-left
    int image_width = 0;
    int image_height = 0;
    int receipt_width = 0;
    int receipt_height = 0;
    double rotation_deg = 0.0;
    Background background = Background::Plain;
    LogoPlacement logo = LogoPlacement::None;
    std::optional<BBox> logo_box;  // receipt-local, upright receipt
    Degradation degradation = Degradation::None;
    std::vector<GtLine> lines;
    std::vector<TextUnit> units;  // receipt-local boxes
    std::vector<GtProduct> products;
    /// Page text as printed, top to bottom.
    std::string text() const;
};

std::string ground_truth_to_json(const GroundTruth& gt);
GroundTruth parse_ground_truth(const std::string& json_text);
GroundTruth load_ground_truth(const std::string& path);

/// Everything the generator draws from.
struct SynthAssets {
    StoreDb stores;
    Ontology ontology;
    TemplateSet logos;  // one raster per store, label = store id
    /// Store-specific printed lines not used as sign evidence.
    std::vector<std::string> addresses;  // parallel to stores
};

/// Embedded French grocery abbreviation table (TSV).
std::string_view default_abbreviations_tsv();

/// 25 nouns x 8 qualifiers, one concept each, 25 categories.
Ontology default_ontology();

/// `store_count` fictional stores (at most 10) with logos, deterministic in
/// the seed.
SynthAssets default_assets(std::uint64_t seed, int store_count = 10);

struct RenderedSample {
    GrayImage image;
    GroundTruth truth;
    std::string ocr_text;  // noisy page text, empty on OcrMiss
};

/// Renders one sample; AssetError for an unknown store.
RenderedSample generate(const SyntheticSpec& spec, const SynthAssets& assets);

struct CorpusConfig {
    int receipts = 200;
    int non_receipts = 100;
    int stores = 10;
    std::uint64_t seed = 42;
    double ocr_noise = 0.05;
    bool oracle_heatmaps = false;
    int jobs = 1;
};

/// Specs of the corpus, in sample order.
std::vector<SyntheticSpec> corpus_specs(const CorpusConfig& cfg, const SynthAssets& assets);

/// Writes assets, samples and a manifest into `dir`.
void write_corpus(const std::string& dir, const CorpusConfig& cfg);

/// Deterministic helpers shared with the evaluator.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
double unit_uniform(std::uint64_t& state);

}  // namespace receiptforge

#pragma once

// Product lines to structured items: price parsing in integer minor units,
// short-label normalization and matching against a product ontology.

#include "receiptforge/layout.hpp"
#include "receiptforge/ocr.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace receiptforge {

enum class Currency { EUR, USD, GBP, Unknown };

std::string_view to_string(Currency c);

struct ProductLine {
    std::string label;
    int quantity = 1;
    std::optional<std::int64_t> unit_price;  // cents
    std::int64_t line_price = 0;             // cents
    Currency currency = Currency::Unknown;

    bool operator==(const ProductLine&) const = default;
};

/// NotAProductLine when the line does not satisfy the product-line grammar.
ProductLine parse_product_line(std::string_view line);

/// Leading "<q> x " / "<q>X " quantity prefix split from a label; quantity 1
/// and the trimmed label when there is none.
std::pair<int, std::string> split_quantity(std::string_view label);

/// Canonical rendering: optional "<q> x " prefix, label, two spaces, price
/// with two decimals and a trailing currency symbol.
std::string format_product_line(const ProductLine& p);

/// Totals, taxes and payment lines.
bool is_stop_line(std::string_view label);

struct Category {
    std::string category_id;
    std::string label;
};

struct Concept {
    std::string concept_id;
    std::string category_id;
    std::string label;
    std::vector<std::string> terms;
};

/// Upper-case token to expansion (one or more tokens).
using AbbreviationTable = std::map<std::string, std::string>;

AbbreviationTable parse_abbreviations(const std::string& tsv);
AbbreviationTable load_abbreviations(const std::string& path);

class Ontology {
public:
    Ontology() = default;
    /// Validates unique ids, non-empty terms and known categories
    /// (ConfigError). Concepts are kept ordered by id.
    Ontology(std::vector<Category> categories, std::vector<Concept> concepts, AbbreviationTable abbreviations = {});

    const std::vector<Category>& categories() const noexcept { return categories_; }
    const std::vector<Concept>& concepts() const noexcept { return concepts_; }
    const AbbreviationTable& abbreviations() const noexcept { return abbreviations_; }
    const Concept* find(std::string_view concept_id) const;

    /// Normalized tokens of every term of concept `i`.
    const std::vector<std::vector<std::string>>& term_tokens(std::size_t i) const { return term_tokens_[i]; }

private:
    std::vector<Category> categories_;
    std::vector<Concept> concepts_;
    AbbreviationTable abbreviations_;
    std::vector<std::vector<std::vector<std::string>>> term_tokens_;
};

Ontology parse_ontology(const std::string& json_text, AbbreviationTable abbreviations = {});
Ontology load_ontology(const std::string& path, AbbreviationTable abbreviations = {});
std::string ontology_to_json(const Ontology& o);

/// Upper-case folded tokens of `label`, digit-only tokens removed and
/// abbreviations expanded.
std::vector<std::string> label_tokens(std::string_view label, const AbbreviationTable& abbreviations);

/// Mean over label tokens of the best bigram Dice against any term token.
double token_set_similarity(const std::vector<std::string>& label, const std::vector<std::string>& term);

struct MatchResult {
    bool matched = false;
    std::string concept_id;  // best concept, also reported on NoMatch
    double score = 0.0;

    bool operator==(const MatchResult&) const = default;
};

inline constexpr double kDefaultMatchThreshold = 0.65;

MatchResult match_concept(std::string_view label, const Ontology& ontology,
                          double threshold = kDefaultMatchThreshold);

struct ExtractedProduct {
    int block = 0;  // index of the label line in the layout
    std::string text;
    ProductLine line;
    MatchResult match;
};

struct SkippedLine {
    int block = 0;
    std::string text;
    std::string reason;
};

struct ExtractionReport {
    std::vector<ExtractedProduct> products;
    std::vector<SkippedLine> skipped;
    std::vector<ExtractedProduct> excluded;  // parsed but stop-listed
};

/// Bands with several sub-blocks use the rightmost as the price column and
/// pair each label line with the price line overlapping it most; other bands
/// are read line by line. Order is top to bottom.
ExtractionReport extract_products(const Layout& layout, const GrayImage& receipt, const OcrBackend& ocr,
                                  const Ontology& ontology, double threshold = kDefaultMatchThreshold);

}  // namespace receiptforge

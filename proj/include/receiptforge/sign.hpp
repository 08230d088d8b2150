#pragma once

// Store-sign recognition. Three text criteria (store name, phone number,
// store terminology) each name zero or more stores; a logo is located in the
// receipt image and classified. The text evidence and the logo are fused by
// two acceptance rules; anything else goes to human review.

#include "receiptforge/backends.hpp"
#include "receiptforge/layout.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace receiptforge {

// ---------------------------------------------------------------------------
// Fuzzy text matching

/// Upper-cases, folds Latin-1 diacritics to their base letter and drops
/// everything that is not [A-Z0-9].
std::string normalize_text(std::string_view text);

/// Like normalize_text but keeps single spaces between tokens.
std::string normalize_words(std::string_view text);

/// Dice coefficient over character-bigram multisets of two strings; strings
/// shorter than two characters score 1 when equal and 0 otherwise.
double bigram_dice(std::string_view a, std::string_view b);

/// Character-bigram multiset, encoded and sorted, for repeated comparisons.
class BigramBag {
public:
    explicit BigramBag(std::string_view s);

    std::size_t size() const noexcept { return codes_.size(); }
    /// Dice against another bag; same short-string rule as bigram_dice.
    double dice(const BigramBag& other) const;

private:
    std::string text_;
    std::vector<std::uint16_t> codes_;
};

// ---------------------------------------------------------------------------
// Store database

enum class LogoAspect { Long, Short };

struct StoreRecord {
    std::string store_id;
    std::string display_name;
    std::vector<std::string> name_variants;
    std::vector<std::string> phone_numbers;  // digits only
    std::vector<std::string> terminology;
    LogoAspect logo_aspect = LogoAspect::Long;
    std::vector<double> layout_priors;  // column split fractions
};

class StoreDb {
public:
    StoreDb() = default;
    /// Validates every record: non-empty variants, 6-15 digit phones, unique
    /// ids and terminology phrases unique across stores (ConfigError).
    explicit StoreDb(std::vector<StoreRecord> stores);

    const std::vector<StoreRecord>& stores() const noexcept { return stores_; }
    const StoreRecord* find(std::string_view store_id) const;

private:
    std::vector<StoreRecord> stores_;
};

StoreDb parse_store_db(const std::string& json_text);
StoreDb load_store_db(const std::string& path);
std::string store_db_to_json(const StoreDb& db);

// ---------------------------------------------------------------------------
// Text criteria

struct SignTextConfig {
    double name_threshold = 0.75;
    int name_window_slack = 2;
    double terminology_threshold = 0.85;
};

struct NameCriterion {
    std::vector<std::string> stores;  // argmax stores, ties kept
    double score = 0.0;
};

NameCriterion criterion_name(std::string_view text, const StoreDb& db, const SignTextConfig& cfg = {});

/// Digit groups of 6-15 digits found in `text` after separator removal and
/// folding of OCR look-alikes (O->0, I/l->1, S->5, B->8).
std::vector<std::string> extract_phone_numbers(std::string_view text);

std::vector<std::string> criterion_phone(std::string_view text, const StoreDb& db);
std::vector<std::string> criterion_terminology(std::string_view text, const StoreDb& db,
                                               const SignTextConfig& cfg = {});

struct WeightedStore {
    std::string store_id;
    int weight = 0;

    bool operator==(const WeightedStore&) const = default;
};

/// Stores named by the criteria, weight = number of criteria naming them,
/// sorted by weight descending then id.
using SignEvidence = std::vector<WeightedStore>;

SignEvidence aggregate_text_evidence(const std::vector<std::string>& by_name,
                                     const std::vector<std::string>& by_phone,
                                     const std::vector<std::string>& by_terminology);

SignEvidence text_evidence(std::string_view text, const StoreDb& db, const SignTextConfig& cfg = {});

// ---------------------------------------------------------------------------
// Logo

struct LogoConfig {
    /// Width/height of the two logo families. The half-image is scaled so
    /// that a logo of the family spanning the receipt width becomes square.
    double long_aspect = 3.0;
    double short_aspect = 1.5;
    double logo_threshold = 0.70;
    std::string logo_class = "logo";
};

enum class Orientation { Upright, Inverted };

struct LogoResult {
    BBox box;  // in rectified receipt coordinates
    std::string store_id;
    double probability = 0.0;
    Orientation orientation = Orientation::Upright;
    LogoAspect used_ratio = LogoAspect::Long;
    /// Classes by decreasing probability after refinement.
    std::vector<std::pair<std::string, double>> ranking;
};

struct RefinedLogo {
    std::string store_id;
    double probability = 0.0;
    std::vector<double> probabilities;  // of the retained candidate
};

/// Classifies the crop and every ink-tight sub-box found by binarization and
/// projections, returning the most probable (class, probability).
RefinedLogo refine_logo_crop(const GrayImage& crop, const ClassifierBackend& cls);

/// Searches the upper half, then the lower half turned 180 degrees, each
/// with the long then the short aspect. nullopt when every attempt is empty.
std::optional<LogoResult> locate_logo(const GrayImage& receipt, const SegmentationBackend& seg,
                                      const ClassifierBackend& cls, const LogoConfig& cfg = {});

// ---------------------------------------------------------------------------
// Fusion

enum class SignBasis { TextUnanimous, Text2PlusLogo };

std::string_view to_string(SignBasis basis);

struct SignDecision {
    bool accepted = false;
    std::string store_id;  // set when accepted
    SignBasis basis = SignBasis::TextUnanimous;
    SignEvidence evidence;
    std::optional<std::string> logo_store;
};

SignDecision fuse_sign(const SignEvidence& evidence, const std::optional<LogoResult>& logo);

/// Same rules with the logo reduced to its store id.
SignDecision fuse_sign(const SignEvidence& evidence, const std::optional<std::string>& logo_store);

}  // namespace receiptforge

#pragma once

// Receipt / not-receipt decision from two independent sources: product lines
// found in the OCR text, and the receipt-class heat map. The two verdicts
// are OR-ed so that a receipt missed by one source is still kept.

#include "receiptforge/backends.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace receiptforge {

struct DetectionConfig {
    double heat_threshold = 0.70;  // cell is positive when score >= this
    double receipt_ratio = 0.25;   // image hit when positive fraction >= this
    std::string target_class = "receipt";

    void validate() const;
};

struct DetectionVerdict {
    bool text_hit = false;
    bool image_hit = false;
    bool fused = false;
    double positive_ratio = 0.0;
    int product_line_count = 0;
};

/// Name of the grammar below; bump when the pattern changes.
inline constexpr std::string_view kProductLineGrammar = "product-line-v1";

/// Pieces of a line accepted by the product-line grammar.
struct ProductLineParts {
    std::string label;     // as printed, without the gap
    std::string amount;    // digits with optional ',' or '.' decimals
    std::string currency;  // "€", "$", "£", "EUR" (upper-cased) or empty
};

/// Matches one line against `<label><gap><price>`. Trailing whitespace is
/// ignored.
std::optional<ProductLineParts> match_product_line(std::string_view line);

struct ProductLineMatch {
    int line_index = 0;
    std::string line;
    ProductLineParts parts;
};

std::vector<ProductLineMatch> find_product_lines(std::string_view text);
bool detect_by_text(std::string_view text);

struct ImageDetection {
    bool hit = false;
    double positive_ratio = 0.0;
};

/// Thresholds the target-class channel of `hm`; ClassMismatch when the
/// class is absent.
ImageDetection detect_by_image(const HeatMap& hm, const DetectionConfig& cfg);

/// Cells whose target-class score reaches the threshold.
BinaryMask positive_cells(const HeatMap& hm, const DetectionConfig& cfg);

constexpr bool fuse_detection(bool text_hit, bool image_hit) noexcept { return text_hit || image_hit; }

DetectionVerdict detect_receipt(std::string_view ocr_text, const HeatMap& hm, const DetectionConfig& cfg);

}  // namespace receiptforge

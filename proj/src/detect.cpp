#include "receiptforge/detect.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

namespace receiptforge {

void DetectionConfig::validate() const {
    if (!(heat_threshold > 0.0 && heat_threshold < 1.0)) {
        throw Error(ErrorCode::ConfigError, "heat threshold must lie in (0, 1)");
    }
    if (!(receipt_ratio > 0.0 && receipt_ratio < 1.0)) {
        throw Error(ErrorCode::ConfigError, "receipt ratio must lie in (0, 1)");
    }
}

namespace {

constexpr std::size_t kMaxLineBytes = 256;
constexpr std::size_t kMinLabel = 2;
constexpr std::size_t kMaxLabel = 40;

// label, gap (two or more spaces, or a tab run), then a price with at most
// one currency marker glued to either side.
const std::regex& product_line_regex() {
    static const std::regex re(
        R"(^([A-Za-z0-9 .,'/%*-]+?)(?: {2,}|\t+))"
        R"((?:(€|\$|£|EUR) ?(\d+(?:[.,]\d{1,2})?)|(\d+(?:[.,]\d{1,2})?)(?: ?(€|\$|£|EUR))?)$)",
        std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    return re;
}

std::string_view rstrip(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

std::optional<ProductLineParts> match_product_line(std::string_view line) {
    line = rstrip(line);
    if (line.empty() || line.size() > kMaxLineBytes) {
        return std::nullopt;
    }
    const std::string s(line);
    std::smatch m;
    if (!std::regex_match(s, m, product_line_regex())) {
        return std::nullopt;
    }
    ProductLineParts parts;
    parts.label = m[1].str();
    const auto letters = std::count_if(parts.label.begin(), parts.label.end(),
                                       [](unsigned char c) { return std::isalpha(c) != 0; });
    if (parts.label.size() < kMinLabel || parts.label.size() > kMaxLabel || letters < 2) {
        return std::nullopt;
    }
    if (m[3].matched) {
        parts.currency = upper(m[2].str());
        parts.amount = m[3].str();
    } else {
        parts.amount = m[4].str();
        parts.currency = m[5].matched ? upper(m[5].str()) : std::string{};
    }
    return parts;
}

std::vector<ProductLineMatch> find_product_lines(std::string_view text) {
    std::vector<ProductLineMatch> out;
    int index = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        const auto line = text.substr(start, end - start);
        if (auto parts = match_product_line(line)) {
            out.push_back({index, std::string(rstrip(line)), std::move(*parts)});
        }
        ++index;
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

bool detect_by_text(std::string_view text) { return !find_product_lines(text).empty(); }

BinaryMask positive_cells(const HeatMap& hm, const DetectionConfig& cfg) {
    const auto cls = hm.class_index(cfg.target_class);
    if (!cls) {
        throw Error(ErrorCode::ClassMismatch, "heat map has no '" + cfg.target_class + "' class");
    }
    BinaryMask mask(hm.grid_w(), hm.grid_h());
    for (int i = 0; i < hm.grid_h(); ++i) {
        for (int j = 0; j < hm.grid_w(); ++j) {
            mask.set(j, i, hm.score(i, j, *cls) >= cfg.heat_threshold);
        }
    }
    return mask;
}

ImageDetection detect_by_image(const HeatMap& hm, const DetectionConfig& cfg) {
    const BinaryMask mask = positive_cells(hm, cfg);
    const double total = static_cast<double>(hm.grid_w()) * hm.grid_h();
    // A correctly rounded quotient compares exactly against a ratio written
    // with the same decimal value, e.g. 25/100 against 0.25.
    const double ratio = static_cast<double>(mask.count()) / total;
    return {ratio >= cfg.receipt_ratio, ratio};
}

DetectionVerdict detect_receipt(std::string_view ocr_text, const HeatMap& hm, const DetectionConfig& cfg) {
    DetectionVerdict v;
    v.product_line_count = static_cast<int>(find_product_lines(ocr_text).size());
    v.text_hit = v.product_line_count > 0;
    const auto img = detect_by_image(hm, cfg);
    v.image_hit = img.hit;
    v.positive_ratio = img.positive_ratio;
    v.fused = fuse_detection(v.text_hit, v.image_hit);
    return v;
}

}  // namespace receiptforge

#include "receiptforge/ocr.hpp"

#include "receiptforge/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>

namespace receiptforge {

namespace {

double overlap_area(const BBox& a, const BBox& b) {
    const double w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
    const double h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

std::string read_file(const std::string& path, ErrorCode code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(code, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead & 0xE0) == 0xC0) return 2;
    if ((lead & 0xF0) == 0xE0) return 3;
    if ((lead & 0xF8) == 0xF0) return 4;
    return 1;
}

double unit_interval(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// Stub and sidecar backends

StubOcr::StubOcr(std::vector<TextUnit> units) : units_(std::move(units)) {
    std::stable_sort(units_.begin(), units_.end(),
                     [](const auto& a, const auto& b) { return std::tie(a.line, a.offset) < std::tie(b.line, b.offset); });
}

std::vector<OcrLine> StubOcr::recognize(const GrayImage&, const std::optional<BBox>& region) const {
    std::vector<OcrLine> out;
    int current = -1;
    std::string text;
    const auto flush = [&] {
        if (current >= 0) out.push_back({text, 1.0});
        text.clear();
    };
    for (const auto& u : units_) {
        if (region && !(u.box.area() > 0.0 && overlap_area(*region, u.box) >= 0.5 * u.box.area())) continue;
        if (u.line != current) {
            flush();
            current = u.line;
        }
        if (text.size() < static_cast<std::size_t>(u.offset)) text.resize(static_cast<std::size_t>(u.offset), ' ');
        text += u.text;
    }
    flush();
    return out;
}

std::vector<TextUnit> parse_text_units(const std::string& json_text) {
    std::vector<TextUnit> units;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        for (const auto& j : doc.at("units")) {
            const auto box = j.at("box").get<std::vector<double>>();
            if (box.size() != 4) throw Error(ErrorCode::OracleLoadError, "unit box must have 4 numbers");
            units.push_back({j.at("line").get<int>(), j.at("offset").get<int>(), j.at("text").get<std::string>(),
                             BBox{box[0], box[1], box[2], box[3]}});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::OracleLoadError, std::string("malformed OCR ground truth: ") + e.what());
    }
    return units;
}

std::unique_ptr<StubOcr> stub_ocr(const std::string& sidecar_path) {
    return std::make_unique<StubOcr>(parse_text_units(read_file(sidecar_path, ErrorCode::OracleLoadError)));
}

SidecarTextOcr::SidecarTextOcr(std::string text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines_.push_back({line, 1.0});
    }
}

std::vector<OcrLine> SidecarTextOcr::recognize(const GrayImage&, const std::optional<BBox>&) const { return lines_; }

std::unique_ptr<SidecarTextOcr> sidecar_text_ocr(const std::string& path) {
    return std::make_unique<SidecarTextOcr>(read_file(path, ErrorCode::OracleLoadError));
}

// ---------------------------------------------------------------------------
// Confusions and noise

ConfusionTable::ConfusionTable(std::map<char, char> letter_to_digit, std::map<char, char> digit_to_letter)
    : letter_to_digit_(std::move(letter_to_digit)), digit_to_letter_(std::move(digit_to_letter)) {}

const ConfusionTable& ConfusionTable::standard() {
    static const ConfusionTable table(
        {{'I', '1'}, {'l', '1'}, {'O', '0'}, {'o', '0'}, {'S', '5'}, {'B', '8'}},
        {{'1', 'I'}, {'0', 'O'}, {'5', 'S'}, {'8', 'B'}});
    return table;
}

std::optional<char> ConfusionTable::to_digit(char c) const {
    const auto it = letter_to_digit_.find(c);
    return it == letter_to_digit_.end() ? std::nullopt : std::optional<char>(it->second);
}

std::optional<char> ConfusionTable::to_letter(char c) const {
    const auto it = digit_to_letter_.find(c);
    return it == digit_to_letter_.end() ? std::nullopt : std::optional<char>(it->second);
}

std::optional<char> ConfusionTable::swap(char c) const {
    if (auto d = to_digit(c)) return d;
    return to_letter(c);
}

std::string inject_noise(std::string_view text, double rate, std::uint64_t seed, const ConfusionTable& table,
                         unsigned ops, NoiseStats* stats) {
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "noise rate must lie in [0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::string out;
    out.reserve(text.size() + 8);
    for (std::size_t i = 0; i < text.size();) {
        const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(text[i])), text.size() - i);
        const std::string_view ch = text.substr(i, len);
        i += len;
        if (stats) ++stats->characters;
        // one draw per character keeps the stream aligned whatever the outcome
        const double u = unit_interval(rng);
        const std::uint64_t pick = rng();
        if (u >= rate) {
            out += ch;
            continue;
        }
        NoiseOp choices[3];
        std::size_t n = 0;
        const auto swapped = len == 1 ? table.swap(ch[0]) : std::nullopt;
        if ((ops & kNoiseSwap) && swapped) choices[n++] = kNoiseSwap;
        if (ops & kNoiseDelete) choices[n++] = kNoiseDelete;
        if (ops & kNoiseInsertSpace) choices[n++] = kNoiseInsertSpace;
        if (n == 0) {
            out += ch;
            continue;
        }
        if (stats) ++stats->events;
        switch (choices[pick % n]) {
        case kNoiseSwap: out += *swapped; break;
        case kNoiseDelete: break;
        default:
            out += ' ';
            out += ch;
            break;
        }
    }
    return out;
}

std::uint64_t noise_seed(std::uint64_t seed, const std::optional<BBox>& region, std::size_t line) {
    std::uint64_t h = splitmix(seed);
    if (region) {
        for (const double v : {region->x, region->y, region->w, region->h}) {
            h = splitmix(h ^ static_cast<std::uint64_t>(std::llround(v * 16.0)));
        }
    } else {
        h = splitmix(h ^ 0xA5A5A5A5ull);
    }
    return splitmix(h ^ static_cast<std::uint64_t>(line));
}

NoisyOcr::NoisyOcr(std::shared_ptr<const OcrBackend> inner, double rate, std::uint64_t seed, ConfusionTable table,
                   unsigned ops)
    : inner_(std::move(inner)), rate_(rate), seed_(seed), table_(std::move(table)), ops_(ops) {
    if (!inner_) throw Error(ErrorCode::ConfigError, "noisy OCR needs an inner backend");
    if (!(rate_ >= 0.0 && rate_ <= 1.0)) throw Error(ErrorCode::ConfigError, "noise rate must lie in [0, 1]");
}

std::vector<OcrLine> NoisyOcr::recognize(const GrayImage& img, const std::optional<BBox>& region) const {
    auto lines = inner_->recognize(img, region);
    if (rate_ == 0.0) return lines;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        lines[i].text = inject_noise(lines[i].text, rate_, noise_seed(seed_, region, i), table_, ops_);
    }
    return lines;
}

std::shared_ptr<NoisyOcr> noisy_ocr(std::shared_ptr<const OcrBackend> inner, double rate, std::uint64_t seed) {
    return std::make_shared<NoisyOcr>(std::move(inner), rate, seed);
}

// ---------------------------------------------------------------------------
// Repair

bool is_price_token(std::string_view token) {
    static const std::regex price(R"(^(?:(?:€|\$|£|EUR)?\d+(?:[.,]\d{1,2})?|\d+(?:[.,]\d{1,2})?(?:€|\$|£|EUR))$)",
                                  std::regex::icase);
    return std::regex_match(token.begin(), token.end(), price);
}

std::string repair_numeric(std::string_view text, RepairContext context, const ConfusionTable& table) {
    std::string out(text);
    if (context == RepairContext::FreeText) return out;
    for (std::size_t i = 0; i < out.size();) {
        if (std::isspace(static_cast<unsigned char>(out[i]))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < out.size() && !std::isspace(static_cast<unsigned char>(out[j]))) ++j;
        const std::string token = out.substr(i, j - i);
        if (!is_price_token(token)) {
            std::size_t digits = 0, confusable = 0, chars = 0;
            for (const char c : token) {
                if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++chars;
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    ++digits;
                } else if (table.to_digit(c)) {
                    ++confusable;
                }
            }
            if (digits >= 1 && 2 * (digits + confusable) > chars) {
                std::string fixed = token;
                for (char& c : fixed) {
                    if (auto d = table.to_digit(c)) c = *d;
                }
                if (is_price_token(fixed)) out.replace(i, fixed.size(), fixed);
            }
        }
        i = j;
    }
    return out;
}

}  // namespace receiptforge

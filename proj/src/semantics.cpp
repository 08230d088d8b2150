#include "receiptforge/semantics.hpp"

#include "receiptforge/detect.hpp"
#include "receiptforge/error.hpp"
#include "receiptforge/sign.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <tuple>
#include <sstream>

namespace receiptforge {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kStopWords = {"TOTAL", "SOUS-TOTAL", "TVA",    "CB",
                                                         "ESPECES", "RENDU",   "MONTANT"};

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string upper_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// "12,5" -> 1250 without floating point.
std::int64_t to_cents(std::string_view amount) {
    const auto sep = amount.find_first_of(".,");
    std::int64_t units = 0;
    for (const char c : amount.substr(0, sep)) units = units * 10 + (c - '0');
    std::int64_t cents = 0;
    if (sep != std::string_view::npos) {
        const auto frac = amount.substr(sep + 1);
        cents = (frac[0] - '0') * 10 + (frac.size() > 1 ? frac[1] - '0' : 0);
    }
    return units * 100 + cents;
}

}  // namespace

std::string_view to_string(Currency c) {
    switch (c) {
    case Currency::EUR: return "EUR";
    case Currency::USD: return "USD";
    case Currency::GBP: return "GBP";
    case Currency::Unknown: return "unknown";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// Product lines

ProductLine parse_product_line(std::string_view line) {
    const auto parts = match_product_line(line);
    if (!parts) {
        throw Error(ErrorCode::NotAProductLine, "not a product line: '" + std::string(line) + "'");
    }
    ProductLine p;
    p.line_price = to_cents(parts->amount);
    if (parts->currency == "€" || parts->currency == "EUR") {
        p.currency = Currency::EUR;
    } else if (parts->currency == "$") {
        p.currency = Currency::USD;
    } else if (parts->currency == "£") {
        p.currency = Currency::GBP;
    }

    std::tie(p.quantity, p.label) = split_quantity(parts->label);
    const std::int64_t unit = (p.line_price + p.quantity / 2) / p.quantity;
    if (std::llabs(unit * p.quantity - p.line_price) <= 1) p.unit_price = unit;
    return p;
}

std::pair<int, std::string> split_quantity(std::string_view label) {
    static const std::regex quantity(R"(^(\d{1,3}) ?[xX] +(.+)$)");
    const std::string trimmed = trim(label);
    std::smatch m;
    if (std::regex_match(trimmed, m, quantity) && std::stoi(m[1].str()) >= 1) {
        return {std::stoi(m[1].str()), trim(m[2].str())};
    }
    return {1, trimmed};
}

std::string format_product_line(const ProductLine& p) {
    std::string out;
    if (p.quantity != 1) out += std::to_string(p.quantity) + " x ";
    out += p.label;
    out += "  ";
    out += std::to_string(p.line_price / 100);
    out += '.';
    const auto cents = p.line_price % 100;
    out += static_cast<char>('0' + cents / 10);
    out += static_cast<char>('0' + cents % 10);
    switch (p.currency) {
    case Currency::EUR: out += "€"; break;
    case Currency::USD: out += "$"; break;
    case Currency::GBP: out += "£"; break;
    case Currency::Unknown: break;
    }
    return out;
}

bool is_stop_line(std::string_view label) {
    for (const auto& tok : split_ws(upper_ascii(label))) {
        if (std::find(kStopWords.begin(), kStopWords.end(), tok) != kStopWords.end()) return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Ontology

AbbreviationTable parse_abbreviations(const std::string& tsv) {
    AbbreviationTable table;
    std::istringstream in(tsv);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw Error(ErrorCode::ConfigError, "abbreviation line " + std::to_string(n) + " has no tab");
        }
        const std::string key = normalize_text(line.substr(0, tab));
        const std::string value = normalize_words(line.substr(tab + 1));
        if (key.empty() || value.empty()) {
            throw Error(ErrorCode::ConfigError, "abbreviation line " + std::to_string(n) + " is empty");
        }
        table[key] = value;
    }
    return table;
}

AbbreviationTable load_abbreviations(const std::string& path) { return parse_abbreviations(read_file(path)); }

Ontology::Ontology(std::vector<Category> categories, std::vector<Concept> concepts, AbbreviationTable abbreviations)
    : categories_(std::move(categories)), concepts_(std::move(concepts)), abbreviations_(std::move(abbreviations)) {
    std::set<std::string> cats;
    for (const auto& c : categories_) {
        if (c.category_id.empty() || !cats.insert(c.category_id).second) {
            throw Error(ErrorCode::ConfigError, "duplicate or empty category id '" + c.category_id + "'");
        }
    }
    std::sort(concepts_.begin(), concepts_.end(),
              [](const auto& a, const auto& b) { return a.concept_id < b.concept_id; });
    for (std::size_t i = 0; i < concepts_.size(); ++i) {
        const auto& c = concepts_[i];
        if (c.concept_id.empty() || (i > 0 && concepts_[i - 1].concept_id == c.concept_id)) {
            throw Error(ErrorCode::ConfigError, "duplicate or empty concept id '" + c.concept_id + "'");
        }
        if (c.terms.empty()) throw Error(ErrorCode::ConfigError, "concept " + c.concept_id + " has no terms");
        if (!cats.count(c.category_id)) {
            throw Error(ErrorCode::ConfigError, "concept " + c.concept_id + " has unknown category " + c.category_id);
        }
        std::vector<std::vector<std::string>> tokens;
        for (const auto& t : c.terms) tokens.push_back(split_ws(normalize_words(t)));
        term_tokens_.push_back(std::move(tokens));
    }
}

const Concept* Ontology::find(std::string_view concept_id) const {
    const auto it = std::lower_bound(concepts_.begin(), concepts_.end(), concept_id,
                                     [](const Concept& c, std::string_view id) { return c.concept_id < id; });
    return (it != concepts_.end() && it->concept_id == concept_id) ? &*it : nullptr;
}

Ontology parse_ontology(const std::string& json_text, AbbreviationTable abbreviations) {
    std::vector<Category> categories;
    std::vector<Concept> concepts;
    try {
        const auto doc = json::parse(json_text);
        if (doc.value("schema", "") != "ontology-v1") {
            throw Error(ErrorCode::ConfigError, "ontology schema must be 'ontology-v1'");
        }
        for (const auto& j : doc.at("categories")) {
            categories.push_back({j.at("id").get<std::string>(), j.value("label", "")});
        }
        for (const auto& j : doc.at("concepts")) {
            concepts.push_back({j.at("id").get<std::string>(), j.at("category").get<std::string>(),
                                j.value("label", ""), j.at("terms").get<std::vector<std::string>>()});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed ontology: ") + e.what());
    }
    return Ontology(std::move(categories), std::move(concepts), std::move(abbreviations));
}

Ontology load_ontology(const std::string& path, AbbreviationTable abbreviations) {
    return parse_ontology(read_file(path), std::move(abbreviations));
}

std::string ontology_to_json(const Ontology& o) {
    json cats = json::array();
    for (const auto& c : o.categories()) cats.push_back({{"id", c.category_id}, {"label", c.label}});
    json concepts = json::array();
    for (const auto& c : o.concepts()) {
        concepts.push_back({{"id", c.concept_id}, {"category", c.category_id}, {"label", c.label}, {"terms", c.terms}});
    }
    return json{{"schema", "ontology-v1"}, {"categories", cats}, {"concepts", concepts}}.dump(2);
}

// ---------------------------------------------------------------------------
// Matching

std::vector<std::string> label_tokens(std::string_view label, const AbbreviationTable& abbreviations) {
    std::vector<std::string> out;
    for (const auto& tok : split_ws(normalize_words(label))) {
        if (std::all_of(tok.begin(), tok.end(), [](unsigned char c) { return std::isdigit(c) != 0; })) continue;
        const auto it = abbreviations.find(tok);
        if (it == abbreviations.end()) {
            out.push_back(tok);
        } else {
            for (auto& t : split_ws(it->second)) out.push_back(std::move(t));
        }
    }
    return out;
}

double token_set_similarity(const std::vector<std::string>& label, const std::vector<std::string>& term) {
    if (label.empty() || term.empty()) return 0.0;
    double total = 0.0;
    for (const auto& a : label) {
        const BigramBag bag(a);
        double best = 0.0;
        for (const auto& b : term) best = std::max(best, bag.dice(BigramBag(b)));
        total += best;
    }
    return total / static_cast<double>(label.size());
}

MatchResult match_concept(std::string_view label, const Ontology& ontology, double threshold) {
    const auto tokens = label_tokens(label, ontology.abbreviations());
    MatchResult best;
    if (tokens.empty()) return best;
    for (std::size_t i = 0; i < ontology.concepts().size(); ++i) {
        double score = 0.0;
        for (const auto& term : ontology.term_tokens(i)) score = std::max(score, token_set_similarity(tokens, term));
        // concepts are ordered by id, so keeping the first maximum breaks ties
        if (best.concept_id.empty() || score > best.score) {
            best.concept_id = ontology.concepts()[i].concept_id;
            best.score = score;
        }
    }
    best.matched = best.score >= threshold;
    return best;
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

std::string read_region(const OcrBackend& ocr, const GrayImage& img, const PixelRect& box) {
    std::string out;
    for (const auto& line : ocr.recognize(img, box.to_bbox())) {
        if (!out.empty()) out += ' ';
        out += line.text;
    }
    return trim(out);
}

int vertical_overlap(const PixelRect& a, const PixelRect& b) {
    return std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
}

}  // namespace

ExtractionReport extract_products(const Layout& layout, const GrayImage& receipt, const OcrBackend& ocr,
                                  const Ontology& ontology, double threshold) {
    ExtractionReport report;
    const auto accept = [&](int block, const std::string& text) {
        ExtractedProduct item;
        item.block = block;
        item.text = text;
        try {
            item.line = parse_product_line(text);
        } catch (const Error& e) {
            report.skipped.push_back({block, text, "grammar"});
            return;
        }
        if (is_stop_line(item.line.label)) {
            report.excluded.push_back(std::move(item));
            return;
        }
        item.match = match_concept(item.line.label, ontology, threshold);
        report.products.push_back(std::move(item));
    };

    for (const int band : layout.of_kind(BlockKind::Band)) {
        auto subs = layout.children(band);
        std::sort(subs.begin(), subs.end(), [&](int a, int b) {
            return layout.blocks[static_cast<std::size_t>(a)].box.x < layout.blocks[static_cast<std::size_t>(b)].box.x;
        });
        if (subs.size() < 2) {
            for (const int sub : subs) {
                for (const int line : layout.children(sub)) {
                    const std::string text = read_region(ocr, receipt, layout.blocks[static_cast<std::size_t>(line)].box);
                    if (match_product_line(text)) accept(line, text);
                }
            }
            continue;
        }
        const auto price_lines = layout.children(subs.back());
        std::vector<int> label_lines;
        for (std::size_t s = 0; s + 1 < subs.size(); ++s) {
            for (const int line : layout.children(subs[s])) label_lines.push_back(line);
        }
        std::stable_sort(label_lines.begin(), label_lines.end(), [&](int a, int b) {
            return layout.blocks[static_cast<std::size_t>(a)].box.y < layout.blocks[static_cast<std::size_t>(b)].box.y;
        });
        for (const int line : label_lines) {
            const PixelRect& lbox = layout.blocks[static_cast<std::size_t>(line)].box;
            int best = -1, best_overlap = 0;
            for (const int p : price_lines) {
                const int ov = vertical_overlap(lbox, layout.blocks[static_cast<std::size_t>(p)].box);
                if (ov > best_overlap) {
                    best = p;
                    best_overlap = ov;
                }
            }
            const std::string label = read_region(ocr, receipt, lbox);
            const std::string price =
                best < 0 ? std::string()
                         : repair_numeric(read_region(ocr, receipt, layout.blocks[static_cast<std::size_t>(best)].box),
                                          RepairContext::PriceColumn);
            if (label.empty() && price.empty()) continue;
            if (price.empty()) {
                report.skipped.push_back({line, label, "no_price"});
                continue;
            }
            accept(line, label + "  " + price);
        }
    }
    return report;
}

}  // namespace receiptforge

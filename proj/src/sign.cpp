#include "receiptforge/sign.hpp"

#include "receiptforge/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace receiptforge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Normalization

namespace {

// Base letters for U+00C0..U+00FF; empty for the two symbols in the block.
constexpr const char* kLatin1Fold[64] = {
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
    "D", "N", "O", "O", "O", "O", "O", "",  "O", "U", "U", "U", "U", "Y", "TH", "SS",
    "A", "A", "A", "A", "A", "A", "AE", "C", "E", "E", "E", "E", "I", "I", "I", "I",
    "D", "N", "O", "O", "O", "O", "O", "",  "O", "U", "U", "U", "U", "Y", "TH", "Y",
};

// Decodes one UTF-8 sequence at `i`, advancing it. Malformed bytes decode
// to U+FFFD and advance by one.
char32_t next_codepoint(std::string_view s, std::size_t& i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return 0xFFFD;
    }
    if (i + static_cast<std::size_t>(len) > s.size()) {
        ++i;
        return 0xFFFD;
    }
    for (int k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
        if ((b & 0xC0) != 0x80) {
            ++i;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

// Folded [A-Z0-9] text for one code point; empty when it is not alphanumeric.
std::string fold(char32_t cp) {
    if (cp < 0x80) {
        const auto c = static_cast<unsigned char>(cp);
        if (std::isalnum(c)) return std::string(1, static_cast<char>(std::toupper(c)));
        return {};
    }
    if (cp >= 0xC0 && cp <= 0xFF) return kLatin1Fold[cp - 0xC0];
    if (cp == 0x152 || cp == 0x153) return "OE";
    return {};
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size();) out += fold(next_codepoint(text, i));
    return out;
}

std::string normalize_words(std::string_view text) {
    std::string out;
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size();) {
        const std::string f = fold(next_codepoint(text, i));
        if (f.empty()) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out += ' ';
        pending_space = false;
        out += f;
    }
    return out;
}

BigramBag::BigramBag(std::string_view s) : text_(s) {
    if (s.size() >= 2) {
        codes_.reserve(s.size() - 1);
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            codes_.push_back(static_cast<std::uint16_t>((static_cast<unsigned char>(s[i]) << 8) |
                                                        static_cast<unsigned char>(s[i + 1])));
        }
        std::sort(codes_.begin(), codes_.end());
    }
}

double BigramBag::dice(const BigramBag& other) const {
    if (codes_.empty() || other.codes_.empty()) {
        return text_ == other.text_ ? 1.0 : 0.0;
    }
    std::size_t i = 0, j = 0, shared = 0;
    while (i < codes_.size() && j < other.codes_.size()) {
        if (codes_[i] == other.codes_[j]) {
            ++shared;
            ++i;
            ++j;
        } else if (codes_[i] < other.codes_[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return 2.0 * static_cast<double>(shared) / static_cast<double>(codes_.size() + other.codes_.size());
}

double bigram_dice(std::string_view a, std::string_view b) { return BigramBag(a).dice(BigramBag(b)); }

// ---------------------------------------------------------------------------
// Store database

namespace {

bool is_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace

StoreDb::StoreDb(std::vector<StoreRecord> stores) : stores_(std::move(stores)) {
    std::set<std::string> ids;
    std::map<std::string, std::string> phrase_owner;
    for (const auto& s : stores_) {
        if (s.store_id.empty() || !ids.insert(s.store_id).second) {
            throw Error(ErrorCode::ConfigError, "store ids must be non-empty and unique: '" + s.store_id + "'");
        }
        if (s.name_variants.empty()) {
            throw Error(ErrorCode::ConfigError, "store " + s.store_id + " has no name variants");
        }
        for (const auto& p : s.phone_numbers) {
            if (!is_digits(p) || p.size() < 6 || p.size() > 15) {
                throw Error(ErrorCode::ConfigError, "store " + s.store_id + " phone '" + p + "' is not 6-15 digits");
            }
        }
        for (const auto& t : s.terminology) {
            const std::string key = normalize_text(t);
            const auto [it, fresh] = phrase_owner.emplace(key, s.store_id);
            if (!fresh && it->second != s.store_id) {
                throw Error(ErrorCode::ConfigError,
                            "terminology '" + t + "' is shared by " + it->second + " and " + s.store_id);
            }
        }
        for (const double f : s.layout_priors) {
            if (!(f > 0.0 && f < 1.0)) {
                throw Error(ErrorCode::ConfigError, "store " + s.store_id + " layout prior outside (0, 1)");
            }
        }
    }
}

const StoreRecord* StoreDb::find(std::string_view store_id) const {
    const auto it = std::find_if(stores_.begin(), stores_.end(), [&](const auto& s) { return s.store_id == store_id; });
    return it == stores_.end() ? nullptr : &*it;
}

StoreDb parse_store_db(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("store database is not valid JSON: ") + e.what());
    }
    if (!doc.is_object() || doc.value("schema", "") != "storedb-v1" || !doc.contains("stores") ||
        !doc["stores"].is_array()) {
        throw Error(ErrorCode::ConfigError, "store database must be {\"schema\":\"storedb-v1\",\"stores\":[...]}");
    }
    std::vector<StoreRecord> stores;
    try {
        for (const auto& j : doc["stores"]) {
            StoreRecord s;
            s.store_id = j.at("store_id").get<std::string>();
            s.display_name = j.value("display_name", s.store_id);
            s.name_variants = j.at("name_variants").get<std::vector<std::string>>();
            s.phone_numbers = j.value("phone_numbers", std::vector<std::string>{});
            s.terminology = j.value("terminology", std::vector<std::string>{});
            const std::string aspect = j.value("logo_aspect", "long");
            if (aspect != "long" && aspect != "short") {
                throw Error(ErrorCode::ConfigError, "logo_aspect must be 'long' or 'short'");
            }
            s.logo_aspect = aspect == "long" ? LogoAspect::Long : LogoAspect::Short;
            s.layout_priors = j.value("layout_priors", std::vector<double>{});
            stores.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed store record: ") + e.what());
    }
    return StoreDb(std::move(stores));
}

StoreDb load_store_db(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot open store database " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_store_db(buf.str());
}

std::string store_db_to_json(const StoreDb& db) {
    json stores = json::array();
    for (const auto& s : db.stores()) {
        stores.push_back({{"store_id", s.store_id},
                          {"display_name", s.display_name},
                          {"name_variants", s.name_variants},
                          {"phone_numbers", s.phone_numbers},
                          {"terminology", s.terminology},
                          {"logo_aspect", s.logo_aspect == LogoAspect::Long ? "long" : "short"},
                          {"layout_priors", s.layout_priors}});
    }
    return json{{"schema", "storedb-v1"}, {"stores", stores}}.dump(2);
}

// ---------------------------------------------------------------------------
// Text criteria

namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        lines.emplace_back(text.substr(start, end - start));
        if (end == text.size()) break;
        start = end + 1;
    }
    return lines;
}

// Best dice of `needle` over windows of `line` whose length lies in
// [lo, hi]; a line shorter than `lo` is compared whole.
double best_window(const std::string& line, const BigramBag& needle, std::size_t lo, std::size_t hi) {
    if (line.empty()) return 0.0;
    if (line.size() < lo) return needle.dice(BigramBag(line));
    double best = 0.0;
    for (std::size_t len = lo; len <= hi && len <= line.size(); ++len) {
        for (std::size_t pos = 0; pos + len <= line.size(); ++pos) {
            best = std::max(best, needle.dice(BigramBag(std::string_view(line).substr(pos, len))));
        }
    }
    return best;
}

constexpr double kTie = 1e-12;

}  // namespace

NameCriterion criterion_name(std::string_view text, const StoreDb& db, const SignTextConfig& cfg) {
    std::vector<std::string> lines;
    for (const auto& l : split_lines(text)) {
        auto n = normalize_text(l);
        if (!n.empty()) lines.push_back(std::move(n));
    }
    NameCriterion out;
    for (const auto& store : db.stores()) {
        double score = 0.0;
        for (const auto& variant : store.name_variants) {
            const std::string v = normalize_text(variant);
            if (v.empty()) continue;
            const BigramBag bag(v);
            const std::size_t slack = static_cast<std::size_t>(cfg.name_window_slack);
            const std::size_t lo = v.size() > slack ? v.size() - slack : 1;
            for (const auto& line : lines) {
                score = std::max(score, best_window(line, bag, lo, v.size() + slack));
            }
        }
        if (score < cfg.name_threshold) continue;
        if (score > out.score + kTie) {
            out.stores = {store.store_id};
            out.score = score;
        } else if (std::abs(score - out.score) <= kTie) {
            out.stores.push_back(store.store_id);
        }
    }
    return out;
}

std::vector<std::string> extract_phone_numbers(std::string_view text) {
    const auto looks_digit = [](char c) {
        return std::isdigit(static_cast<unsigned char>(c)) || c == 'O' || c == 'o' || c == 'I' || c == 'l' ||
               c == 'S' || c == 'B';
    };
    const auto separator = [](char c) {
        return c == ' ' || c == '.' || c == '-' || c == '/' || c == '(' || c == ')';
    };
    std::vector<std::string> out;
    for (const auto& line : split_lines(text)) {
        std::size_t i = 0;
        while (i < line.size()) {
            const bool plus = line[i] == '+' || line[i] == '(';
            if (!looks_digit(line[i]) && !(plus && i + 1 < line.size() && looks_digit(line[i + 1]))) {
                ++i;
                continue;
            }
            std::size_t j = plus ? i + 1 : i;
            while (j < line.size() && (looks_digit(line[j]) || separator(line[j]))) ++j;
            std::string digits;
            int genuine = 0, alnum = 0;
            for (std::size_t k = i; k < j; ++k) {
                const char c = line[k];
                if (!looks_digit(c)) continue;
                ++alnum;
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    ++genuine;
                    digits += c;
                } else {
                    digits += (c == 'O' || c == 'o') ? '0' : (c == 'I' || c == 'l') ? '1' : (c == 'S') ? '5' : '8';
                }
            }
            if (2 * genuine > alnum && digits.size() >= 6 && digits.size() <= 15) out.push_back(digits);
            i = std::max(j, i + 1);
        }
    }
    return out;
}

std::vector<std::string> criterion_phone(std::string_view text, const StoreDb& db) {
    std::vector<std::string> out;
    const auto numbers = extract_phone_numbers(text);
    for (const auto& store : db.stores()) {
        const bool hit = std::any_of(numbers.begin(), numbers.end(), [&](const std::string& n) {
            return std::find(store.phone_numbers.begin(), store.phone_numbers.end(), n) != store.phone_numbers.end();
        });
        if (hit) out.push_back(store.store_id);
    }
    return out;
}

std::vector<std::string> criterion_terminology(std::string_view text, const StoreDb& db, const SignTextConfig& cfg) {
    std::vector<std::string> lines;
    for (const auto& l : split_lines(text)) {
        auto n = normalize_text(l);
        if (!n.empty()) lines.push_back(std::move(n));
    }
    std::vector<std::string> out;
    for (const auto& store : db.stores()) {
        bool hit = false;
        for (const auto& phrase : store.terminology) {
            const std::string p = normalize_text(phrase);
            if (p.empty()) continue;
            const BigramBag bag(p);
            for (const auto& line : lines) {
                if (best_window(line, bag, p.size(), p.size()) >= cfg.terminology_threshold) {
                    hit = true;
                    break;
                }
            }
            if (hit) break;
        }
        if (hit) out.push_back(store.store_id);
    }
    return out;
}

SignEvidence aggregate_text_evidence(const std::vector<std::string>& by_name, const std::vector<std::string>& by_phone,
                                     const std::vector<std::string>& by_terminology) {
    std::map<std::string, int> weights;
    for (const auto* criterion : {&by_name, &by_phone, &by_terminology}) {
        const std::set<std::string> distinct(criterion->begin(), criterion->end());
        for (const auto& s : distinct) ++weights[s];
    }
    SignEvidence ev;
    for (const auto& [id, w] : weights) ev.push_back({id, w});
    std::stable_sort(ev.begin(), ev.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
    return ev;
}

SignEvidence text_evidence(std::string_view text, const StoreDb& db, const SignTextConfig& cfg) {
    return aggregate_text_evidence(criterion_name(text, db, cfg).stores, criterion_phone(text, db),
                                   criterion_terminology(text, db, cfg));
}

// ---------------------------------------------------------------------------
// Logo

namespace {

constexpr int kMinCandidateSide = 8;

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

RefinedLogo refine_logo_crop(const GrayImage& crop_img, const ClassifierBackend& cls) {
    std::vector<PixelRect> candidates;
    const BinaryMask mask = adaptive_binarize(crop_img);
    const PixelRect full{0, 0, crop_img.width(), crop_img.height()};
    const auto rows = horizontal_bands(mask, crop_img.height() + 1, full);
    if (!rows.empty()) {
        // ink-tight box of the whole crop
        const PixelRect strip{0, rows.front().first, full.w, rows.back().last - rows.front().first + 1};
        const auto cols = column_runs(mask, full.w + 1, strip);
        if (!cols.empty()) {
            candidates.push_back({cols.front().first, strip.y, cols.back().last - cols.front().first + 1, strip.h});
        }
        const Layout layout = segment_layout(mask);
        for (const auto& b : layout.blocks) {
            if (b.kind != BlockKind::Line) candidates.push_back(b.box);
        }
    }

    const auto& labels = cls.spec().class_labels;
    RefinedLogo best;
    best.probabilities = cls.classify(crop_img);
    best.store_id = labels[argmax(best.probabilities)];
    best.probability = best.probabilities[argmax(best.probabilities)];
    for (const auto& c : candidates) {
        if (c.w < kMinCandidateSide || c.h < kMinCandidateSide || c == full) continue;
        auto probs = cls.classify(crop(crop_img, c.to_bbox()));
        const std::size_t k = argmax(probs);
        if (probs[k] > best.probability) {
            best.store_id = labels[k];
            best.probability = probs[k];
            best.probabilities = std::move(probs);
        }
    }
    return best;
}

std::optional<LogoResult> locate_logo(const GrayImage& receipt, const SegmentationBackend& seg,
                                      const ClassifierBackend& cls, const LogoConfig& cfg) {
    const int n = seg.spec().input_size;
    const int width = receipt.width();
    const int upper_h = std::max(1, receipt.height() / 2);
    const int lower_h = receipt.height() - upper_h;
    const auto& labels = cls.spec().class_labels;

    for (const bool lower : {false, true}) {
        if (lower && lower_h < 1) break;
        const GrayImage half = lower ? flip180(crop(receipt, {0.0, double(upper_h), double(width), double(lower_h)}))
                                     : crop(receipt, {0.0, 0.0, double(width), double(upper_h)});
        for (const LogoAspect aspect : {LogoAspect::Long, LogoAspect::Short}) {
            const double ratio = aspect == LogoAspect::Long ? cfg.long_aspect : cfg.short_aspect;
            const double sx = static_cast<double>(n) / width;
            const double sy = ratio * sx;
            const int rh = std::max(1, static_cast<int>(std::lround(half.height() * sy)));
            GrayImage scaled = resize(half, n, rh);
            if (scaled.height() < n) scaled = pad_to(scaled, n, n, 0, 0, 255);

            const HeatMap hm = infer_heatmap(scaled, seg);
            const auto logo_cls = hm.class_index(cfg.logo_class);
            if (!logo_cls) {
                throw Error(ErrorCode::ClassMismatch, "logo segmentation has no '" + cfg.logo_class + "' class");
            }
            std::optional<BBox> best_window;
            double best_prob = -1.0;
            for (int i = 0; i < hm.grid_h(); ++i) {
                for (int j = 0; j < hm.grid_w(); ++j) {
                    if (hm.score(i, j, *logo_cls) < cfg.logo_threshold) continue;
                    const BBox win = hm.window(i, j);
                    const auto probs = cls.classify(crop(scaled, win));
                    const double p = probs[argmax(probs)];
                    if (p > best_prob) {
                        best_prob = p;
                        best_window = win;
                    }
                }
            }
            if (!best_window) continue;

            const RefinedLogo refined = refine_logo_crop(crop(scaled, *best_window), cls);
            LogoResult result;
            result.store_id = refined.store_id;
            result.probability = refined.probability;
            result.used_ratio = aspect;
            result.orientation = lower ? Orientation::Inverted : Orientation::Upright;
            for (std::size_t k = 0; k < labels.size(); ++k) result.ranking.emplace_back(labels[k], refined.probabilities[k]);
            std::stable_sort(result.ranking.begin(), result.ranking.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });

            BBox box = clamp_to({best_window->x / sx, best_window->y / sy, n / sx, n / sy}, half.width(), half.height());
            if (lower) {
                box = {width - box.right(), upper_h + (lower_h - box.bottom()), box.w, box.h};
            }
            result.box = box;
            return result;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Fusion

std::string_view to_string(SignBasis basis) {
    return basis == SignBasis::TextUnanimous ? "text_unanimous" : "text2_plus_logo";
}

SignDecision fuse_sign(const SignEvidence& evidence, const std::optional<std::string>& logo_store) {
    SignDecision d;
    d.evidence = evidence;
    d.logo_store = logo_store;
    // Unanimity needs a single store named by all three criteria.
    const auto unanimous = std::count_if(evidence.begin(), evidence.end(), [](const auto& e) { return e.weight >= 3; });
    if (unanimous == 1) {
        d.accepted = true;
        d.store_id = std::find_if(evidence.begin(), evidence.end(), [](const auto& e) { return e.weight >= 3; })->store_id;
        d.basis = SignBasis::TextUnanimous;
        return d;
    }
    if (logo_store) {
        for (const auto& e : evidence) {
            if (e.store_id == *logo_store && e.weight >= 2) {
                d.accepted = true;
                d.store_id = e.store_id;
                d.basis = SignBasis::Text2PlusLogo;
                return d;
            }
        }
    }
    return d;
}

SignDecision fuse_sign(const SignEvidence& evidence, const std::optional<LogoResult>& logo) {
    return fuse_sign(evidence, logo ? std::optional<std::string>(logo->store_id) : std::nullopt);
}

}  // namespace receiptforge

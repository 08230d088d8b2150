#include "receiptforge/pipeline.hpp"

#include "receiptforge/error.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace receiptforge {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
    detection.validate();
    crop.validate();
    layout.binarize.validate();
    if (heat_input < 1 || heat_stride < 1 || logo_stride < 1) {
        throw Error(ErrorCode::ConfigError, "window sizes and strides must be positive");
    }
    if (!(logo_fill > 0.0 && logo_fill <= 1.0) || !(logo_temperature > 0.0)) {
        throw Error(ErrorCode::ConfigError, "logo fill must lie in (0, 1] and temperature be positive");
    }
    if (!(match_threshold >= 0.0 && match_threshold <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "match threshold must lie in [0, 1]");
    }
    if (!(logo.long_aspect > 0.0 && logo.short_aspect > 0.0)) {
        throw Error(ErrorCode::ConfigError, "logo aspects must be positive");
    }
}

namespace {

using Setter = std::function<void(const json&)>;

template <typename T>
Setter set(T& field) {
    return [&field](const json& v) { field = v.get<T>(); };
}

void read_section(const json& doc, const std::string& name, const std::map<std::string, Setter>& setters) {
    if (!doc.contains(name)) return;
    const json& section = doc.at(name);
    if (!section.is_object()) throw Error(ErrorCode::ConfigError, "config section '" + name + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + name + "." + key + "'");
        try {
            it->second(value);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError, "bad value for '" + name + "." + key + "': " + e.what());
        }
    }
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    static const std::set<std::string> sections = {"detection", "crop", "sign", "logo", "layout", "heatmap", "semantics"};
    for (const auto& [key, value] : doc.items()) {
        if (!sections.count(key)) throw Error(ErrorCode::ConfigError, "unknown config section '" + key + "'");
    }
    PipelineConfig c;
    read_section(doc, "detection",
                 {{"heat_threshold", set(c.detection.heat_threshold)},
                  {"receipt_ratio", set(c.detection.receipt_ratio)},
                  {"target_class", set(c.detection.target_class)}});
    read_section(doc, "crop",
                 {{"margin", set(c.crop.margin)},
                  {"strip_width", set(c.crop.strip_width)},
                  {"min_contrast", set(c.crop.min_contrast)},
                  {"max_angle_deg", set(c.crop.max_angle_deg)},
                  {"min_support", set(c.crop.min_support)},
                  {"scan_step", set(c.crop.scan_step)}});
    read_section(doc, "sign",
                 {{"name_threshold", set(c.sign_text.name_threshold)},
                  {"name_window_slack", set(c.sign_text.name_window_slack)},
                  {"terminology_threshold", set(c.sign_text.terminology_threshold)}});
    read_section(doc, "logo",
                 {{"long_aspect", set(c.logo.long_aspect)},
                  {"short_aspect", set(c.logo.short_aspect)},
                  {"logo_threshold", set(c.logo.logo_threshold)},
                  {"logo_class", set(c.logo.logo_class)},
                  {"stride", set(c.logo_stride)},
                  {"fill", set(c.logo_fill)},
                  {"temperature", set(c.logo_temperature)}});
    read_section(doc, "layout",
                 {{"window", set(c.layout.binarize.window)},
                  {"k", set(c.layout.binarize.k)},
                  {"dynamic_range", set(c.layout.binarize.dynamic_range)},
                  {"band_gap_factor", set(c.layout.band_gap_factor)},
                  {"line_gap_factor", set(c.layout.line_gap_factor)},
                  {"char_gap_factor", set(c.layout.char_gap_factor)},
                  {"col_gap_line_factor", set(c.layout.col_gap_line_factor)},
                  {"prior_tolerance", set(c.layout.prior_tolerance)}});
    read_section(doc, "heatmap",
                 {{"input_size", set(c.heat_input)},
                  {"stride", set(c.heat_stride)},
                  {"alpha", set(c.heuristic.alpha)},
                  {"beta", set(c.heuristic.beta)},
                  {"bright_level", set(c.heuristic.bright_level)},
                  {"dark_level", set(c.heuristic.dark_level)},
                  {"min_dark_per_row", set(c.heuristic.min_dark_per_row)},
                  {"ink_row_offset", set(c.heuristic.ink_row_offset)}});
    read_section(doc, "semantics", {{"match_threshold", set(c.match_threshold)}});
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_pipeline_config(buf.str());
}

json pipeline_config_to_json(const PipelineConfig& c) {
    return {{"detection",
             {{"heat_threshold", c.detection.heat_threshold},
              {"receipt_ratio", c.detection.receipt_ratio},
              {"target_class", c.detection.target_class}}},
            {"crop",
             {{"margin", c.crop.margin},
              {"strip_width", c.crop.strip_width},
              {"min_contrast", c.crop.min_contrast},
              {"max_angle_deg", c.crop.max_angle_deg},
              {"min_support", c.crop.min_support},
              {"scan_step", c.crop.scan_step}}},
            {"sign",
             {{"name_threshold", c.sign_text.name_threshold},
              {"name_window_slack", c.sign_text.name_window_slack},
              {"terminology_threshold", c.sign_text.terminology_threshold}}},
            {"logo",
             {{"long_aspect", c.logo.long_aspect},
              {"short_aspect", c.logo.short_aspect},
              {"logo_threshold", c.logo.logo_threshold},
              {"logo_class", c.logo.logo_class},
              {"stride", c.logo_stride},
              {"fill", c.logo_fill},
              {"temperature", c.logo_temperature}}},
            {"layout",
             {{"window", c.layout.binarize.window},
              {"k", c.layout.binarize.k},
              {"dynamic_range", c.layout.binarize.dynamic_range},
              {"band_gap_factor", c.layout.band_gap_factor},
              {"line_gap_factor", c.layout.line_gap_factor},
              {"char_gap_factor", c.layout.char_gap_factor},
              {"col_gap_line_factor", c.layout.col_gap_line_factor},
              {"prior_tolerance", c.layout.prior_tolerance}}},
            {"heatmap",
             {{"input_size", c.heat_input},
              {"stride", c.heat_stride},
              {"alpha", c.heuristic.alpha},
              {"beta", c.heuristic.beta},
              {"bright_level", c.heuristic.bright_level},
              {"dark_level", c.heuristic.dark_level},
              {"min_dark_per_row", c.heuristic.min_dark_per_row},
              {"ink_row_offset", c.heuristic.ink_row_offset}}},
            {"semantics", {{"match_threshold", c.match_threshold}}}};
}

// ---------------------------------------------------------------------------
// Running

int PipelineReport::exit_code() const {
    if (!verdict.fused) return 2;
    return sign && sign->accepted ? 0 : 3;
}

PipelineReport run_pipeline(const GrayImage& image, std::string_view page_text, const PipelineResources& res,
                            const PipelineConfig& cfg) {
    if (!res.heat) throw Error(ErrorCode::ConfigError, "pipeline needs a receipt heat-map backend");
    PipelineReport report;
    const HeatMap hm = infer_heatmap(image, *res.heat);
    report.verdict = detect_receipt(page_text, hm, cfg.detection);
    if (!report.verdict.fused) return report;

    const auto stage = [&](const char* name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            report.errors.push_back({name, e.what()});
        }
    };

    stage("crop", [&] { report.crop = crop_receipt(image, hm, cfg.detection, cfg.crop); });
    if (!report.crop) return report;
    const GrayImage& rectified = report.crop->rectified;

    if (res.logo_segmenter && res.logo_classifier) {
        stage("logo", [&] { report.logo = locate_logo(rectified, *res.logo_segmenter, *res.logo_classifier, cfg.logo); });
    }
    if (res.stores) {
        stage("sign", [&] { report.sign = fuse_sign(text_evidence(page_text, *res.stores, cfg.sign_text), report.logo); });
    }

    const bool inverted = report.logo && report.logo->orientation == Orientation::Inverted;
    const GrayImage oriented = inverted ? flip180(rectified) : rectified;
    std::vector<double> priors;
    if (report.sign && report.sign->accepted && res.stores) {
        if (const auto* store = res.stores->find(report.sign->store_id)) priors = store->layout_priors;
    }
    stage("layout", [&] { report.layout = segment_layout(oriented, cfg.layout, priors); });
    if (report.layout && res.ocr && res.ontology) {
        stage("semantics", [&] {
            report.extraction = extract_products(*report.layout, oriented, *res.ocr, *res.ontology, cfg.match_threshold);
        });
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const DetectionVerdict& v) {
    return {{"text_hit", v.text_hit},
            {"image_hit", v.image_hit},
            {"fused", v.fused},
            {"positive_ratio", v.positive_ratio},
            {"product_line_count", v.product_line_count}};
}

json to_json(const BBox& b) { return json::array({b.x, b.y, b.w, b.h}); }

json to_json(const Quad& q) {
    json out = json::array();
    for (const auto& p : q.corners) out.push_back({p.x, p.y});
    return out;
}

json to_json(const SignDecision& d) {
    json ev = json::array();
    for (const auto& e : d.evidence) ev.push_back({{"store_id", e.store_id}, {"weight", e.weight}});
    json out{{"accepted", d.accepted}, {"evidence", ev}, {"logo_store", d.logo_store ? json(*d.logo_store) : json()}};
    if (d.accepted) {
        out["store_id"] = d.store_id;
        out["basis"] = std::string(to_string(d.basis));
    } else {
        out["outcome"] = "needs_review";
    }
    return out;
}

json to_json(const LogoResult& l) {
    json ranking = json::array();
    for (const auto& [id, p] : l.ranking) ranking.push_back({{"store_id", id}, {"probability", p}});
    return {{"box", to_json(l.box)},
            {"store_id", l.store_id},
            {"probability", l.probability},
            {"orientation", l.orientation == Orientation::Upright ? "upright" : "inverted"},
            {"aspect", l.used_ratio == LogoAspect::Long ? "long" : "short"},
            {"ranking", ranking}};
}

json to_json(const Layout& l) {
    json blocks = json::array();
    for (std::size_t i = 0; i < l.blocks.size(); ++i) {
        const auto& b = l.blocks[i];
        blocks.push_back({{"index", i},
                          {"kind", std::string(to_string(b.kind))},
                          {"parent", b.parent},
                          {"box", {b.box.x, b.box.y, b.box.w, b.box.h}}});
    }
    return {{"line_height", l.line_height}, {"band_gap", l.band_gap}, {"column_gap", l.column_gap}, {"blocks", blocks}};
}

json to_json(const ProductLine& p) {
    return {{"label", p.label},
            {"quantity", p.quantity},
            {"unit_price", p.unit_price ? json(*p.unit_price) : json()},
            {"line_price", p.line_price},
            {"currency", std::string(to_string(p.currency))}};
}

json to_json(const MatchResult& m) {
    json out{{"matched", m.matched}, {"score", m.score}};
    if (m.matched) {
        out["concept_id"] = m.concept_id;
    } else if (!m.concept_id.empty()) {
        out["best_concept_id"] = m.concept_id;
    }
    return out;
}

json report_to_json(const PipelineReport& r, bool debug) {
    json out{{"receipt", r.verdict.fused}, {"detection", to_json(r.verdict)}};
    if (!r.verdict.fused) {
        out["status"] = "not_receipt";
        return out;
    }
    if (r.crop) {
        json crop{{"quad", to_json(r.crop->quad)}, {"skew_angle", r.crop->skew_angle}};
        if (r.crop->fallback) crop["fallback"] = *r.crop->fallback;
        if (debug) {
            crop["wide_box"] = to_json(r.crop->wide_box);
            crop["rectified_size"] = {r.crop->rectified.width(), r.crop->rectified.height()};
        }
        out["crop"] = crop;
    }
    if (r.sign) out["sign"] = to_json(*r.sign);
    out["orientation"] = r.logo && r.logo->orientation == Orientation::Inverted ? "inverted" : "upright";
    if (debug && r.logo) out["logo"] = to_json(*r.logo);
    if (debug && r.layout) out["layout"] = to_json(*r.layout);
    if (r.extraction) {
        json products = json::array();
        for (const auto& p : r.extraction->products) {
            products.push_back({{"block", p.block}, {"text", p.text}, {"line", to_json(p.line)}, {"match", to_json(p.match)}});
        }
        json skipped = json::array();
        for (const auto& s : r.extraction->skipped) {
            skipped.push_back({{"block", s.block}, {"text", s.text}, {"reason", s.reason}});
        }
        out["products"] = products;
        out["skipped"] = skipped;
        if (debug) {
            json excluded = json::array();
            for (const auto& p : r.extraction->excluded) excluded.push_back({{"block", p.block}, {"text", p.text}});
            out["excluded"] = excluded;
        }
    }
    json errors = json::array();
    for (const auto& e : r.errors) errors.push_back({{"stage", e.stage}, {"message", e.message}});
    out["errors"] = errors;
    out["status"] = r.exit_code() == 0 ? "accepted" : "needs_review";
    return out;
}

}  // namespace receiptforge

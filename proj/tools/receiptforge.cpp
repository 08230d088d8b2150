#include "receiptforge/error.hpp"
#include "receiptforge/eval.hpp"
#include "receiptforge/pipeline.hpp"
#include "receiptforge/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace rf = receiptforge;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool debug = false;
};

void emit(const json& j) { std::cout << j.dump() << '\n'; }

void log(const std::string& msg) { std::cerr << "receiptforge: " << msg << '\n'; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rf::Error(rf::ErrorCode::IoError, "cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

rf::PipelineConfig load_config(const Globals& g) {
    return g.config_path.empty() ? rf::PipelineConfig{} : rf::load_pipeline_config(g.config_path);
}

int exit_code_for(rf::ErrorCode code) {
    switch (code) {
    case rf::ErrorCode::ConfigError:
    case rf::ErrorCode::ClassMismatch: return 4;
    case rf::ErrorCode::IoError:
    case rf::ErrorCode::DecodeError:
    case rf::ErrorCode::OracleLoadError:
    case rf::ErrorCode::OracleShapeError:
    case rf::ErrorCode::AssetError: return 5;
    case rf::ErrorCode::EmptyCorpus: return 6;
    default: return 7;
    }
}

/// Heat-map backend: the sidecar when given, the heuristic otherwise.
std::unique_ptr<rf::SegmentationBackend> heat_backend(const std::string& heatmap, const rf::PipelineConfig& cfg) {
    if (!heatmap.empty()) return std::make_unique<rf::FileOracleBackend>(rf::file_oracle_backend(heatmap));
    return std::make_unique<rf::HeuristicReceiptBackend>(cfg.heat_input, cfg.heat_stride, cfg.heuristic);
}

std::string optional_text(const std::string& path) { return path.empty() ? std::string() : read_file(path); }

/// Store database, ontology and logo templates laid out as in a corpus
/// directory.
struct Assets {
    rf::StoreDb stores;
    std::optional<rf::Ontology> ontology;
    rf::TemplateSet logos;
};

Assets load_assets(const std::string& dir, int input) {
    Assets a;
    const fs::path root(dir);
    a.stores = rf::load_store_db((root / "stores.json").string());
    if (fs::exists(root / "ontology.json")) {
        rf::AbbreviationTable abbr;
        if (fs::exists(root / "abbreviations.tsv")) abbr = rf::load_abbreviations((root / "abbreviations.tsv").string());
        a.ontology = rf::load_ontology((root / "ontology.json").string(), std::move(abbr));
    }
    if (fs::exists(root / "logos")) a.logos = rf::load_templates((root / "logos").string(), input);
    return a;
}

std::string default_corpus_dir(std::uint64_t seed) {
    return (fs::temp_directory_path() / ("receiptforge-corpus-" + std::to_string(seed))).string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"receiptforge: receipt detection, cropping, store sign, layout and product extraction"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_path, "JSON configuration file");
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--debug", g.debug, "Include intermediate results");

    std::function<int()> run;

    // detect
    auto* detect = app.add_subcommand("detect", "Receipt / non-receipt decision");
    std::string d_image, d_text, d_heatmap;
    detect->add_option("image", d_image, "Input image (PGM/PPM)")->required();
    detect->add_option("--text", d_text, "Page OCR text file");
    detect->add_option("--heatmap", d_heatmap, "Heat-map sidecar instead of the heuristic backend");
    detect->callback([&] {
        run = [&] {
            const auto cfg = load_config(g);
            const auto img = rf::read_image(d_image);
            const auto backend = heat_backend(d_heatmap, cfg);
            const auto hm = rf::infer_heatmap(img, *backend);
            const auto v = rf::detect_receipt(optional_text(d_text), hm, cfg.detection);
            emit(rf::to_json(v));
            return v.fused ? 0 : 2;
        };
    });

    // crop
    auto* crop = app.add_subcommand("crop", "Localize and rectify the receipt");
    std::string c_image, c_heatmap, c_out, c_quad;
    std::optional<double> c_margin;
    bool c_edges_only = false;
    crop->add_option("image", c_image, "Input image")->required();
    crop->add_option("--heatmap", c_heatmap, "Heat-map sidecar");
    crop->add_option("--out", c_out, "Write the rectified receipt as PGM");
    crop->add_option("--margin", c_margin, "Wide-box dilation as a fraction of each side")->check(CLI::Range(0.0, 1.0));
    crop->add_option("--emit-quad", c_quad, "Write the receipt quadrilateral as JSON");
    crop->add_flag("--edges-only", c_edges_only, "Edge refinement over the whole frame");
    crop->callback([&] {
        run = [&] {
            auto cfg = load_config(g);
            if (c_margin) cfg.crop.margin = *c_margin;
            const auto img = rf::read_image(c_image);
            rf::CropResult r;
            if (c_edges_only) {
                r = rf::crop_edges_only(img, cfg.crop);
            } else {
                const auto backend = heat_backend(c_heatmap, cfg);
                r = rf::crop_receipt(img, rf::infer_heatmap(img, *backend), cfg.detection, cfg.crop);
            }
            if (!c_out.empty()) rf::write_pgm(r.rectified, c_out);
            if (!c_quad.empty()) {
                std::ofstream q(c_quad);
                if (!q) throw rf::Error(rf::ErrorCode::IoError, "cannot write " + c_quad);
                q << rf::to_json(r.quad).dump() << '\n';
            }
            json out{{"wide_box", rf::to_json(r.wide_box)},
                     {"quad", rf::to_json(r.quad)},
                     {"skew_angle", r.skew_angle},
                     {"size", {r.rectified.width(), r.rectified.height()}}};
            if (r.fallback) out["fallback"] = *r.fallback;
            emit(out);
            return 0;
        };
    });

    // sign
    auto* sign = app.add_subcommand("sign", "Store sign from page text and logo");
    std::string s_image, s_text, s_assets;
    sign->add_option("image", s_image, "Rectified receipt image (optional)");
    sign->add_option("--text", s_text, "Page OCR text file");
    sign->add_option("--assets", s_assets, "Directory with stores.json and logos/")->required();
    sign->callback([&] {
        run = [&] {
            const auto cfg = load_config(g);
            const auto assets = load_assets(s_assets, cfg.heat_input);
            const auto evidence = rf::text_evidence(optional_text(s_text), assets.stores, cfg.sign_text);
            std::optional<rf::LogoResult> logo;
            if (!s_image.empty() && !assets.logos.empty()) {
                const rf::TemplateLogoSegmenter seg(assets.logos, cfg.heat_input, cfg.logo_stride, cfg.logo_fill);
                const rf::TemplateLogoClassifier cls(assets.logos, cfg.heat_input, cfg.logo_temperature);
                logo = rf::locate_logo(rf::read_image(s_image), seg, cls, cfg.logo);
            }
            const auto d = rf::fuse_sign(evidence, logo);
            json out = rf::to_json(d);
            if (g.debug && logo) out["logo"] = rf::to_json(*logo);
            emit(out);
            return d.accepted ? 0 : 3;
        };
    });

    // layout
    auto* layout = app.add_subcommand("layout", "Block, band and line segmentation");
    std::string l_image, l_store, l_assets, l_out;
    layout->add_option("image", l_image, "Rectified receipt image")->required();
    layout->add_option("--store", l_store, "Store whose column priors apply")->needs(
        layout->add_option("--assets", l_assets, "Directory with stores.json"));
    layout->add_option("--out", l_out, "Write the blocks JSON to a file instead of stdout");
    layout->callback([&] {
        run = [&] {
            const auto cfg = load_config(g);
            std::vector<double> priors;
            if (!l_store.empty()) {
                const auto stores = rf::load_store_db((fs::path(l_assets) / "stores.json").string());
                const auto* rec = stores.find(l_store);
                if (!rec) throw rf::Error(rf::ErrorCode::AssetError, "unknown store " + l_store);
                priors = rec->layout_priors;
            }
            const json out = rf::to_json(rf::segment_layout(rf::read_image(l_image), cfg.layout, priors));
            if (l_out.empty()) {
                emit(out);
            } else {
                std::ofstream f(l_out);
                if (!f) throw rf::Error(rf::ErrorCode::IoError, "cannot write " + l_out);
                f << out.dump() << '\n';
            }
            return 0;
        };
    });

    // parse
    auto* parse = app.add_subcommand("parse", "Parse product lines and match them to concepts");
    std::vector<std::string> p_lines;
    std::string p_file, p_assets;
    parse->add_option("lines", p_lines, "Product lines");
    parse->add_option("--file", p_file, "File with one line per row");
    parse->add_option("--assets", p_assets, "Directory with ontology.json and abbreviations.tsv");
    parse->callback([&] {
        run = [&] {
            const auto cfg = load_config(g);
            std::optional<rf::Ontology> ontology;
            if (!p_assets.empty()) {
                const fs::path root(p_assets);
                rf::AbbreviationTable abbr;
                if (fs::exists(root / "abbreviations.tsv")) abbr = rf::load_abbreviations((root / "abbreviations.tsv").string());
                ontology = rf::load_ontology((root / "ontology.json").string(), std::move(abbr));
            }
            auto lines = p_lines;
            if (!p_file.empty()) {
                std::istringstream in(read_file(p_file));
                for (std::string l; std::getline(in, l);) lines.push_back(l);
            }
            int failures = 0;
            for (const auto& l : lines) {
                json out{{"input", l}};
                try {
                    const auto p = rf::parse_product_line(l);
                    out["product"] = rf::to_json(p);
                    out["stop_line"] = rf::is_stop_line(p.label);
                    if (ontology) out["match"] = rf::to_json(rf::match_concept(p.label, *ontology, cfg.match_threshold));
                } catch (const rf::Error& e) {
                    if (e.code() != rf::ErrorCode::NotAProductLine) throw;
                    out["error"] = std::string(rf::to_string(e.code()));
                    ++failures;
                }
                emit(out);
            }
            return failures ? 4 : 0;
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Write a synthetic corpus with ground truth");
    rf::CorpusConfig scfg;
    std::string s_dir;
    synth->add_option("dir", s_dir, "Output directory")->required();
    synth->add_option("--receipts", scfg.receipts, "Receipt samples");
    synth->add_option("--non-receipts", scfg.non_receipts, "Non-receipt samples");
    synth->add_option("--stores", scfg.stores, "Synthetic stores (1 to 10)");
    synth->add_option("--ocr-noise", scfg.ocr_noise, "Page text noise rate");
    synth->add_flag("--oracle-heatmaps", scfg.oracle_heatmaps, "Also write oracle heat-map sidecars");
    synth->callback([&] {
        run = [&] {
            if (g.seed) scfg.seed = *g.seed;
            scfg.jobs = g.jobs;
            rf::write_corpus(s_dir, scfg);
            emit({{"corpus", s_dir}, {"seed", scfg.seed}, {"receipts", scfg.receipts}, {"non_receipts", scfg.non_receipts}});
            return 0;
        };
    });

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a corpus, generating the default one when absent");
    std::string e_dir, e_backend = "heuristic";
    std::optional<double> e_noise;
    bool e_end_to_end = false;
    eval->add_option("dir", e_dir, "Corpus directory");
    eval->add_option("--backend", e_backend, "Heat-map backend: heuristic or oracle");
    eval->add_option("--association-noise", e_noise, "OCR noise rate for the association metric");
    eval->add_flag("--end-to-end", e_end_to_end, "Also run layout and extraction");
    eval->callback([&] {
        run = [&] {
            rf::EvalConfig ecfg;
            ecfg.pipeline = load_config(g);
            ecfg.backend = rf::parse_heat_backend(e_backend);
            ecfg.association_noise = e_noise;
            ecfg.jobs = g.jobs;
            ecfg.end_to_end = e_end_to_end;
            const std::uint64_t seed = g.seed.value_or(42);
            const std::string dir = e_dir.empty() ? default_corpus_dir(seed) : e_dir;
            if (!fs::exists(fs::path(dir) / "corpus.json")) {
                rf::CorpusConfig ccfg;
                ccfg.seed = seed;
                ccfg.jobs = g.jobs;
                ccfg.oracle_heatmaps = ecfg.backend == rf::HeatBackendKind::Oracle;
                log("generating corpus in " + dir);
                rf::write_corpus(dir, ccfg);
            }
            const auto report = rf::evaluate(dir, ecfg);
            if (g.seed && report.seed != *g.seed) {
                throw rf::Error(rf::ErrorCode::ConfigError, "corpus in " + dir + " was generated with another seed");
            }
            emit(rf::to_json(report));
            return 0;
        };
    });

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Run every stage on one image");
    std::string r_image, r_text, r_heatmap, r_assets, r_units;
    pipe->add_option("image", r_image, "Input image")->required();
    pipe->add_option("--text", r_text, "Page OCR text file");
    pipe->add_option("--heatmap", r_heatmap, "Heat-map sidecar");
    pipe->add_option("--assets", r_assets, "Directory with stores.json, ontology.json, abbreviations.tsv, logos/");
    pipe->add_option("--units", r_units, "Ground-truth JSON with OCR units, or a plain text file for the whole receipt");
    pipe->callback([&] {
        run = [&] {
            const auto cfg = load_config(g);
            const auto img = rf::read_image(r_image);
            const auto heat = heat_backend(r_heatmap, cfg);
            rf::PipelineResources res;
            res.heat = heat.get();
            std::optional<Assets> assets;
            std::unique_ptr<rf::TemplateLogoSegmenter> seg;
            std::unique_ptr<rf::TemplateLogoClassifier> cls;
            if (!r_assets.empty()) {
                assets = load_assets(r_assets, cfg.heat_input);
                res.stores = &assets->stores;
                if (assets->ontology) res.ontology = &*assets->ontology;
                if (!assets->logos.empty()) {
                    seg = std::make_unique<rf::TemplateLogoSegmenter>(assets->logos, cfg.heat_input, cfg.logo_stride, cfg.logo_fill);
                    cls = std::make_unique<rf::TemplateLogoClassifier>(assets->logos, cfg.heat_input, cfg.logo_temperature);
                    res.logo_segmenter = seg.get();
                    res.logo_classifier = cls.get();
                }
            }
            std::unique_ptr<rf::OcrBackend> ocr;
            if (!r_units.empty()) {
                const std::string body = read_file(r_units);
                if (fs::path(r_units).extension() == ".json") {
                    ocr = std::make_unique<rf::StubOcr>(rf::parse_text_units(body));
                } else {
                    ocr = std::make_unique<rf::SidecarTextOcr>(body);
                }
                res.ocr = ocr.get();
            }
            const auto report = rf::run_pipeline(img, optional_text(r_text), res, cfg);
            for (const auto& e : report.errors) log("stage " + e.stage + ": " + e.message);
            emit(rf::report_to_json(report, g.debug));
            return report.exit_code();
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 4;
    }
    try {
        return run();
    } catch (const rf::Error& e) {
        log(e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        log(e.what());
        return 8;
    }
}

#include "receiptforge/eval.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

namespace receiptforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(HeatBackendKind k) { return k == HeatBackendKind::Heuristic ? "heuristic" : "oracle"; }

HeatBackendKind parse_heat_backend(std::string_view s) {
    if (s == "heuristic") return HeatBackendKind::Heuristic;
    if (s == "oracle") return HeatBackendKind::Oracle;
    throw Error(ErrorCode::ConfigError, "unknown heat-map backend '" + std::string(s) + "'");
}

void DetectionCounts::add(bool truth, bool predicted) {
    if (truth && predicted) ++receipt.tp;
    if (!truth && predicted) ++receipt.fp;
    if (truth && !predicted) ++receipt.fn;
    if (!truth && !predicted) ++not_receipt.tp;
    if (truth && !predicted) ++not_receipt.fp;
    if (!truth && predicted) ++not_receipt.fn;
}

namespace {

json class_json(const ClassCounts& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"precision", c.precision()}, {"recall", c.recall()}};
}

json detection_json(const DetectionCounts& d) {
    return {{"receipt", class_json(d.receipt)}, {"not_receipt", class_json(d.not_receipt)}};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct SampleRef {
    std::string id;
    bool receipt = false;
};

struct Corpus {
    std::uint64_t seed = 0;
    double ocr_noise = 0.0;
    std::vector<SampleRef> samples;
    StoreDb stores;
    Ontology ontology;
    TemplateSet logos;
};

Corpus load_corpus(const fs::path& root, int logo_input) {
    const fs::path manifest = root / "corpus.json";
    if (!fs::exists(manifest)) throw Error(ErrorCode::EmptyCorpus, "no corpus manifest in " + root.string());
    Corpus c;
    try {
        const json doc = json::parse(read_file(manifest));
        if (doc.value("schema", "") != "corpus-v1") throw Error(ErrorCode::ConfigError, "unknown corpus schema");
        c.seed = doc.at("seed").get<std::uint64_t>();
        c.ocr_noise = doc.at("ocr_noise").get<double>();
        for (const auto& s : doc.at("samples")) c.samples.push_back({s.at("id").get<std::string>(), s.at("receipt").get<bool>()});
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigError, std::string("bad corpus manifest: ") + e.what());
    }
    if (c.samples.empty()) throw Error(ErrorCode::EmptyCorpus, "corpus manifest lists no sample");
    c.stores = load_store_db((root / "stores.json").string());
    c.ontology = load_ontology((root / "ontology.json").string(), load_abbreviations((root / "abbreviations.tsv").string()));
    c.logos = load_templates((root / "logos").string(), logo_input);
    return c;
}

struct Backends {
    std::unique_ptr<SegmentationBackend> heat;
    std::unique_ptr<TemplateLogoSegmenter> logo_seg;
    std::unique_ptr<TemplateLogoClassifier> logo_cls;
};

struct SampleResult {
    bool truth = false;
    DetectionVerdict verdict;
    bool localized = false;
    double iou_edge = 0.0;
    double iou_heat = 0.0;
    double iou_combined = 0.0;
    bool clean = false;
    bool fallback = false;
    bool text_correct = false;
    bool logo_top1 = false;
    bool logo_top2 = false;
    bool fused_correct = false;
    bool accepted = false;
    AssociationStats association;
    std::optional<EndToEndStats> end_to_end;
    bool error = false;
};

double safe_iou(const BBox& a, const BBox& b) {
    if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0) return 0.0;
    return iou(a, b);
}

BBox full_frame(const GrayImage& img) { return {0, 0, double(img.width()), double(img.height())}; }

EndToEndStats end_to_end(const GroundTruth& gt, const GrayImage& oriented, const Corpus& corpus,
                         const std::optional<SignDecision>& sign, double noise, std::uint64_t seed,
                         const PipelineConfig& cfg) {
    EndToEndStats s;
    s.receipts = 1;
    s.expected_products = static_cast<int>(gt.products.size());
    std::vector<double> priors;
    if (sign && sign->accepted) {
        if (const auto* store = corpus.stores.find(sign->store_id)) priors = store->layout_priors;
    }
    const Layout layout = segment_layout(oriented, cfg.layout, priors);
    const auto ocr = noisy_ocr(std::make_shared<StubOcr>(gt.units), noise, seed);
    const ExtractionReport rep = extract_products(layout, oriented, *ocr, corpus.ontology, cfg.match_threshold);
    s.extracted_products = static_cast<int>(rep.products.size());
    s.skipped_lines = static_cast<int>(rep.skipped.size());
    std::vector<std::string> expected;
    for (const auto& p : gt.products) expected.push_back(p.concept_id);
    for (const auto& p : rep.products) {
        if (!p.match.matched) continue;
        const auto it = std::find(expected.begin(), expected.end(), p.match.concept_id);
        if (it == expected.end()) continue;
        expected.erase(it);
        ++s.correct_products;
    }
    return s;
}

SampleResult evaluate_sample(const fs::path& root, const SampleRef& ref, std::size_t index, const Corpus& corpus,
                             const Backends& be, const EvalConfig& cfg, double noise) {
    SampleResult r;
    r.truth = ref.receipt;
    const std::string base = (root / ref.id).string();
    const GrayImage image = read_image(base + ".pgm");
    const GroundTruth gt = load_ground_truth(base + ".gt.json");
    const std::string text = read_file(base + ".ocr.txt");
    r.truth = gt.receipt_present;

    std::unique_ptr<SegmentationBackend> oracle;
    const SegmentationBackend* heat = be.heat.get();
    if (!heat) {
        oracle = std::make_unique<FileOracleBackend>(file_oracle_backend(base + ".heatmap"));
        heat = oracle.get();
    }
    const PipelineConfig& pc = cfg.pipeline;
    const HeatMap hm = infer_heatmap(image, *heat);
    r.verdict = detect_receipt(text, hm, pc.detection);
    if (!gt.receipt_present) return r;

    const std::uint64_t seed = mix_seed(corpus.seed, index);
    r.association = associate_labels(gt, corpus.ontology, noise, seed, pc.match_threshold);

    const BBox truth_box = gt.quad.bounds();
    r.localized = true;
    r.clean = gt.background == Background::Plain && std::abs(gt.rotation_deg) <= 5.0;
    const CropResult combined = crop_receipt(image, hm, pc.detection, pc.crop);
    r.fallback = combined.fallback.has_value();
    r.iou_combined = safe_iou(combined.quad.bounds(), truth_box);
    r.iou_edge = safe_iou(crop_edges_only(image, pc.crop).quad.bounds(), truth_box);
    BBox wide = full_frame(image);
    try {
        wide = wide_crop(hm, pc.detection, pc.crop.margin, image.width(), image.height());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoReceiptRegion) throw;
    }
    r.iou_heat = safe_iou(wide, truth_box);

    const SignEvidence evidence = text_evidence(text, corpus.stores, pc.sign_text);
    for (const auto& w : evidence) {
        if (w.weight >= 3 && w.store_id == gt.store_id) r.text_correct = true;
    }
    std::optional<LogoResult> logo;
    try {
        logo = locate_logo(combined.rectified, *be.logo_seg, *be.logo_cls, pc.logo);
    } catch (const Error&) {
        logo.reset();
    }
    if (logo) {
        r.logo_top1 = logo->store_id == gt.store_id;
        for (std::size_t k = 0; k < std::min<std::size_t>(2, logo->ranking.size()); ++k) {
            if (logo->ranking[k].first == gt.store_id) r.logo_top2 = true;
        }
    }
    const SignDecision decision = fuse_sign(evidence, logo);
    r.accepted = decision.accepted;
    r.fused_correct = decision.accepted && decision.store_id == gt.store_id;

    if (cfg.end_to_end) {
        const bool inverted = logo && logo->orientation == Orientation::Inverted;
        const GrayImage oriented = inverted ? flip180(combined.rectified) : combined.rectified;
        r.end_to_end = end_to_end(gt, oriented, corpus, decision, noise, seed, pc);
    }
    return r;
}

}  // namespace

AssociationStats associate_labels(const GroundTruth& gt, const Ontology& ontology, double noise, std::uint64_t seed,
                                  double threshold) {
    AssociationStats s;
    s.noise = noise;
    const auto ocr = noisy_ocr(std::make_shared<StubOcr>(gt.units), noise, seed);
    const GrayImage blank;
    for (const auto& p : gt.products) {
        const auto unit = std::find_if(gt.units.begin(), gt.units.end(),
                                       [&](const TextUnit& u) { return u.line == p.line && u.offset == 0; });
        if (unit == gt.units.end()) continue;
        ++s.lines;
        std::string label;
        for (const auto& l : ocr->recognize(blank, unit->box)) label += l.text;
        const auto [quantity, rest] = split_quantity(label);
        (void)quantity;
        const MatchResult m = match_concept(rest, ontology, threshold);
        if (m.matched && m.concept_id == p.concept_id) ++s.correct;
    }
    return s;
}

EvalReport evaluate(const std::string& corpus_dir, const EvalConfig& cfg) {
    cfg.pipeline.validate();
    if (cfg.jobs < 1) throw Error(ErrorCode::ConfigError, "jobs must be at least 1");
    const fs::path root(corpus_dir);
    const Corpus corpus = load_corpus(root, cfg.pipeline.heat_input);
    const double noise = cfg.association_noise.value_or(corpus.ocr_noise);
    const PipelineConfig& pc = cfg.pipeline;

    Backends be;
    if (cfg.backend == HeatBackendKind::Heuristic) {
        be.heat = std::make_unique<HeuristicReceiptBackend>(pc.heat_input, pc.heat_stride, pc.heuristic);
    }
    be.logo_seg = std::make_unique<TemplateLogoSegmenter>(corpus.logos, pc.heat_input, pc.logo_stride, pc.logo_fill);
    be.logo_cls = template_logo_classifier(corpus.logos, pc.heat_input, pc.logo_temperature);

    const std::size_t n = corpus.samples.size();
    std::vector<SampleResult> results(n);
    std::vector<std::string> failures(n);
    const auto work = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < n; i += step) {
            try {
                results[i] = evaluate_sample(root, corpus.samples[i], i, corpus, be, cfg, noise);
            } catch (const std::exception& e) {
                results[i] = SampleResult{};
                results[i].truth = corpus.samples[i].receipt;
                results[i].error = true;
                failures[i] = e.what();
            }
        }
    };
    const std::size_t jobs = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), n);
    if (jobs <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j, jobs);
        for (auto& t : pool) t.join();
    }

    EvalReport rep;
    rep.seed = corpus.seed;
    rep.backend = std::string(to_string(cfg.backend));
    rep.association.noise = noise;
    if (cfg.end_to_end) rep.end_to_end = EndToEndStats{};
    auto& loc = rep.localization;
    for (std::size_t i = 0; i < n; ++i) {
        const SampleResult& r = results[i];
        ++rep.samples;
        ++(r.truth ? rep.receipts : rep.non_receipts);
        if (r.error) ++rep.errors;
        rep.text.add(r.truth, r.verdict.text_hit);
        rep.image.add(r.truth, r.verdict.image_hit);
        rep.fused.add(r.truth, r.verdict.fused);
        if (!r.truth) continue;
        ++loc.samples;
        loc.edge_only += r.iou_edge;
        loc.heatmap_only += r.iou_heat;
        loc.combined += r.iou_combined;
        loc.fallbacks += r.fallback ? 1 : 0;
        if (r.clean) {
            ++loc.clean_samples;
            loc.clean_combined += r.iou_combined;
        }
        ++rep.sign.samples;
        rep.sign.text_correct += r.text_correct;
        rep.sign.logo_top1 += r.logo_top1;
        rep.sign.logo_top2 += r.logo_top2;
        rep.sign.fused_correct += r.fused_correct;
        rep.sign.accepted += r.accepted;
        rep.sign.review += !r.accepted;
        rep.association.lines += r.association.lines;
        rep.association.correct += r.association.correct;
        if (rep.end_to_end && r.end_to_end) {
            auto& e = *rep.end_to_end;
            e.receipts += r.end_to_end->receipts;
            e.expected_products += r.end_to_end->expected_products;
            e.extracted_products += r.end_to_end->extracted_products;
            e.correct_products += r.end_to_end->correct_products;
            e.skipped_lines += r.end_to_end->skipped_lines;
        }
    }
    if (loc.samples) {
        loc.edge_only /= loc.samples;
        loc.heatmap_only /= loc.samples;
        loc.combined /= loc.samples;
    }
    if (loc.clean_samples) loc.clean_combined /= loc.clean_samples;
    return rep;
}

json to_json(const EvalReport& r) {
    const auto& l = r.localization;
    const auto& s = r.sign;
    json out{{"schema", "evalreport-v1"},
             {"seed", r.seed},
             {"backend", r.backend},
             {"counts", {{"samples", r.samples}, {"receipts", r.receipts}, {"non_receipts", r.non_receipts}, {"errors", r.errors}}},
             {"detection", {{"text", detection_json(r.text)}, {"image", detection_json(r.image)}, {"fused", detection_json(r.fused)}}},
             {"localization",
              {{"samples", l.samples},
               {"mean_iou_edge_only", l.edge_only},
               {"mean_iou_heatmap_only", l.heatmap_only},
               {"mean_iou_combined", l.combined},
               {"clean_samples", l.clean_samples},
               {"mean_iou_combined_clean", l.clean_combined},
               {"fallbacks", l.fallbacks}}},
             {"sign",
              {{"samples", s.samples},
               {"text_correct", s.text_correct},
               {"logo_top1", s.logo_top1},
               {"logo_top2", s.logo_top2},
               {"fused_correct", s.fused_correct},
               {"accepted", s.accepted},
               {"review", s.review},
               {"text_accuracy", s.text_accuracy()},
               {"logo_top1_accuracy", s.logo_accuracy()},
               {"logo_top2_accuracy", s.logo_top2_accuracy()},
               {"fused_accuracy", s.fused_accuracy()}}},
             {"association",
              {{"lines", r.association.lines},
               {"correct", r.association.correct},
               {"rate", r.association.rate()},
               {"noise", r.association.noise}}}};
    if (r.end_to_end) {
        const auto& e = *r.end_to_end;
        out["end_to_end"] = {{"receipts", e.receipts},
                             {"expected_products", e.expected_products},
                             {"extracted_products", e.extracted_products},
                             {"correct_products", e.correct_products},
                             {"skipped_lines", e.skipped_lines}};
    }
    return out;
}

}  // namespace receiptforge

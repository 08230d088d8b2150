#pragma once

// Corpus evaluation: detection precision/recall, localization IoU in three
// configurations, store-sign accuracy and short-label association rate.

#include "receiptforge/pipeline.hpp"
#include "receiptforge/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace receiptforge {

enum class HeatBackendKind { Heuristic, Oracle };

std::string_view to_string(HeatBackendKind k);
HeatBackendKind parse_heat_backend(std::string_view s);

struct EvalConfig {
    PipelineConfig pipeline;
    HeatBackendKind backend = HeatBackendKind::Heuristic;
    std::optional<double> association_noise;  // defaults to the corpus OCR noise
    int jobs = 1;
    bool end_to_end = false;  // also run layout and extraction on every receipt
};

struct ClassCounts {
    int tp = 0;
    int fp = 0;
    int fn = 0;

    double precision() const noexcept { return tp + fp == 0 ? 0.0 : double(tp) / (tp + fp); }
    double recall() const noexcept { return tp + fn == 0 ? 0.0 : double(tp) / (tp + fn); }
};

/// Counts for the classes {receipt, not_receipt} of one detector.
struct DetectionCounts {
    ClassCounts receipt;
    ClassCounts not_receipt;

    void add(bool truth, bool predicted);
};

struct LocalizationStats {
    int samples = 0;
    double edge_only = 0.0;  // sums until finalized, then means
    double heatmap_only = 0.0;
    double combined = 0.0;
    int clean_samples = 0;
    double clean_combined = 0.0;
    int fallbacks = 0;
};

struct SignStats {
    int samples = 0;
    int text_correct = 0;
    int logo_top1 = 0;
    int logo_top2 = 0;
    int fused_correct = 0;
    int accepted = 0;
    int review = 0;

    double text_accuracy() const noexcept { return samples ? double(text_correct) / samples : 0.0; }
    double logo_accuracy() const noexcept { return samples ? double(logo_top1) / samples : 0.0; }
    double logo_top2_accuracy() const noexcept { return samples ? double(logo_top2) / samples : 0.0; }
    double fused_accuracy() const noexcept { return samples ? double(fused_correct) / samples : 0.0; }
};

struct AssociationStats {
    int lines = 0;
    int correct = 0;
    double noise = 0.0;

    double rate() const noexcept { return lines ? double(correct) / lines : 0.0; }
};

struct EndToEndStats {
    int receipts = 0;
    int expected_products = 0;
    int extracted_products = 0;
    int correct_products = 0;
    int skipped_lines = 0;
};

struct EvalReport {
    std::uint64_t seed = 0;
    int samples = 0;
    int receipts = 0;
    int non_receipts = 0;
    std::string backend;
    DetectionCounts text;
    DetectionCounts image;
    DetectionCounts fused;
    LocalizationStats localization;
    SignStats sign;
    AssociationStats association;
    std::optional<EndToEndStats> end_to_end;
    int errors = 0;
};

nlohmann::json to_json(const EvalReport& r);

/// Association of one receipt: each product label unit is read through the
/// stub OCR with seeded noise, stripped of its quantity and matched.
AssociationStats associate_labels(const GroundTruth& gt, const Ontology& ontology, double noise, std::uint64_t seed,
                                  double threshold = kDefaultMatchThreshold);

/// Evaluates a corpus written by write_corpus. EmptyCorpus when the manifest
/// is missing or lists no sample.
EvalReport evaluate(const std::string& corpus_dir, const EvalConfig& cfg = {});

}  // namespace receiptforge

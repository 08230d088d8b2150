#pragma once

// End-to-end chain: detect, crop, sign, layout, then OCR and semantics.

#include "receiptforge/backends.hpp"
#include "receiptforge/crop.hpp"
#include "receiptforge/detect.hpp"
#include "receiptforge/layout.hpp"
#include "receiptforge/ocr.hpp"
#include "receiptforge/semantics.hpp"
#include "receiptforge/sign.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace receiptforge {

struct PipelineConfig {
    DetectionConfig detection;
    CropConfig crop;
    SignTextConfig sign_text;
    LogoConfig logo;
    LayoutParams layout;
    HeuristicReceiptParams heuristic;
    int heat_input = 227;
    int heat_stride = 57;
    int logo_stride = 16;
    double logo_fill = 0.8;
    double logo_temperature = 0.1;
    double match_threshold = kDefaultMatchThreshold;

    void validate() const;
};

/// Reads a JSON object whose keys mirror the struct (nested per stage);
/// unknown keys are ConfigError.
PipelineConfig parse_pipeline_config(const std::string& json_text);
PipelineConfig load_pipeline_config(const std::string& path);
nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);

/// Non-owning views of everything the pipeline consults; null members skip
/// the stages that need them.
struct PipelineResources {
    const SegmentationBackend* heat = nullptr;
    const StoreDb* stores = nullptr;
    const SegmentationBackend* logo_segmenter = nullptr;
    const ClassifierBackend* logo_classifier = nullptr;
    const OcrBackend* ocr = nullptr;  // region OCR on the oriented receipt
    const Ontology* ontology = nullptr;
};

struct StageError {
    std::string stage;
    std::string message;
};

struct PipelineReport {
    DetectionVerdict verdict;
    std::optional<CropResult> crop;
    std::optional<LogoResult> logo;
    std::optional<SignDecision> sign;
    std::optional<Layout> layout;
    std::optional<ExtractionReport> extraction;
    std::vector<StageError> errors;

    /// 0 accepted sign, 2 not a receipt, 3 needs review.
    int exit_code() const;
};

PipelineReport run_pipeline(const GrayImage& image, std::string_view page_text, const PipelineResources& res,
                            const PipelineConfig& cfg = {});

/// Report as JSON; `debug` adds the intermediate results of every stage.
nlohmann::json report_to_json(const PipelineReport& report, bool debug = false);

nlohmann::json to_json(const DetectionVerdict& v);
nlohmann::json to_json(const BBox& b);
nlohmann::json to_json(const Quad& q);
nlohmann::json to_json(const SignDecision& d);
nlohmann::json to_json(const LogoResult& l);
nlohmann::json to_json(const Layout& l);
nlohmann::json to_json(const ProductLine& p);
nlohmann::json to_json(const MatchResult& m);

}  // namespace receiptforge

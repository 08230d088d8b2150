#pragma once

// Inference backends. A segmentation backend slides a square window over an
// image at a fixed stride and emits a per-class probability grid; a
// classifier backend maps one square crop to a probability vector. Trained
// networks plug in behind these interfaces; the implementations here are
// deterministic stand-ins.

#include "receiptforge/core.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace receiptforge {

struct BackendSpec {
    int input_size = 227;
    int stride = 227;
    std::vector<std::string> class_labels;

    int class_count() const noexcept { return static_cast<int>(class_labels.size()); }
    /// Throws ConfigError unless input_size > 0, 0 < stride <= input_size and
    /// there are at least two classes.
    void validate() const;
};

class HeatMap {
public:
    HeatMap() = default;
    HeatMap(int grid_w, int grid_h, int stride, int input_size, std::vector<std::string> labels,
            std::vector<double> scores);

    int grid_w() const noexcept { return grid_w_; }
    int grid_h() const noexcept { return grid_h_; }
    int stride() const noexcept { return stride_; }
    int input_size() const noexcept { return input_size_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    int class_count() const noexcept { return static_cast<int>(labels_.size()); }

    /// Index of `label`, or nullopt when the map does not carry that class.
    std::optional<int> class_index(const std::string& label) const;

    double score(int row, int col, int cls) const;
    void set_score(int row, int col, int cls, double value);

    /// Source window of cell (row, col).
    BBox window(int row, int col) const;

    bool operator==(const HeatMap&) const = default;

private:
    std::size_t offset(int row, int col, int cls) const;

    int grid_w_ = 0;
    int grid_h_ = 0;
    int stride_ = 1;
    int input_size_ = 1;
    std::vector<std::string> labels_;
    std::vector<double> scores_;
};

/// floor((dim - input_size) / stride) + 1, with dim padded up to input_size.
int grid_extent(int dim, int input_size, int stride);

class SegmentationBackend {
public:
    virtual ~SegmentationBackend() = default;

    virtual const BackendSpec& spec() const = 0;
    virtual HeatMap run(const GrayImage& img) const = 0;
};

class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;

    virtual const BackendSpec& spec() const = 0;
    /// Probability per class for a crop; the crop is resized to input_size².
    virtual std::vector<double> classify(const GrayImage& crop) const = 0;
};

/// Pads images smaller than the window with white, then runs the backend.
HeatMap infer_heatmap(const GrayImage& img, const SegmentationBackend& backend);

/// Base for backends that score each window independently.
class WindowedBackend : public SegmentationBackend {
public:
    explicit WindowedBackend(BackendSpec spec);

    const BackendSpec& spec() const override { return spec_; }
    HeatMap run(const GrayImage& img) const override;

    /// Class probabilities for one input_size² window at (x, y) of `img`.
    virtual std::vector<double> score_window(const GrayImage& img, int x, int y) const = 0;

private:
    BackendSpec spec_;
};

struct HeuristicReceiptParams {
    double alpha = 6.0;
    double beta = 4.0;
    int bright_level = 200;  // pixel counts as bright when value > this
    int dark_level = 100;    // pixel counts as ink when value < this
    int min_dark_per_row = 3;  // ink pixels that make a text row, which also needs a bright pixel
    double ink_row_offset = 0.15;
};

/// Receipt / not_receipt stand-in: bright paper crossed by rows of dark ink.
class HeuristicReceiptBackend final : public WindowedBackend {
public:
    explicit HeuristicReceiptBackend(int input_size = 227, int stride = 227, HeuristicReceiptParams params = {});

    std::vector<double> score_window(const GrayImage& img, int x, int y) const override;

    /// Receipt probability for a whole image treated as one window.
    double receipt_score(const GrayImage& window) const;

    const HeuristicReceiptParams& params() const noexcept { return params_; }

private:
    HeuristicReceiptParams params_;
};

/// Serves a heat map stored in a sidecar file instead of computing one.
class FileOracleBackend final : public SegmentationBackend {
public:
    explicit FileOracleBackend(HeatMap stored);

    const BackendSpec& spec() const override { return spec_; }
    /// Returns the stored map; OracleShapeError if its grid disagrees with
    /// the grid implied by `img`.
    HeatMap run(const GrayImage& img) const override;

private:
    HeatMap stored_;
    BackendSpec spec_;
};

FileOracleBackend file_oracle_backend(const std::string& sidecar_path);
HeatMap parse_heatmap(const std::string& text);
std::string format_heatmap(const HeatMap& hm);

struct ClassTemplates {
    std::string label;
    std::vector<GrayImage> images;
};

/// Per-class grayscale templates; class order is the order of the entries.
using TemplateSet = std::vector<ClassTemplates>;

/// Loads `<class_label>_<k>.pgm` files from a directory.
TemplateSet load_templates(const std::string& dir, int input_size = 227);

/// Zero-mean normalized cross-correlation of two equally sized images.
/// Returns 0 when either image is constant.
double ncc(const GrayImage& a, const GrayImage& b);

/// Softmax over classes of the best template correlation per class.
class TemplateLogoClassifier final : public ClassifierBackend {
public:
    TemplateLogoClassifier(const TemplateSet& templates, int input_size = 227, double temperature = 0.1);

    const BackendSpec& spec() const override { return spec_; }
    std::vector<double> classify(const GrayImage& crop) const override;

    /// Best raw correlation per class, in class order.
    std::vector<double> correlations(const GrayImage& crop) const;

private:
    struct Prepared {
        std::vector<double> centered;  // zero-mean pixels
        double norm = 0.0;
    };

    BackendSpec spec_;
    double temperature_;
    std::vector<std::vector<Prepared>> prepared_;
};

std::unique_ptr<TemplateLogoClassifier> template_logo_classifier(const TemplateSet& templates,
                                                                 int input_size = 227, double temperature = 0.1);

/// logo / background segmentation stand-in: a window's logo score is its
/// best correlation against any class template shrunk to `fill` of the
/// window and centred on white, clamped to [0, 1].
class TemplateLogoSegmenter final : public WindowedBackend {
public:
    TemplateLogoSegmenter(const TemplateSet& templates, int input_size = 227, int stride = 16, double fill = 0.8);

    std::vector<double> score_window(const GrayImage& img, int x, int y) const override;

private:
    struct Prepared {
        std::vector<double> centered;
        double norm = 0.0;
    };

    std::vector<Prepared> prepared_;
};

}  // namespace receiptforge

#include "receiptforge/backends.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

namespace receiptforge {

void BackendSpec::validate() const {
    if (input_size <= 0) {
        throw Error(ErrorCode::ConfigError, "backend input_size must be positive");
    }
    if (stride <= 0 || stride > input_size) {
        throw Error(ErrorCode::ConfigError, "backend stride must lie in (0, input_size]");
    }
    if (class_labels.size() < 2) {
        throw Error(ErrorCode::ConfigError, "backend needs at least two classes");
    }
}

HeatMap::HeatMap(int grid_w, int grid_h, int stride, int input_size, std::vector<std::string> labels,
                 std::vector<double> scores)
    : grid_w_(grid_w),
      grid_h_(grid_h),
      stride_(stride),
      input_size_(input_size),
      labels_(std::move(labels)),
      scores_(std::move(scores)) {
    if (grid_w <= 0 || grid_h <= 0 || stride <= 0 || input_size <= 0 || labels_.empty()) {
        throw Error(ErrorCode::InvalidGeometry, "heat map dimensions must be positive");
    }
    if (scores_.size() != static_cast<std::size_t>(grid_w) * grid_h * labels_.size()) {
        throw Error(ErrorCode::InvalidGeometry, "heat map score count does not match its grid");
    }
}

std::optional<int> HeatMap::class_index(const std::string& label) const {
    const auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) {
        return std::nullopt;
    }
    return static_cast<int>(it - labels_.begin());
}

std::size_t HeatMap::offset(int row, int col, int cls) const {
    return (static_cast<std::size_t>(row) * grid_w_ + col) * labels_.size() + cls;
}

double HeatMap::score(int row, int col, int cls) const { return scores_.at(offset(row, col, cls)); }

void HeatMap::set_score(int row, int col, int cls, double value) { scores_.at(offset(row, col, cls)) = value; }

BBox HeatMap::window(int row, int col) const {
    return {static_cast<double>(col) * stride_, static_cast<double>(row) * stride_,
            static_cast<double>(input_size_), static_cast<double>(input_size_)};
}

int grid_extent(int dim, int input_size, int stride) {
    const int padded = std::max(dim, input_size);
    return (padded - input_size) / stride + 1;
}

HeatMap infer_heatmap(const GrayImage& img, const SegmentationBackend& backend) {
    const int n = backend.spec().input_size;
    if (img.width() >= n && img.height() >= n) {
        return backend.run(img);
    }
    const int w = std::max(img.width(), n);
    const int h = std::max(img.height(), n);
    return backend.run(pad_to(img, w, h, 0, 0, 255));
}

// ---------------------------------------------------------------------------

WindowedBackend::WindowedBackend(BackendSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

HeatMap WindowedBackend::run(const GrayImage& img) const {
    const int n = spec_.input_size;
    if (img.width() < n || img.height() < n) {
        return infer_heatmap(img, *this);
    }
    const int gw = grid_extent(img.width(), n, spec_.stride);
    const int gh = grid_extent(img.height(), n, spec_.stride);
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(gw) * gh * spec_.class_labels.size());
    for (int i = 0; i < gh; ++i) {
        for (int j = 0; j < gw; ++j) {
            const auto cell = score_window(img, j * spec_.stride, i * spec_.stride);
            scores.insert(scores.end(), cell.begin(), cell.end());
        }
    }
    return HeatMap(gw, gh, spec_.stride, n, spec_.class_labels, std::move(scores));
}

HeuristicReceiptBackend::HeuristicReceiptBackend(int input_size, int stride, HeuristicReceiptParams params)
    : WindowedBackend(BackendSpec{input_size, stride, {"receipt", "not_receipt"}}), params_(params) {}

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

std::vector<double> HeuristicReceiptBackend::score_window(const GrayImage& img, int x0, int y0) const {
    const int n = spec().input_size;
    long bright = 0;
    int ink_rows = 0;
    for (int y = y0; y < y0 + n; ++y) {
        const auto row = img.row(y);
        int dark = 0;
        int paper = 0;
        for (int x = x0; x < x0 + n; ++x) {
            const int v = row[static_cast<std::size_t>(x)];
            paper += v > params_.bright_level ? 1 : 0;
            dark += v < params_.dark_level ? 1 : 0;
        }
        bright += paper;
        // A text row is ink on paper; a row without any paper pixel is not.
        ink_rows += dark >= params_.min_dark_per_row && paper > 0 ? 1 : 0;
    }
    const double brightness_frac = static_cast<double>(bright) / (static_cast<double>(n) * n);
    const double ink_row_frac = static_cast<double>(ink_rows) / n;
    const double receipt = logistic(params_.alpha * (brightness_frac - 0.5) +
                                    params_.beta * (ink_row_frac - params_.ink_row_offset));
    return {receipt, 1.0 - receipt};
}

double HeuristicReceiptBackend::receipt_score(const GrayImage& window) const {
    const int n = spec().input_size;
    const GrayImage sized =
        (window.width() == n && window.height() == n) ? window : resize(window, n, n);
    return score_window(sized, 0, 0)[0];
}

// ---------------------------------------------------------------------------
// File oracle

FileOracleBackend::FileOracleBackend(HeatMap stored)
    : stored_(std::move(stored)),
      spec_{stored_.input_size(), stored_.stride(), stored_.labels()} {
    spec_.validate();
}

HeatMap FileOracleBackend::run(const GrayImage& img) const {
    const int gw = grid_extent(img.width(), spec_.input_size, spec_.stride);
    const int gh = grid_extent(img.height(), spec_.input_size, spec_.stride);
    if (gw != stored_.grid_w() || gh != stored_.grid_h()) {
        throw Error(ErrorCode::OracleShapeError,
                    "stored heat map is " + std::to_string(stored_.grid_h()) + "x" +
                        std::to_string(stored_.grid_w()) + " but the image implies " + std::to_string(gh) +
                        "x" + std::to_string(gw));
    }
    return stored_;
}

namespace {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

HeatMap parse_heatmap(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    const auto fail = [](const std::string& why) { return Error(ErrorCode::OracleLoadError, why); };
    if (!std::getline(in, line) || line.rfind("HEATMAP v1", 0) != 0) {
        throw fail("missing 'HEATMAP v1' header");
    }
    int gh = 0, gw = 0, classes = 0, stride = 0, input = 0;
    if (!std::getline(in, line)) throw fail("missing grid line");
    {
        std::istringstream dims(line);
        if (!(dims >> gh >> gw >> classes >> stride >> input) || gh <= 0 || gw <= 0 || classes < 2 ||
            stride <= 0 || input <= 0) {
            throw fail("malformed grid line: " + line);
        }
    }
    if (!std::getline(in, line)) throw fail("missing class labels");
    std::vector<std::string> labels;
    {
        std::istringstream ls(line);
        std::string label;
        while (ls >> label) labels.push_back(label);
    }
    if (static_cast<int>(labels.size()) != classes) {
        throw fail("class label count does not match class_count");
    }
    std::vector<double> scores;
    scores.reserve(static_cast<std::size_t>(gh) * gw * classes);
    for (int cell = 0; cell < gh * gw; ++cell) {
        if (!std::getline(in, line)) throw fail("heat map ends after " + std::to_string(cell) + " cells");
        std::istringstream cs(line);
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) {
            double v = 0.0;
            if (!(cs >> v)) throw fail("cell " + std::to_string(cell) + " has too few scores");
            if (!(v >= 0.0 && v <= 1.0)) throw fail("score outside [0,1] in cell " + std::to_string(cell));
            sum += v;
            scores.push_back(v);
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw fail("scores of cell " + std::to_string(cell) + " do not sum to 1");
        }
    }
    return HeatMap(gw, gh, stride, input, std::move(labels), std::move(scores));
}

std::string format_heatmap(const HeatMap& hm) {
    std::string out = "HEATMAP v1\n";
    out += std::to_string(hm.grid_h()) + " " + std::to_string(hm.grid_w()) + " " +
           std::to_string(hm.class_count()) + " " + std::to_string(hm.stride()) + " " +
           std::to_string(hm.input_size()) + "\n";
    for (std::size_t i = 0; i < hm.labels().size(); ++i) {
        out += (i ? " " : "") + hm.labels()[i];
    }
    out += "\n";
    for (int i = 0; i < hm.grid_h(); ++i) {
        for (int j = 0; j < hm.grid_w(); ++j) {
            for (int c = 0; c < hm.class_count(); ++c) {
                out += (c ? " " : "") + format_double(hm.score(i, j, c));
            }
            out += "\n";
        }
    }
    return out;
}

FileOracleBackend file_oracle_backend(const std::string& sidecar_path) {
    std::ifstream in(sidecar_path);
    if (!in) {
        throw Error(ErrorCode::OracleLoadError, "cannot open heat map sidecar " + sidecar_path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return FileOracleBackend(parse_heatmap(buf.str()));
}

// ---------------------------------------------------------------------------
// Template correlation

namespace {

struct Centered {
    std::vector<double> values;
    double norm = 0.0;
};

Centered center(const GrayImage& img) {
    Centered c;
    const auto px = img.pixels();
    double mean = 0.0;
    for (auto v : px) mean += v;
    mean /= static_cast<double>(px.size());
    c.values.resize(px.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < px.size(); ++i) {
        c.values[i] = px[i] - mean;
        ss += c.values[i] * c.values[i];
    }
    c.norm = std::sqrt(ss);
    return c;
}

GrayImage to_square(const GrayImage& img, int n) {
    return (img.width() == n && img.height() == n) ? img : resize(img, n, n);
}

// Correlation of a (window of an) image against a pre-centred template of
// the same size; the template's zero mean makes the window mean drop out of
// the dot product.
double correlate(const GrayImage& img, int x0, int y0, int n, const std::vector<double>& tmpl, double tmpl_norm) {
    if (tmpl_norm <= 0.0) return 0.0;
    double dot = 0.0, sum = 0.0, sumsq = 0.0;
    std::size_t k = 0;
    for (int y = y0; y < y0 + n; ++y) {
        const auto row = img.row(y);
        for (int x = x0; x < x0 + n; ++x, ++k) {
            const double v = row[static_cast<std::size_t>(x)];
            dot += v * tmpl[k];
            sum += v;
            sumsq += v * v;
        }
    }
    const double count = static_cast<double>(n) * n;
    const double var = sumsq - sum * sum / count;
    if (var <= 1e-9) return 0.0;
    return dot / (std::sqrt(var) * tmpl_norm);
}

}  // namespace

double ncc(const GrayImage& a, const GrayImage& b) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw Error(ErrorCode::InvalidGeometry, "ncc needs equally sized images");
    }
    const auto ca = center(a);
    const auto cb = center(b);
    if (ca.norm <= 0.0 || cb.norm <= 0.0) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < ca.values.size(); ++i) dot += ca.values[i] * cb.values[i];
    return dot / (ca.norm * cb.norm);
}

TemplateSet load_templates(const std::string& dir, int input_size) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::ConfigError, "template directory not found: " + dir);
    }
    static const std::regex name_re(R"((.+)_(\d+)\.pgm)");
    std::vector<std::pair<std::string, fs::path>> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, m, name_re)) {
            files.emplace_back(m[1].str(), entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    TemplateSet set;
    for (const auto& [label, path] : files) {
        if (set.empty() || set.back().label != label) {
            set.push_back({label, {}});
        }
        set.back().images.push_back(to_square(read_image(path.string()), input_size));
    }
    if (set.empty()) {
        throw Error(ErrorCode::ConfigError, "no <class>_<k>.pgm templates in " + dir);
    }
    return set;
}

TemplateLogoClassifier::TemplateLogoClassifier(const TemplateSet& templates, int input_size, double temperature)
    : temperature_(temperature) {
    if (templates.empty()) {
        throw Error(ErrorCode::ConfigError, "template classifier needs at least one class");
    }
    spec_.input_size = input_size;
    spec_.stride = input_size;
    for (const auto& cls : templates) {
        if (cls.images.empty()) {
            throw Error(ErrorCode::ConfigError, "class '" + cls.label + "' has no templates");
        }
        spec_.class_labels.push_back(cls.label);
        auto& prepared = prepared_.emplace_back();
        for (const auto& t : cls.images) {
            auto c = center(to_square(t, input_size));
            prepared.push_back({std::move(c.values), c.norm});
        }
    }
    if (!(temperature_ > 0.0)) {
        throw Error(ErrorCode::ConfigError, "softmax temperature must be positive");
    }
}

std::vector<double> TemplateLogoClassifier::correlations(const GrayImage& crop) const {
    const int n = spec_.input_size;
    const GrayImage sized = to_square(crop, n);
    std::vector<double> best;
    best.reserve(prepared_.size());
    for (const auto& cls : prepared_) {
        double m = -1.0;
        for (const auto& t : cls) {
            m = std::max(m, correlate(sized, 0, 0, n, t.centered, t.norm));
        }
        best.push_back(m);
    }
    return best;
}

std::vector<double> TemplateLogoClassifier::classify(const GrayImage& crop) const {
    const auto corr = correlations(crop);
    const double top = *std::max_element(corr.begin(), corr.end());
    std::vector<double> probs(corr.size());
    double z = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        probs[i] = std::exp((corr[i] - top) / temperature_);
        z += probs[i];
    }
    for (auto& p : probs) p /= z;
    return probs;
}

std::unique_ptr<TemplateLogoClassifier> template_logo_classifier(const TemplateSet& templates, int input_size,
                                                                 double temperature) {
    return std::make_unique<TemplateLogoClassifier>(templates, input_size, temperature);
}

TemplateLogoSegmenter::TemplateLogoSegmenter(const TemplateSet& templates, int input_size, int stride, double fill)
    : WindowedBackend(BackendSpec{input_size, stride, {"logo", "background"}}) {
    if (templates.empty()) {
        throw Error(ErrorCode::ConfigError, "logo segmenter needs templates");
    }
    const int inner = std::max(1, static_cast<int>(std::lround(fill * input_size)));
    const int offset = (input_size - inner) / 2;
    for (const auto& cls : templates) {
        for (const auto& t : cls.images) {
            const GrayImage framed = pad_to(resize(t, inner, inner), input_size, input_size, offset, offset, 255);
            auto c = center(framed);
            prepared_.push_back({std::move(c.values), c.norm});
        }
    }
}

std::vector<double> TemplateLogoSegmenter::score_window(const GrayImage& img, int x, int y) const {
    const int n = spec().input_size;
    double best = 0.0;
    for (const auto& t : prepared_) {
        best = std::max(best, correlate(img, x, y, n, t.centered, t.norm));
    }
    best = std::clamp(best, 0.0, 1.0);
    return {best, 1.0 - best};
}

}  // namespace receiptforge

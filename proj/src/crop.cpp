#include "receiptforge/crop.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace receiptforge {

void CropConfig::validate() const {
    if (margin < 0.0 || strip_width < 1 || min_contrast <= 0.0 || max_angle_deg <= 0.0 ||
        max_angle_deg >= 45.0 || min_support < 2 || scan_step < 1) {
        throw Error(ErrorCode::ConfigError, "invalid crop configuration");
    }
}

std::string_view to_string(EdgeSide side) {
    switch (side) {
    case EdgeSide::Left: return "left";
    case EdgeSide::Right: return "right";
    case EdgeSide::Top: return "top";
    case EdgeSide::Bottom: return "bottom";
    }
    return "?";
}

BBox wide_crop(const HeatMap& hm, const DetectionConfig& cfg, double margin, int image_width, int image_height) {
    const BinaryMask cells = positive_cells(hm, cfg);
    std::optional<BBox> box;
    for (int i = 0; i < hm.grid_h(); ++i) {
        for (int j = 0; j < hm.grid_w(); ++j) {
            if (cells.at(j, i)) {
                box = box ? unite(*box, hm.window(i, j)) : hm.window(i, j);
            }
        }
    }
    if (!box) {
        throw Error(ErrorCode::NoReceiptRegion, "no heat-map cell reaches the threshold");
    }
    const double dx = box->w * margin;
    const double dy = box->h * margin;
    return clamp_to({box->x - dx, box->y - dy, box->w + 2 * dx, box->h + 2 * dy}, image_width, image_height);
}

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// Samples along one scanline, with prefix sums for O(1) strip means.
struct Scanline {
    std::vector<double> prefix;  // prefix[i] = sum of the first i samples

    double mean(int from, int to) const { return (prefix[to] - prefix[from]) / (to - from); }
};

// Step response at boundary `pos` (between samples pos-1 and pos): mean of
// the `s` samples after minus the `s` samples before.
double step(const Scanline& line, int pos, int s) { return line.mean(pos, pos + s) - line.mean(pos - s, pos); }

// First local maximum above `contrast`, walking from the outside of the
// range inward. `sign` +1 looks for bright-after (leading border), -1 for
// bright-before (trailing border).
std::optional<int> first_border(const Scanline& line, int lo, int hi, int s, double contrast, int sign) {
    // valid boundary positions need full strips on both sides
    const int n = static_cast<int>(line.prefix.size()) - 1;
    lo = std::max(lo, s);
    hi = std::min(hi, n - s);
    if (lo > hi) return std::nullopt;
    const auto response = [&](int p) { return sign * step(line, p, s); };
    if (sign > 0) {
        for (int p = lo; p <= hi; ++p) {
            const double r = response(p);
            if (r > contrast && (p == lo || r >= response(p - 1)) && (p == hi || r > response(p + 1))) {
                return p;
            }
        }
    } else {
        for (int p = hi; p >= lo; --p) {
            const double r = response(p);
            if (r > contrast && (p == hi || r >= response(p + 1)) && (p == lo || r > response(p - 1))) {
                return p;
            }
        }
    }
    return std::nullopt;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::vector<Point2d> inliers;
};

// Least squares of dependent = slope * independent + intercept, where the
// independent axis is y for quasi-vertical lines and x otherwise.
std::optional<LineFit> least_squares(const std::vector<Point2d>& pts, bool vertical) {
    if (pts.size() < 2) return std::nullopt;
    double si = 0, sd = 0, sii = 0, sid = 0;
    for (const auto& p : pts) {
        const double i = vertical ? p.y : p.x;
        const double d = vertical ? p.x : p.y;
        si += i;
        sd += d;
        sii += i * i;
        sid += i * d;
    }
    const double n = static_cast<double>(pts.size());
    const double den = n * sii - si * si;
    if (std::abs(den) < 1e-9) return std::nullopt;
    LineFit f;
    f.slope = (n * sid - si * sd) / den;
    f.intercept = (sd - f.slope * si) / n;
    f.inliers = pts;
    return f;
}

double residual(const LineFit& f, const Point2d& p, bool vertical) {
    const double i = vertical ? p.y : p.x;
    const double d = vertical ? p.x : p.y;
    return std::abs(d - (f.slope * i + f.intercept));
}

// Fit, then twice drop points farther than twice the median residual and
// refit. Sub-pixel medians are floored at half a pixel so that an exact fit
// does not discard its own support over rounding noise.
std::optional<LineFit> robust_fit(const std::vector<Point2d>& pts, bool vertical) {
    auto fit = least_squares(pts, vertical);
    for (int round = 0; round < 2 && fit; ++round) {
        std::vector<double> res;
        res.reserve(fit->inliers.size());
        for (const auto& p : fit->inliers) res.push_back(residual(*fit, p, vertical));
        std::vector<double> sorted = res;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2),
                         sorted.end());
        const double cutoff = std::max(2.0 * sorted[sorted.size() / 2], 0.5);
        std::vector<Point2d> kept;
        for (std::size_t k = 0; k < res.size(); ++k) {
            if (res[k] <= cutoff) kept.push_back(fit->inliers[k]);
        }
        fit = least_squares(kept, vertical);
    }
    return fit;
}

EdgeLine make_edge(EdgeSide side, const std::vector<Point2d>& pts, const CropConfig& cfg) {
    const bool vertical = side == EdgeSide::Left || side == EdgeSide::Right;
    const auto fit = robust_fit(pts, vertical);
    if (!fit || static_cast<int>(fit->inliers.size()) < cfg.min_support) {
        throw Error(ErrorCode::EdgeNotFound, std::string(to_string(side)) + " edge has too few support points");
    }
    EdgeLine e;
    e.side = side;
    e.support = fit->inliers;
    e.slope = fit->slope;
    e.intercept = fit->intercept;
    const double a = std::atan(fit->slope) * kRadToDeg;
    e.angle_deg = vertical ? -a : a;
    if (std::abs(a) > cfg.max_angle_deg) {
        throw Error(ErrorCode::EdgeNotFound, std::string(to_string(side)) + " edge is not quasi-axis-aligned");
    }
    return e;
}

}  // namespace

ReceiptEdges detect_receipt_edges(const GrayImage& img, const BBox& search, const CropConfig& cfg) {
    cfg.validate();
    const BBox box = clamp_to(search, img.width(), img.height());
    if (!(box.area() > 0.0)) {
        throw Error(ErrorCode::InvalidGeometry, "edge search box is empty");
    }
    const int x0 = static_cast<int>(std::floor(box.x));
    const int y0 = static_cast<int>(std::floor(box.y));
    const int x1 = static_cast<int>(std::ceil(box.right()));
    const int y1 = static_cast<int>(std::ceil(box.bottom()));
    const int s = cfg.strip_width;

    std::vector<Point2d> left, right, top, bottom;
    Scanline line;

    line.prefix.resize(static_cast<std::size_t>(img.width()) + 1);
    for (int y = y0; y < y1; y += cfg.scan_step) {
        const auto row = img.row(y);
        line.prefix[0] = 0.0;
        for (int x = 0; x < img.width(); ++x) line.prefix[x + 1] = line.prefix[x] + row[x];
        if (auto p = first_border(line, x0, x1, s, cfg.min_contrast, +1)) left.push_back({double(*p), y + 0.5});
        if (auto p = first_border(line, x0, x1, s, cfg.min_contrast, -1)) right.push_back({double(*p), y + 0.5});
    }

    line.prefix.resize(static_cast<std::size_t>(img.height()) + 1);
    for (int x = x0; x < x1; x += cfg.scan_step) {
        line.prefix[0] = 0.0;
        for (int y = 0; y < img.height(); ++y) line.prefix[y + 1] = line.prefix[y] + img.at(x, y);
        if (auto p = first_border(line, y0, y1, s, cfg.min_contrast, +1)) top.push_back({x + 0.5, double(*p)});
        if (auto p = first_border(line, y0, y1, s, cfg.min_contrast, -1)) bottom.push_back({x + 0.5, double(*p)});
    }

    return {make_edge(EdgeSide::Left, left, cfg), make_edge(EdgeSide::Right, right, cfg),
            make_edge(EdgeSide::Top, top, cfg), make_edge(EdgeSide::Bottom, bottom, cfg)};
}

namespace {

Point2d intersect_lines(const EdgeLine& vertical, const EdgeLine& horizontal) {
    // x = a1 y + b1, y = a2 x + b2
    const double a1 = vertical.slope, b1 = vertical.intercept;
    const double a2 = horizontal.slope, b2 = horizontal.intercept;
    const double den = 1.0 - a1 * a2;
    const double x = (a1 * b2 + b1) / den;
    return {x, a2 * x + b2};
}

}  // namespace

Quad edge_quad(const ReceiptEdges& e) {
    return Quad{{intersect_lines(e.left, e.top), intersect_lines(e.right, e.top),
                 intersect_lines(e.right, e.bottom), intersect_lines(e.left, e.bottom)}};
}

namespace {

// Background slivers left at the rectified border would read as ink.
constexpr double kPaperInset = 0.0;

/// Whitens pixels whose centre lies outside `q` shrunk by `inset`; (ox, oy)
/// is the image origin in quad coordinates.
void paint_outside(GrayImage& img, const Quad& q, double ox, double oy, double inset) {
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Point2d p{ox + x + 0.5, oy + y + 0.5};
            for (std::size_t k = 0; k < 4; ++k) {
                const Point2d& a = q.corners[k];
                const Point2d& b = q.corners[(k + 1) % 4];
                const double len = std::hypot(b.x - a.x, b.y - a.y);
                const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
                if (len > 0.0 && cross < inset * len) {
                    img.at(x, y) = 255;
                    break;
                }
            }
        }
    }
}

}  // namespace

CropResult rectify(const GrayImage& img, const ReceiptEdges& edges) {
    CropResult out;
    out.quad = edge_quad(edges);
    const double w = img.width(), h = img.height();
    for (const auto& c : out.quad.corners) {
        if (!std::isfinite(c.x) || !std::isfinite(c.y) || c.x < -0.25 * w || c.x > 1.25 * w || c.y < -0.25 * h ||
            c.y > 1.25 * h) {
            throw Error(ErrorCode::DegenerateQuad, "receipt corner falls outside 1.5x the image frame");
        }
    }
    if (!out.quad.is_simple()) {
        throw Error(ErrorCode::DegenerateQuad, "receipt edges do not form a simple quadrilateral");
    }
    out.skew_angle = 0.5 * (edges.left.angle_deg + edges.right.angle_deg);
    out.wide_box = clamp_to(out.quad.bounds(), img.width(), img.height());

    // Rotate only a neighbourhood of the quad; the result is the same as
    // rotating the full frame and cropping.
    const BBox bounds = out.quad.bounds();
    const BBox region = clamp_to({std::floor(bounds.x) - 2, std::floor(bounds.y) - 2, std::ceil(bounds.w) + 5,
                                  std::ceil(bounds.h) + 5},
                                 img.width(), img.height());
    const GrayImage local = crop(img, region);
    const GrayImage turned = rotate(local, -out.skew_angle);
    Quad turned_quad;
    for (std::size_t k = 0; k < 4; ++k) {
        const Point2d p{out.quad.corners[k].x - region.x, out.quad.corners[k].y - region.y};
        turned_quad.corners[k] = rotate_point(p, -out.skew_angle, local.width(), local.height());
    }
    const BBox tb = turned_quad.bounds();
    out.rectified = crop(turned, tb);
    paint_outside(out.rectified, turned_quad, std::floor(tb.x + 1e-9), std::floor(tb.y + 1e-9), kPaperInset);
    return out;
}

namespace {

CropResult fallback_crop(const GrayImage& img, const BBox& box, std::string reason) {
    CropResult out;
    out.wide_box = box;
    out.quad = Quad{{Point2d{box.x, box.y}, Point2d{box.right(), box.y}, Point2d{box.right(), box.bottom()},
                     Point2d{box.x, box.bottom()}}};
    out.rectified = crop(img, box);
    out.skew_angle = 0.0;
    out.fallback = std::move(reason);
    return out;
}

CropResult refine(const GrayImage& img, const BBox& search, const CropConfig& cfg) {
    try {
        CropResult r = rectify(img, detect_receipt_edges(img, search, cfg));
        r.wide_box = search;
        return r;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::EdgeNotFound && e.code() != ErrorCode::DegenerateQuad) throw;
        return fallback_crop(img, search, e.what());
    }
}

}  // namespace

CropResult crop_receipt(const GrayImage& img, const HeatMap& hm, const DetectionConfig& dcfg, const CropConfig& cfg) {
    BBox search{0.0, 0.0, static_cast<double>(img.width()), static_cast<double>(img.height())};
    try {
        search = wide_crop(hm, dcfg, cfg.margin, img.width(), img.height());
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoReceiptRegion) throw;
    }
    return refine(img, search, cfg);
}

CropResult crop_edges_only(const GrayImage& img, const CropConfig& cfg) {
    return refine(img, BBox{0.0, 0.0, static_cast<double>(img.width()), static_cast<double>(img.height())}, cfg);
}

}  // namespace receiptforge

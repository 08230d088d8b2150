#pragma once

// Receipt localization: a coarse box from the receipt heat map, refined by a
// bright/dark step detector that finds the four paper borders, then a
// rotation-only rectification.

#include "receiptforge/backends.hpp"
#include "receiptforge/detect.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace receiptforge {

struct CropConfig {
    double margin = 0.05;       // wide-box dilation, fraction of each box side
    int strip_width = 7;        // width of each half of the step filter
    double min_contrast = 40.0; // bright-side mean minus dark-side mean
    double max_angle_deg = 20.0;
    int min_support = 8;
    int scan_step = 1;          // scanline spacing in pixels

    void validate() const;
};

enum class EdgeSide { Left, Right, Top, Bottom };

std::string_view to_string(EdgeSide side);

/// A fitted receipt border. Quasi-vertical edges are x = slope * y +
/// intercept, quasi-horizontal ones y = slope * x + intercept. `angle_deg`
/// is the rotation that would carry the nominal axis onto the line, in the
/// same sense as `rotate`.
struct EdgeLine {
    EdgeSide side = EdgeSide::Left;
    std::vector<Point2d> support;
    double slope = 0.0;
    double intercept = 0.0;
    double angle_deg = 0.0;

    bool quasi_vertical() const noexcept { return side == EdgeSide::Left || side == EdgeSide::Right; }
};

struct ReceiptEdges {
    EdgeLine left, right, top, bottom;
};

struct CropResult {
    BBox wide_box;
    Quad quad;
    GrayImage rectified;
    double skew_angle = 0.0;
    /// Set when the refined crop could not be computed and the wide box was
    /// used instead; holds the reason.
    std::optional<std::string> fallback;
};

/// Union of the windows of all positive cells, dilated by `margin` of the
/// box size and clamped to the image. NoReceiptRegion if no cell is positive.
BBox wide_crop(const HeatMap& hm, const DetectionConfig& cfg, double margin, int image_width, int image_height);

/// Finds border points inside `search` and fits one line per side.
/// EdgeNotFound names the first side with too few inliers.
ReceiptEdges detect_receipt_edges(const GrayImage& img, const BBox& search, const CropConfig& cfg = {});

/// Corner quad of four edges, TL, TR, BR, BL.
Quad edge_quad(const ReceiptEdges& edges);

/// Deskews by the mean vertical-edge angle and crops the rotated quad's
/// bounding box. DegenerateQuad for crossing or far out-of-frame corners.
CropResult rectify(const GrayImage& img, const ReceiptEdges& edges);

/// Full localization stage: wide crop (or the whole frame when the heat map
/// has no positive cell), edge refinement inside it, and the wide-crop
/// fallback when refinement fails.
CropResult crop_receipt(const GrayImage& img, const HeatMap& hm, const DetectionConfig& dcfg,
                        const CropConfig& cfg = {});

/// Edge refinement over the whole frame, without heat-map guidance. Falls
/// back to the full frame when refinement fails.
CropResult crop_edges_only(const GrayImage& img, const CropConfig& cfg = {});

}  // namespace receiptforge

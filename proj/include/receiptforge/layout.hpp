#pragma once

// Text-block segmentation of a rectified receipt: Sauvola binarization, then
// full-width bands from the row ink profile, column sub-blocks from the
// column profile inside each band, and text lines inside each sub-block.

#include "receiptforge/core.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace receiptforge {

struct BinarizeParams {
    int window = 31;
    double k = 0.2;
    double dynamic_range = 128.0;

    void validate() const;
};

/// Sauvola: ink iff value < m * (1 + k * (s / R - 1)) over a window clipped
/// at the borders.
BinaryMask adaptive_binarize(const GrayImage& img, const BinarizeParams& params = {});

/// Inclusive index range.
struct Span {
    int first = 0;
    int last = 0;

    int length() const noexcept { return last - first + 1; }
    bool operator==(const Span&) const = default;
};

/// Integer pixel rectangle, half-open on the right and bottom.
struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    BBox to_bbox() const { return {double(x), double(y), double(w), double(h)}; }
    bool operator==(const PixelRect&) const = default;
};

/// Rows with at least this much ink count as inked.
inline constexpr int kMinRowInk = 2;

/// Row spans of ink inside `region`; runs separated by fewer than `min_gap`
/// blank rows are merged. Rows are inked when they hold >= kMinRowInk ink
/// pixels within the region's columns.
std::vector<Span> horizontal_bands(const BinaryMask& mask, int min_gap, const PixelRect& region);
std::vector<Span> horizontal_bands(const BinaryMask& mask, int min_gap);

/// Column spans of ink inside `region` (a column is inked with one ink pixel),
/// merging runs separated by fewer than `min_gap` blank columns.
std::vector<Span> column_runs(const BinaryMask& mask, int min_gap, const PixelRect& region);

/// Median height of maximal inked-row runs over the whole mask; 0 if blank.
int estimate_line_height(const BinaryMask& mask);

/// Median width of blank column runs enclosed by ink inside the given bands.
int estimate_char_gap(const BinaryMask& mask, const std::vector<PixelRect>& bands);

enum class BlockKind { Band, Subblock, Line };

std::string_view to_string(BlockKind kind);

struct TextBlock {
    PixelRect box;
    BlockKind kind = BlockKind::Band;
    int parent = -1;  // index into the owning Layout, -1 for bands
};

struct LayoutParams {
    BinarizeParams binarize;
    /// Band separation as a multiple of the estimated line height.
    double band_gap_factor = 0.8;
    /// Line separation inside a sub-block, multiple of line height.
    double line_gap_factor = 0.3;
    /// Column gaps must reach max(char_gap_factor * median character gap,
    /// col_gap_line_factor * line height) to split a band.
    double char_gap_factor = 2.0;
    double col_gap_line_factor = 1.5;
    /// Prior split positions snap to gaps within this fraction of the width.
    double prior_tolerance = 0.03;
};

/// Column sub-blocks of one band. `priors` are split positions as fractions
/// of the mask width: a detected split near a prior is kept, a prior with no
/// nearby split is forced at the widest blank run within tolerance when ink
/// lies on both sides.
std::vector<PixelRect> vertical_subblocks(const BinaryMask& mask, const PixelRect& band, int min_col_gap,
                                          const std::vector<double>& priors = {}, double prior_tolerance = 0.03);

/// Line boxes inside a sub-block, each tightened to its ink columns.
std::vector<PixelRect> segment_lines(const BinaryMask& mask, const PixelRect& subblock, int min_gap);

struct Layout {
    std::vector<TextBlock> blocks;  // bands, each followed by its subtree
    int line_height = 0;
    int band_gap = 0;
    int column_gap = 0;

    std::vector<int> children(int parent) const;
    std::vector<int> of_kind(BlockKind kind) const;
};

/// Full hierarchy from an existing mask.
Layout segment_layout(const BinaryMask& mask, const LayoutParams& params = {}, const std::vector<double>& priors = {});

/// Binarizes then segments.
Layout segment_layout(const GrayImage& img, const LayoutParams& params = {}, const std::vector<double>& priors = {});

}  // namespace receiptforge

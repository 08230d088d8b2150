#include "receiptforge/layout.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace receiptforge {

void BinarizeParams::validate() const {
    if (window < 3 || window % 2 == 0) {
        throw Error(ErrorCode::ConfigError, "binarization window must be odd and >= 3");
    }
    if (!(k > 0.0 && k < 1.0) || !(dynamic_range > 0.0)) {
        throw Error(ErrorCode::ConfigError, "binarization k must lie in (0, 1) and R must be positive");
    }
}

BinaryMask adaptive_binarize(const GrayImage& img, const BinarizeParams& params) {
    params.validate();
    const int w = img.width();
    const int h = img.height();
    const std::size_t stride = static_cast<std::size_t>(w) + 1;
    std::vector<std::int64_t> sum(stride * (h + 1), 0);
    std::vector<std::int64_t> sq(stride * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
        std::int64_t rs = 0, rq = 0;
        const auto row = img.row(y);
        for (int x = 0; x < w; ++x) {
            const std::int64_t v = row[static_cast<std::size_t>(x)];
            rs += v;
            rq += v * v;
            sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + rs;
            sq[(y + 1) * stride + x + 1] = sq[y * stride + x + 1] + rq;
        }
    }
    const auto box = [&](const std::vector<std::int64_t>& t, int x0, int y0, int x1, int y1) {
        return t[y1 * stride + x1] - t[y0 * stride + x1] - t[y1 * stride + x0] + t[y0 * stride + x0];
    };

    const int half = params.window / 2;
    BinaryMask mask(w, h);
    for (int y = 0; y < h; ++y) {
        const int y0 = std::max(0, y - half);
        const int y1 = std::min(h, y + half + 1);
        for (int x = 0; x < w; ++x) {
            const int x0 = std::max(0, x - half);
            const int x1 = std::min(w, x + half + 1);
            const double n = static_cast<double>(x1 - x0) * (y1 - y0);
            const double mean = static_cast<double>(box(sum, x0, y0, x1, y1)) / n;
            const double var = std::max(0.0, static_cast<double>(box(sq, x0, y0, x1, y1)) / n - mean * mean);
            const double threshold = mean * (1.0 + params.k * (std::sqrt(var) / params.dynamic_range - 1.0));
            mask.set(x, y, img.at(x, y) < threshold);
        }
    }
    return mask;
}

namespace {

// Maximal runs of true flags, then runs closer than `min_gap` merged.
std::vector<Span> group_runs(const std::vector<bool>& flags, int offset, int min_gap) {
    std::vector<Span> out;
    const int n = static_cast<int>(flags.size());
    for (int i = 0; i < n;) {
        if (!flags[i]) {
            ++i;
            continue;
        }
        int j = i;
        while (j + 1 < n && flags[j + 1]) ++j;
        const Span run{i + offset, j + offset};
        if (!out.empty() && run.first - out.back().last - 1 < min_gap) {
            out.back().last = run.last;
        } else {
            out.push_back(run);
        }
        i = j + 1;
    }
    return out;
}

PixelRect whole(const BinaryMask& mask) { return {0, 0, mask.width(), mask.height()}; }

std::vector<bool> row_flags(const BinaryMask& mask, const PixelRect& r) {
    std::vector<bool> flags(static_cast<std::size_t>(std::max(0, r.h)));
    for (int y = 0; y < r.h; ++y) {
        int ink = 0;
        for (int x = r.x; x < r.x + r.w; ++x) ink += mask.at(x, r.y + y) ? 1 : 0;
        flags[static_cast<std::size_t>(y)] = ink >= kMinRowInk;
    }
    return flags;
}

std::vector<bool> column_flags(const BinaryMask& mask, const PixelRect& r) {
    std::vector<bool> flags(static_cast<std::size_t>(std::max(0, r.w)));
    for (int x = 0; x < r.w; ++x) {
        bool ink = false;
        for (int y = r.y; y < r.y + r.h && !ink; ++y) ink = mask.at(r.x + x, y);
        flags[static_cast<std::size_t>(x)] = ink;
    }
    return flags;
}

int median(std::vector<int> v) {
    if (v.empty()) return 0;
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

}  // namespace

std::vector<Span> horizontal_bands(const BinaryMask& mask, int min_gap, const PixelRect& region) {
    return group_runs(row_flags(mask, region), region.y, min_gap);
}

std::vector<Span> horizontal_bands(const BinaryMask& mask, int min_gap) {
    return horizontal_bands(mask, min_gap, whole(mask));
}

std::vector<Span> column_runs(const BinaryMask& mask, int min_gap, const PixelRect& region) {
    return group_runs(column_flags(mask, region), region.x, min_gap);
}

int estimate_line_height(const BinaryMask& mask) {
    std::vector<int> heights;
    for (const auto& run : horizontal_bands(mask, 1)) heights.push_back(run.length());
    return median(std::move(heights));
}

int estimate_char_gap(const BinaryMask& mask, const std::vector<PixelRect>& bands) {
    std::vector<int> gaps;
    for (const auto& band : bands) {
        const auto runs = column_runs(mask, 1, band);
        for (std::size_t i = 1; i < runs.size(); ++i) gaps.push_back(runs[i].first - runs[i - 1].last - 1);
    }
    return median(std::move(gaps));
}

std::string_view to_string(BlockKind kind) {
    switch (kind) {
    case BlockKind::Band: return "band";
    case BlockKind::Subblock: return "subblock";
    case BlockKind::Line: return "line";
    }
    return "?";
}

std::vector<PixelRect> vertical_subblocks(const BinaryMask& mask, const PixelRect& band, int min_col_gap,
                                          const std::vector<double>& priors, double prior_tolerance) {
    std::vector<Span> runs = column_runs(mask, min_col_gap, band);
    if (!priors.empty() && !runs.empty()) {
        const double width = mask.width();
        const double tol = prior_tolerance * width;
        const auto raw = column_runs(mask, 1, band);
        for (const double f : priors) {
            const double target = f * width;
            bool satisfied = false;
            for (std::size_t i = 1; i < runs.size() && !satisfied; ++i) {
                const double centre = 0.5 * (runs[i - 1].last + 1 + runs[i].first);
                satisfied = std::abs(centre - target) <= tol;
            }
            if (satisfied) continue;
            // widest blank run near the prior, nearest first on ties
            std::optional<Span> best;
            double best_dist = 0.0;
            for (std::size_t i = 1; i < raw.size(); ++i) {
                const Span gap{raw[i - 1].last + 1, raw[i].first - 1};
                const double centre = 0.5 * (gap.first + gap.last + 1);
                const double dist = std::abs(centre - target);
                if (dist > tol) continue;
                if (!best || gap.length() > best->length() || (gap.length() == best->length() && dist < best_dist)) {
                    best = gap;
                    best_dist = dist;
                }
            }
            if (!best) continue;
            for (std::size_t i = 0; i < runs.size(); ++i) {
                if (runs[i].first < best->first && best->last < runs[i].last) {
                    const Span right{best->last + 1, runs[i].last};
                    runs[i].last = best->first - 1;
                    runs.insert(runs.begin() + static_cast<std::ptrdiff_t>(i) + 1, right);
                    break;
                }
            }
        }
    }
    std::vector<PixelRect> out;
    out.reserve(runs.size());
    for (const auto& r : runs) out.push_back({r.first, band.y, r.length(), band.h});
    return out;
}

std::vector<PixelRect> segment_lines(const BinaryMask& mask, const PixelRect& subblock, int min_gap) {
    std::vector<PixelRect> out;
    for (const auto& rows : horizontal_bands(mask, min_gap, subblock)) {
        const PixelRect strip{subblock.x, rows.first, subblock.w, rows.length()};
        const auto cols = column_runs(mask, subblock.w + 1, strip);
        if (cols.empty()) continue;
        out.push_back({cols.front().first, rows.first, cols.back().last - cols.front().first + 1, rows.length()});
    }
    return out;
}

std::vector<int> Layout::children(int parent) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(blocks.size()); ++i) {
        if (blocks[static_cast<std::size_t>(i)].parent == parent) out.push_back(i);
    }
    return out;
}

std::vector<int> Layout::of_kind(BlockKind kind) const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(blocks.size()); ++i) {
        if (blocks[static_cast<std::size_t>(i)].kind == kind) out.push_back(i);
    }
    return out;
}

Layout segment_layout(const BinaryMask& mask, const LayoutParams& params, const std::vector<double>& priors) {
    Layout layout;
    layout.line_height = estimate_line_height(mask);
    if (layout.line_height == 0) {
        return layout;
    }
    const double lh = layout.line_height;
    layout.band_gap = std::max(1, static_cast<int>(std::lround(params.band_gap_factor * lh)));
    const int line_gap = std::max(1, static_cast<int>(std::lround(params.line_gap_factor * lh)));

    std::vector<PixelRect> bands;
    for (const auto& rows : horizontal_bands(mask, layout.band_gap)) {
        bands.push_back({0, rows.first, mask.width(), rows.length()});
    }
    const int char_gap = estimate_char_gap(mask, bands);
    layout.column_gap = std::max({1, static_cast<int>(std::lround(params.char_gap_factor * char_gap)),
                                  static_cast<int>(std::lround(params.col_gap_line_factor * lh))});

    for (const auto& band : bands) {
        const int band_index = static_cast<int>(layout.blocks.size());
        layout.blocks.push_back({band, BlockKind::Band, -1});
        for (const auto& sub : vertical_subblocks(mask, band, layout.column_gap, priors, params.prior_tolerance)) {
            const int sub_index = static_cast<int>(layout.blocks.size());
            layout.blocks.push_back({sub, BlockKind::Subblock, band_index});
            for (const auto& line : segment_lines(mask, sub, line_gap)) {
                layout.blocks.push_back({line, BlockKind::Line, sub_index});
            }
        }
    }
    return layout;
}

Layout segment_layout(const GrayImage& img, const LayoutParams& params, const std::vector<double>& priors) {
    return segment_layout(adaptive_binarize(img, params.binarize), params, priors);
}

}  // namespace receiptforge

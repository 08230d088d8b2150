#pragma once

// Raster and geometry primitives shared by every pipeline stage.
//
// Coordinates are continuous image coordinates with y pointing down: pixel
// (x, y) covers the unit square [x, x+1) x [y, y+1). Angles are in degrees,
// measured in that frame, so a positive angle turns content clockwise on
// screen.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace receiptforge {

/// 8-bit luminance raster, row-major.
class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0);
    GrayImage(int width, int height, std::vector<std::uint8_t> pixels);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    std::uint8_t at(int x, int y) const { return pixels_[index(x, y)]; }
    std::uint8_t& at(int x, int y) { return pixels_[index(x, y)]; }

    std::span<const std::uint8_t> pixels() const noexcept { return pixels_; }
    std::span<const std::uint8_t> row(int y) const {
        return std::span<const std::uint8_t>(pixels_).subspan(index(0, y), width_);
    }

    bool operator==(const GrayImage&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// Thresholded raster; true marks ink (or a positive heat-map cell).
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }

    bool at(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool value) { bits_[index(x, y)] = value ? 1 : 0; }
    std::size_t count() const;

    bool operator==(const BinaryMask&) const = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Point2d {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2d&) const = default;
};

/// Axis-aligned box; (x, y) is the top-left corner.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }
    double area() const noexcept { return w * h; }

    bool operator==(const BBox&) const = default;
};

/// Corners in top-left, top-right, bottom-right, bottom-left order.
struct Quad {
    std::array<Point2d, 4> corners{};

    double signed_area() const;
    bool is_simple() const;
    BBox bounds() const;
};

/// Color raster as decoded from a file, interleaved RGB.
struct ColorImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

double iou(const BBox& a, const BBox& b);

/// Intersection of two boxes; zero-sized when they do not overlap.
BBox intersect(const BBox& a, const BBox& b);
BBox unite(const BBox& a, const BBox& b);
BBox clamp_to(const BBox& box, int width, int height);

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
GrayImage to_luminance(const ColorImage& raw);

/// Rotates around the image centre with bilinear resampling. The output is
/// sized to hold the whole rotated frame and uncovered pixels are white.
GrayImage rotate(const GrayImage& img, double angle_deg);

/// Where `rotate(img, angle)` moves a point of `img`.
Point2d rotate_point(Point2d p, double angle_deg, int src_width, int src_height);

/// Output dimensions of `rotate`.
std::array<int, 2> rotated_size(int width, int height, double angle_deg);

/// Crops the pixel cells covered by `box` (floor/ceil of its edges) after
/// clamping to the image. Throws InvalidGeometry if nothing remains.
GrayImage crop(const GrayImage& img, const BBox& box);

/// Bilinear resize with pixel-centre alignment.
GrayImage resize(const GrayImage& img, int width, int height);

GrayImage flip180(const GrayImage& img);

/// Pastes `src` into a larger canvas at (x, y), filling the rest with `fill`.
GrayImage pad_to(const GrayImage& src, int width, int height, int x, int y, std::uint8_t fill);

// PNM codecs. P5 is the canonical format; P6 is accepted and converted to
// luminance.
GrayImage decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
GrayImage read_image(const std::string& path);
void write_pgm(const GrayImage& img, const std::string& path);

}  // namespace receiptforge

#include "receiptforge/core.hpp"

#include "receiptforge/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace receiptforge {

GrayImage::GrayImage(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::InvalidGeometry, "image dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::InvalidGeometry, "image dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw Error(ErrorCode::InvalidGeometry, "pixel count does not match dimensions");
    }
}

BinaryMask::BinaryMask(int width, int height, bool fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) {
        throw Error(ErrorCode::InvalidGeometry, "mask dimensions must be non-negative");
    }
    bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// Geometry

namespace {

double cross(Point2d o, Point2d a, Point2d b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool segments_cross(Point2d p1, Point2d p2, Point2d q1, Point2d q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

void require_valid(const BBox& b) {
    if (!(b.w > 0.0) || !(b.h > 0.0)) {
        throw Error(ErrorCode::InvalidGeometry, "box must have positive width and height");
    }
}

}  // namespace

double Quad::signed_area() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& a = corners[i];
        const auto& b = corners[(i + 1) % 4];
        sum += a.x * b.y - b.x * a.y;
    }
    return 0.5 * sum;
}

bool Quad::is_simple() const {
    if (!(signed_area() > 0.0)) {
        return false;
    }
    // Only non-adjacent edges can cross in a quadrilateral.
    return !segments_cross(corners[0], corners[1], corners[2], corners[3]) &&
           !segments_cross(corners[1], corners[2], corners[3], corners[0]);
}

BBox Quad::bounds() const {
    double x0 = corners[0].x, x1 = corners[0].x, y0 = corners[0].y, y1 = corners[0].y;
    for (const auto& c : corners) {
        x0 = std::min(x0, c.x);
        x1 = std::max(x1, c.x);
        y0 = std::min(y0, c.y);
        y1 = std::max(y1, c.y);
    }
    return {x0, y0, x1 - x0, y1 - y0};
}

BBox intersect(const BBox& a, const BBox& b) {
    const double x0 = std::max(a.x, b.x);
    const double y0 = std::max(a.y, b.y);
    const double x1 = std::min(a.right(), b.right());
    const double y1 = std::min(a.bottom(), b.bottom());
    return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

BBox unite(const BBox& a, const BBox& b) {
    const double x0 = std::min(a.x, b.x);
    const double y0 = std::min(a.y, b.y);
    return {x0, y0, std::max(a.right(), b.right()) - x0, std::max(a.bottom(), b.bottom()) - y0};
}

BBox clamp_to(const BBox& box, int width, int height) {
    const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
    const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
    const double x1 = std::clamp(box.right(), 0.0, static_cast<double>(width));
    const double y1 = std::clamp(box.bottom(), 0.0, static_cast<double>(height));
    return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

double iou(const BBox& a, const BBox& b) {
    require_valid(a);
    require_valid(b);
    const double inter = intersect(a, b).area();
    const double uni = a.area() + b.area() - inter;
    return inter / uni;
}

// ---------------------------------------------------------------------------
// Raster operations

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

GrayImage to_luminance(const ColorImage& raw) {
    if (raw.width <= 0 || raw.height <= 0 ||
        raw.rgb.size() != static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.height) * 3) {
        throw Error(ErrorCode::DecodeError, "color raster is malformed");
    }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.height));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = luma(raw.rgb[3 * i], raw.rgb[3 * i + 1], raw.rgb[3 * i + 2]);
    }
    return GrayImage(raw.width, raw.height, std::move(out));
}

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Bilinear sample at continuous coordinate (u, v); pixel centres sit at
// half-integers. Returns -1 when (u, v) falls outside the raster.
double sample_bilinear(const GrayImage& img, double u, double v) {
    if (u < 0.0 || v < 0.0 || u > img.width() || v > img.height()) {
        return -1.0;
    }
    const double fx = u - 0.5;
    const double fy = v - 0.5;
    const int x0 = static_cast<int>(std::floor(fx));
    const int y0 = static_cast<int>(std::floor(fy));
    const double ax = fx - x0;
    const double ay = fy - y0;
    const int w = img.width();
    const int h = img.height();
    const auto px = [&](int x, int y) {
        return static_cast<double>(img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)));
    };
    const double top = px(x0, y0) * (1.0 - ax) + px(x0 + 1, y0) * ax;
    const double bot = px(x0, y0 + 1) * (1.0 - ax) + px(x0 + 1, y0 + 1) * ax;
    return top * (1.0 - ay) + bot * ay;
}

}  // namespace

std::array<int, 2> rotated_size(int width, int height, double angle_deg) {
    const double a = angle_deg * kDegToRad;
    const double c = std::abs(std::cos(a));
    const double s = std::abs(std::sin(a));
    const int w = static_cast<int>(std::ceil(width * c + height * s - 1e-9));
    const int h = static_cast<int>(std::ceil(width * s + height * c - 1e-9));
    return {std::max(w, 1), std::max(h, 1)};
}

Point2d rotate_point(Point2d p, double angle_deg, int src_width, int src_height) {
    const auto [ow, oh] = rotated_size(src_width, src_height, angle_deg);
    const double a = angle_deg * kDegToRad;
    const double c = std::cos(a);
    const double s = std::sin(a);
    const double dx = p.x - src_width / 2.0;
    const double dy = p.y - src_height / 2.0;
    return {c * dx - s * dy + ow / 2.0, s * dx + c * dy + oh / 2.0};
}

GrayImage rotate(const GrayImage& img, double angle_deg) {
    if (!(std::abs(angle_deg) <= 45.0)) {
        throw Error(ErrorCode::InvalidAngle, "rotation is limited to the deskew range [-45, 45] degrees");
    }
    if (angle_deg == 0.0) {
        return img;
    }
    const auto [ow, oh] = rotated_size(img.width(), img.height(), angle_deg);
    const double a = angle_deg * kDegToRad;
    const double c = std::cos(a);
    const double s = std::sin(a);
    const double scx = img.width() / 2.0;
    const double scy = img.height() / 2.0;
    GrayImage out(ow, oh, 255);
    for (int y = 0; y < oh; ++y) {
        const double dy = y + 0.5 - oh / 2.0;
        for (int x = 0; x < ow; ++x) {
            const double dx = x + 0.5 - ow / 2.0;
            // inverse rotation back into the source frame
            const double u = c * dx + s * dy + scx;
            const double v = -s * dx + c * dy + scy;
            const double value = sample_bilinear(img, u, v);
            if (value >= 0.0) {
                out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(value), 0L, 255L));
            }
        }
    }
    return out;
}

GrayImage crop(const GrayImage& img, const BBox& box) {
    const int x0 = std::clamp(static_cast<int>(std::floor(box.x + 1e-9)), 0, img.width());
    const int y0 = std::clamp(static_cast<int>(std::floor(box.y + 1e-9)), 0, img.height());
    const int x1 = std::clamp(static_cast<int>(std::ceil(box.right() - 1e-9)), 0, img.width());
    const int y1 = std::clamp(static_cast<int>(std::ceil(box.bottom() - 1e-9)), 0, img.height());
    if (x1 <= x0 || y1 <= y0) {
        throw Error(ErrorCode::InvalidGeometry, "crop box lies outside the image");
    }
    std::vector<std::uint8_t> out;
    out.reserve(static_cast<std::size_t>(x1 - x0) * static_cast<std::size_t>(y1 - y0));
    for (int y = y0; y < y1; ++y) {
        const auto r = img.row(y);
        out.insert(out.end(), r.begin() + x0, r.begin() + x1);
    }
    return GrayImage(x1 - x0, y1 - y0, std::move(out));
}

GrayImage resize(const GrayImage& img, int width, int height) {
    if (width <= 0 || height <= 0) {
        throw Error(ErrorCode::InvalidGeometry, "resize target must be positive");
    }
    if (width == img.width() && height == img.height()) {
        return img;
    }
    const double sx = static_cast<double>(img.width()) / width;
    const double sy = static_cast<double>(img.height()) / height;
    GrayImage out(width, height);
    for (int y = 0; y < height; ++y) {
        const double v = (y + 0.5) * sy;
        for (int x = 0; x < width; ++x) {
            const double u = (x + 0.5) * sx;
            out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::max(0.0, sample_bilinear(img, u, v))));
        }
    }
    return out;
}

GrayImage flip180(const GrayImage& img) {
    std::vector<std::uint8_t> px(img.pixels().rbegin(), img.pixels().rend());
    return GrayImage(img.width(), img.height(), std::move(px));
}

GrayImage pad_to(const GrayImage& src, int width, int height, int x, int y, std::uint8_t fill) {
    GrayImage out(width, height, fill);
    for (int sy = 0; sy < src.height(); ++sy) {
        const int ty = sy + y;
        if (ty < 0 || ty >= height) continue;
        for (int sx = 0; sx < src.width(); ++sx) {
            const int tx = sx + x;
            if (tx < 0 || tx >= width) continue;
            out.at(tx, ty) = src.at(sx, sy);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// PNM

namespace {

class PnmHeaderReader {
public:
    explicit PnmHeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    long next_int() {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) {
                throw Error(ErrorCode::DecodeError, "PNM header value out of range");
            }
            ++pos_;
            ++digits;
        }
        if (digits == 0) {
            throw Error(ErrorCode::DecodeError, "malformed PNM header");
        }
        return value;
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_offset() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw Error(ErrorCode::DecodeError, "missing separator after PNM header");
        }
        return pos_ + 1;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else {
                break;
            }
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 2;
};

}  // namespace

GrayImage decode_pnm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw Error(ErrorCode::DecodeError, "unsupported image format (expected binary PGM or PPM)");
    }
    const bool color = bytes[1] == '6';
    PnmHeaderReader reader(bytes);
    const long w = reader.next_int();
    const long h = reader.next_int();
    const long maxval = reader.next_int();
    if (w <= 0 || h <= 0 || maxval != 255) {
        throw Error(ErrorCode::DecodeError, "only 8-bit PNM with positive dimensions is supported");
    }
    const std::size_t offset = reader.raster_offset();
    const std::size_t channels = color ? 3 : 1;
    const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
    if (bytes.size() < offset + need) {
        throw Error(ErrorCode::DecodeError, "truncated PNM raster");
    }
    std::vector<std::uint8_t> raster(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(offset + need));
    if (color) {
        return to_luminance(ColorImage{static_cast<int>(w), static_cast<int>(h), std::move(raster)});
    }
    return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(raster));
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels().begin(), img.pixels().end());
    return out;
}

GrayImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open image " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_pnm(bytes);
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot write image " + path);
    }
    const auto bytes = encode_pgm(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace receiptforge

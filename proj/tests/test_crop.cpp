#include "receiptforge/crop.hpp"
#include "receiptforge/error.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace receiptforge;
using Catch::Approx;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Rect {
    double cx, cy, hw, hh, angle;  // angle clockwise on screen, degrees

    // Corners TL, TR, BR, BL after rotation about the centre.
    std::array<Point2d, 4> corners() const {
        const double c = std::cos(angle * kDeg), s = std::sin(angle * kDeg);
        const std::array<Point2d, 4> local{Point2d{-hw, -hh}, Point2d{hw, -hh}, Point2d{hw, hh}, Point2d{-hw, hh}};
        std::array<Point2d, 4> out;
        for (int k = 0; k < 4; ++k) out[k] = {cx + c * local[k].x - s * local[k].y, cy + s * local[k].x + c * local[k].y};
        return out;
    }

    bool contains(double x, double y) const {
        const double c = std::cos(angle * kDeg), s = std::sin(angle * kDeg);
        const double dx = x - cx, dy = y - cy;
        const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
        return std::abs(lx) <= hw && std::abs(ly) <= hh;
    }
};

// Bright rectangle on a dark background, 4x4 supersampled.
GrayImage render(const Rect& r, int w, int h, int paper = 240, int ground = 60) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int inside = 0;
            for (int sy = 0; sy < 4; ++sy)
                for (int sx = 0; sx < 4; ++sx) inside += r.contains(x + (sx + 0.5) / 4, y + (sy + 0.5) / 4);
            img.at(x, y) = static_cast<std::uint8_t>(std::lround(ground + (paper - ground) * inside / 16.0));
        }
    }
    return img;
}

// Distance, along the free axis, between a fitted edge and the true segment
// a-b, evaluated at the segment's ends.
double edge_error(const EdgeLine& e, Point2d a, Point2d b) {
    double worst = 0.0;
    for (const Point2d& p : {a, b}) {
        const double fitted = e.quasi_vertical() ? e.slope * p.y + e.intercept : e.slope * p.x + e.intercept;
        worst = std::max(worst, std::abs(fitted - (e.quasi_vertical() ? p.x : p.y)));
    }
    return worst;
}

void check_edges(const ReceiptEdges& edges, const Rect& r, double angle_tol, double px_tol) {
    const auto c = r.corners();
    CHECK(edges.left.angle_deg == Approx(r.angle).margin(angle_tol));
    CHECK(edges.right.angle_deg == Approx(r.angle).margin(angle_tol));
    CHECK(edges.top.angle_deg == Approx(r.angle).margin(angle_tol));
    CHECK(edges.bottom.angle_deg == Approx(r.angle).margin(angle_tol));
    CHECK(edge_error(edges.left, c[0], c[3]) <= px_tol);
    CHECK(edge_error(edges.right, c[1], c[2]) <= px_tol);
    CHECK(edge_error(edges.top, c[0], c[1]) <= px_tol);
    CHECK(edge_error(edges.bottom, c[3], c[2]) <= px_tol);
}

HeatMap map_with_cells(int gw, int gh, const std::vector<std::pair<int, int>>& cells) {
    HeatMap hm(gw, gh, 227, 227, {"receipt", "not_receipt"},
               std::vector<double>(static_cast<std::size_t>(gw * gh * 2), 0.0));
    for (int i = 0; i < gh; ++i)
        for (int j = 0; j < gw; ++j) hm.set_score(i, j, 1, 1.0);
    for (auto [i, j] : cells) {
        hm.set_score(i, j, 0, 0.9);
        hm.set_score(i, j, 1, 0.1);
    }
    return hm;
}

BBox whole(const GrayImage& img) { return {0, 0, double(img.width()), double(img.height())}; }

}  // namespace

TEST_CASE("wide crop of a fully positive map is the whole image") {
    std::vector<std::pair<int, int>> all;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) all.emplace_back(i, j);
    CHECK(wide_crop(map_with_cells(4, 3, all), {}, 0.0, 908, 681) == BBox{0, 0, 908, 681});
    CHECK(wide_crop(map_with_cells(4, 3, all), {}, 0.05, 908, 681) == BBox{0, 0, 908, 681});
}

TEST_CASE("wide crop of one cell is that cell's window") {
    CHECK(wide_crop(map_with_cells(4, 3, {{1, 2}}), {}, 0.0, 908, 681) == BBox{454, 227, 227, 227});
}

TEST_CASE("wide crop of two cells spans both windows") {
    CHECK(wide_crop(map_with_cells(4, 3, {{1, 0}, {1, 2}}), {}, 0.0, 908, 681) == BBox{0, 227, 681, 227});
}

TEST_CASE("wide crop with margin contains every positive window") {
    const HeatMap hm = map_with_cells(4, 3, {{0, 1}, {2, 2}});
    const BBox b = wide_crop(hm, {}, 0.1, 908, 681);
    for (auto [i, j] : {std::pair{0, 1}, std::pair{2, 2}}) {
        const BBox w = hm.window(i, j);
        CHECK(b.x <= w.x);
        CHECK(b.y <= w.y);
        CHECK(b.right() >= w.right());
        CHECK(b.bottom() >= w.bottom());
    }
}

TEST_CASE("wide crop without positive cells raises NoReceiptRegion") {
    try {
        wide_crop(map_with_cells(2, 2, {}), {}, 0.05, 454, 454);
        FAIL("expected NoReceiptRegion");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NoReceiptRegion);
    }
}

TEST_CASE("edges of an axis-aligned rectangle") {
    const Rect r{200, 220, 100, 150, 0.0};
    const GrayImage img = render(r, 400, 440);
    check_edges(detect_receipt_edges(img, whole(img)), r, 0.2, 1.0);
}

TEST_CASE("edges of a rectangle rotated by five degrees") {
    for (double angle : {5.0, -5.0}) {
        const Rect r{200, 220, 100, 150, angle};
        const GrayImage img = render(r, 400, 440);
        check_edges(detect_receipt_edges(img, whole(img)), r, 1.0, 2.0);
    }
}

TEST_CASE("a uniform image has no edges") {
    try {
        detect_receipt_edges(GrayImage(300, 300, 128), {0, 0, 300, 300});
        FAIL("expected EdgeNotFound");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EdgeNotFound);
    }
}

TEST_CASE("axis-aligned edges give zero skew and a plain crop") {
    const Rect r{200, 220, 100, 150, 0.0};
    const GrayImage img = render(r, 400, 440);
    const CropResult c = rectify(img, detect_receipt_edges(img, whole(img)));
    CHECK(c.skew_angle == Approx(0.0).margin(0.2));
    CHECK(c.rectified == crop(img, c.quad.bounds()));
}

TEST_CASE("rectifying a rotated receipt straightens its edges") {
    const Rect r{220, 240, 100, 150, 5.0};
    const GrayImage img = render(r, 440, 480);
    const CropResult c = rectify(img, detect_receipt_edges(img, whole(img)));
    CHECK(c.skew_angle == Approx(5.0).margin(1.0));
    // Put the output back on a dark ground and measure its edges again.
    const GrayImage again = pad_to(c.rectified, c.rectified.width() + 80, c.rectified.height() + 80, 40, 40, 60);
    const ReceiptEdges e = detect_receipt_edges(again, whole(again));
    for (const EdgeLine* l : {&e.left, &e.right, &e.top, &e.bottom}) CHECK(std::abs(l->angle_deg) < 0.5);
    CHECK(c.rectified.width() == Approx(200).margin(4));
    CHECK(c.rectified.height() == Approx(300).margin(4));
}

TEST_CASE("crossing side edges raise DegenerateQuad") {
    ReceiptEdges e;
    e.left = {EdgeSide::Left, {}, 0.5, 50.0, 0.0};
    e.right = {EdgeSide::Right, {}, -0.5, 250.0, 0.0};
    e.top = {EdgeSide::Top, {}, 0.0, 20.0, 0.0};
    e.bottom = {EdgeSide::Bottom, {}, 0.0, 380.0, 0.0};
    try {
        rectify(GrayImage(300, 400, 128), e);
        FAIL("expected DegenerateQuad");
    } catch (const Error& err) {
        CHECK(err.code() == ErrorCode::DegenerateQuad);
    }
}

TEST_CASE("cropping a rectified output again barely changes the skew") {
    const Rect r{230, 250, 110, 160, -7.0};
    const GrayImage img = render(r, 460, 500);
    const CropResult first = crop_edges_only(img);
    REQUIRE_FALSE(first.fallback);
    const GrayImage again = pad_to(first.rectified, first.rectified.width() + 80, first.rectified.height() + 80, 40, 40, 60);
    const CropResult second = crop_edges_only(again);
    REQUIRE_FALSE(second.fallback);
    CHECK(std::abs(second.skew_angle) < 0.5);
}

TEST_CASE("crop stage refines inside the wide box and ignores clutter outside") {
    // A bright bar far from the receipt would mislead an edge search over
    // the whole frame.
    const Rect r{300, 300, 100, 150, 3.0};
    GrayImage img = render(r, 700, 600);
    for (int y = 0; y < 600; ++y)
        for (int x = 640; x < 680; ++x) img.at(x, y) = 250;
    const HeatMap hm = map_with_cells(3, 2, {{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    const CropResult c = crop_receipt(img, hm, {}, {});
    REQUIRE_FALSE(c.fallback);
    const auto corners = r.corners();
    Quad truth{{corners[0], corners[1], corners[2], corners[3]}};
    CHECK(iou(c.quad.bounds(), truth.bounds()) > 0.95);
}

TEST_CASE("crop stage falls back to the wide box when edges are missing") {
    const GrayImage img(700, 600, 230);
    const HeatMap hm = map_with_cells(3, 2, {{0, 0}});
    const CropResult c = crop_receipt(img, hm, {}, {});
    REQUIRE(c.fallback);
    CHECK(c.skew_angle == 0.0);
    CHECK(c.quad.bounds() == c.wide_box);
}

TEST_CASE("crop stage falls back when only three edges are visible") {
    // Receipt running off the bottom of the frame.
    const Rect r{300, 400, 100, 300, 0.0};
    const GrayImage img = render(r, 600, 600);
    const CropResult c = crop_edges_only(img);
    REQUIRE(c.fallback);
    CHECK(c.skew_angle == 0.0);
}

TEST_CASE("crop config is validated") {
    CropConfig cfg;
    cfg.strip_width = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg = {};
    cfg.margin = -1.0;
    CHECK_THROWS_AS(cfg.validate(), Error);
}

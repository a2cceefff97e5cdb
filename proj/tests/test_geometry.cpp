#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hoidet/geometry.hpp"
#include "hoidet/rng.hpp"

using namespace hoidet;

namespace {

NormBox random_box(Rng& rng) {
    const double w = rng.uniform(0.05, 0.5);
    const double h = rng.uniform(0.05, 0.5);
    const double cx = rng.uniform(w / 2, 1.0 - w / 2);
    const double cy = rng.uniform(h / 2, 1.0 - h / 2);
    return {cx, cy, w, h};
}

}  // namespace

TEST_CASE("corner conversion") {
    const Corners full = to_corners({0.5, 0.5, 1.0, 1.0});
    CHECK(full == Corners{0.0, 0.0, 1.0, 1.0});

    const Corners point = to_corners({0.5, 0.5, 0.0, 0.0});
    CHECK(point == Corners{0.5, 0.5, 0.5, 0.5});

    const Corners c = to_corners({0.3, 0.4, 0.2, 0.2});
    CHECK(c[0] == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(c[2] == doctest::Approx(0.4).epsilon(1e-15));
    CHECK(c[3] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("corner round trip") {
    Rng rng(11);
    for (int i = 0; i < 500; ++i) {
        const NormBox b = random_box(rng);
        const NormBox r = from_corners(to_corners(b));
        CHECK(std::abs(r.cx - b.cx) <= 1e-12);
        CHECK(std::abs(r.cy - b.cy) <= 1e-12);
        CHECK(std::abs(r.w - b.w) <= 1e-12);
        CHECK(std::abs(r.h - b.h) <= 1e-12);
    }
}

TEST_CASE("l1 distance") {
    CHECK(l1({0.3, 0.3, 0.2, 0.2}, {0.3, 0.3, 0.2, 0.2}) == 0.0);
    CHECK(l1({0.5, 0.5, 0.2, 0.2}, {0.55, 0.5, 0.2, 0.2}) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(l1({0, 0, 0, 0}, {1, 1, 1, 1}) == 4.0);

    Rng rng(12);
    for (int i = 0; i < 200; ++i) {
        const NormBox a = random_box(rng), b = random_box(rng);
        CHECK(l1(a, b) == l1(b, a));
        CHECK(l1(a, b) >= 0.0);
    }
}

TEST_CASE("iou known values") {
    const NormBox a = from_corners({0.0, 0.0, 0.2, 0.2});
    const NormBox b = from_corners({0.8, 0.8, 1.0, 1.0});
    CHECK(iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(iou(a, b) == 0.0);

    // intersection 0.25x0.5 = 0.125, union 0.25+0.25-0.125 = 0.375
    const NormBox c = from_corners({0.0, 0.0, 0.5, 0.5});
    const NormBox d = from_corners({0.25, 0.0, 0.75, 0.5});
    CHECK(iou(c, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("giou known values") {
    const NormBox a = from_corners({0.0, 0.0, 0.2, 0.2});
    const NormBox b = from_corners({0.8, 0.8, 1.0, 1.0});
    CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    // hull is the full unit square, union 0.08: 0 - (1-0.08)/1
    CHECK(giou(a, b) == doctest::Approx(-0.92).epsilon(1e-12));

    // hull equals union, so giou reduces to iou
    const NormBox c = from_corners({0.0, 0.0, 0.5, 0.5});
    const NormBox d = from_corners({0.25, 0.0, 0.75, 0.5});
    CHECK(giou(c, d) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("zero-area conventions") {
    const NormBox point{0.5, 0.5, 0.0, 0.0};
    const NormBox other_point{0.25, 0.25, 0.0, 0.0};
    const NormBox real{0.5, 0.5, 0.2, 0.2};
    CHECK(iou(point, point) == 0.0);
    CHECK(iou(point, real) == 0.0);
    CHECK(giou(point, point) == 1.0);
    CHECK(giou(point, other_point) == doctest::Approx(-1.0));
}

TEST_CASE("iou and giou properties") {
    Rng rng(13);
    for (int i = 0; i < 1000; ++i) {
        const NormBox a = random_box(rng), b = random_box(rng);
        CHECK(std::abs(iou(a, b) - iou(b, a)) <= 1e-12);
        CHECK(std::abs(giou(a, b) - giou(b, a)) <= 1e-12);
        const double i_ab = iou(a, b), g_ab = giou(a, b);
        CHECK(i_ab >= 0.0);
        CHECK(i_ab <= 1.0);
        CHECK(g_ab > -1.0);
        CHECK(g_ab <= 1.0);
        CHECK(g_ab <= i_ab + 1e-15);
    }
}

TEST_CASE("giou of a box with itself is 1") {
    Rng rng(14);
    for (int i = 0; i < 200; ++i) {
        const NormBox a = random_box(rng);
        CHECK(giou(a, a) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("translation invariance") {
    Rng rng(15);
    for (int i = 0; i < 200; ++i) {
        NormBox a = random_box(rng), b = random_box(rng);
        a.cx *= 0.5;
        b.cx *= 0.5;
        a.cy *= 0.5;
        b.cy *= 0.5;
        const double dx = rng.uniform(0.0, 0.25), dy = rng.uniform(0.0, 0.25);
        NormBox a2 = a, b2 = b;
        a2.cx += dx;
        b2.cx += dx;
        a2.cy += dy;
        b2.cy += dy;
        CHECK(iou(a2, b2) == doctest::Approx(iou(a, b)).epsilon(1e-9));
        CHECK(giou(a2, b2) == doctest::Approx(giou(a, b)).epsilon(1e-9));
    }
}

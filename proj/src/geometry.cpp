#include "hoidet/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hoidet {

Corners to_corners(const NormBox& box) {
    return {box.cx - box.w / 2.0, box.cy - box.h / 2.0,
            box.cx + box.w / 2.0, box.cy + box.h / 2.0};
}

NormBox from_corners(const Corners& c) {
    return {(c[0] + c[2]) / 2.0, (c[1] + c[3]) / 2.0, c[2] - c[0], c[3] - c[1]};
}

double l1(const NormBox& a, const NormBox& b) {
    return std::abs(a.cx - b.cx) + std::abs(a.cy - b.cy) +
           std::abs(a.w - b.w) + std::abs(a.h - b.h);
}

namespace {

double intersection_area(const Corners& a, const Corners& b) {
    const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
    const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    return iw * ih;
}

double area(const Corners& c) {
    return std::max(0.0, c[2] - c[0]) * std::max(0.0, c[3] - c[1]);
}

}  // namespace

double iou(const NormBox& a, const NormBox& b) {
    const Corners ca = to_corners(a);
    const Corners cb = to_corners(b);
    const double inter = intersection_area(ca, cb);
    const double uni = area(ca) + area(cb) - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

double giou(const NormBox& a, const NormBox& b) {
    const Corners ca = to_corners(a);
    const Corners cb = to_corners(b);
    const double hull_w = std::max(ca[2], cb[2]) - std::min(ca[0], cb[0]);
    const double hull_h = std::max(ca[3], cb[3]) - std::min(ca[1], cb[1]);
    const double hull = hull_w * hull_h;
    if (hull <= 0.0) return 1.0;  // both boxes are the same point
    const double inter = intersection_area(ca, cb);
    const double uni = area(ca) + area(cb) - inter;
    const double overlap = uni > 0.0 ? inter / uni : 0.0;
    return overlap - (hull - uni) / hull;
}

}  // namespace hoidet

#pragma once

#include <array>

namespace hoidet {

/// Axis-aligned box in normalized image coordinates, stored center-size.
/// Model heads regress this form directly (sigmoid range), so it is the
/// canonical representation; corner form is derived on demand.
struct NormBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const NormBox&) const = default;
};

using Corners = std::array<double, 4>;  // x1, y1, x2, y2

Corners to_corners(const NormBox& box);
NormBox from_corners(const Corners& c);

/// Sum of absolute coordinate differences in center-size form.
double l1(const NormBox& a, const NormBox& b);

/// Intersection over union. Zero-area union yields 0.
double iou(const NormBox& a, const NormBox& b);

/// Generalized IoU: iou minus (hull - union)/hull. Two boxes collapsed to
/// the same point give 1; otherwise the plain formula applies.
double giou(const NormBox& a, const NormBox& b);

}  // namespace hoidet

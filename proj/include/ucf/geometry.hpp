#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "ucf/common.hpp"

namespace ucf {

// Axis-aligned box by top-left / bottom-right corners, normally in
// normalized image coordinates. Degenerate boxes are rejected.
struct BoundingBox {
    double x1, y1, x2, y2;

    BoundingBox(double x1_, double y1_, double x2_, double y2_)
        : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
        if (!(x1 < x2) || !(y1 < y2))
            throw ContractError("degenerate bounding box (" + std::to_string(x1_) + "," +
                                std::to_string(y1_) + "," + std::to_string(x2_) + "," +
                                std::to_string(y2_) + ")");
    }

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
};

inline double iou(const BoundingBox& a, const BoundingBox& b) {
    double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

// Generalized IoU: IoU minus the normalized dead area of the smallest
// enclosing box. In [-1, 1]; nonzero gradient for disjoint boxes.
inline double giou(const BoundingBox& a, const BoundingBox& b) {
    double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
    double uni = a.area() + b.area() - inter;
    double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
    double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
    double enc = cw * ch;
    return inter / uni - (enc - uni) / enc;
}

}  // namespace ucf

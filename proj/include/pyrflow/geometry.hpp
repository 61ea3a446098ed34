#pragma once

#include <algorithm>

namespace pyrflow {

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }
    double area() const { return std::max(0.0, w()) * std::max(0.0, h()); }
    double max_side() const { return std::max(w(), h()); }
    bool contains(double x, double y) const { return x1 < x && x < x2 && y1 < y && y < y2; }
};

inline double iou(const Box& a, const Box& b) {
    const double ix1 = std::max(a.x1, b.x1);
    const double iy1 = std::max(a.y1, b.y1);
    const double ix2 = std::min(a.x2, b.x2);
    const double iy2 = std::min(a.y2, b.y2);
    const double iw = std::max(0.0, ix2 - ix1);
    const double ih = std::max(0.0, iy2 - iy1);
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

struct GtObject {
    Box box;
    int cls = 0;
};

}  // namespace pyrflow

#pragma once

#include <algorithm>
#include <cstdint>

namespace dig {

// Axis-aligned pixel box with half-open extents [x_min, x_max) x [y_min, y_max).
struct BBox {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    bool valid() const { return x_min < x_max && y_min < y_max; }

    std::int64_t area() const {
        if (!valid()) return 0;
        return static_cast<std::int64_t>(x_max - x_min) *
               static_cast<std::int64_t>(y_max - y_min);
    }

    bool contains(int px, int py) const {
        return px >= x_min && px < x_max && py >= y_min && py < y_max;
    }

    bool operator==(const BBox&) const = default;
};

inline std::int64_t intersection_area(const BBox& a, const BBox& b) {
    const int w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const int h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0 || h <= 0) return 0;
    return static_cast<std::int64_t>(w) * static_cast<std::int64_t>(h);
}

inline double iou(const BBox& a, const BBox& b) {
    const std::int64_t inter = intersection_area(a, b);
    const std::int64_t uni = a.area() + b.area() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline BBox union_box(const BBox& a, const BBox& b) {
    if (!a.valid()) return b;
    if (!b.valid()) return a;
    return BBox{std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min),
                std::max(a.x_max, b.x_max), std::max(a.y_max, b.y_max)};
}

}  // namespace dig

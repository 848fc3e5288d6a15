#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace uvreenact::detail {

struct Point2
{
    double x = 0.0;
    double y = 0.0;
};

/// Twice the signed area of (a, b, p); positive when p is left of a→b in x-right, y-down axes.
inline double edge_function(const Point2& a, const Point2& b, double px, double py)
{
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
}

/// Top-left fill convention for triangles with positive edge_function(p0, p1, p2).
inline bool is_top_left(const Point2& a, const Point2& b)
{
    return (a.y == b.y && b.x > a.x) || (b.y < a.y);
}

inline bool edge_covers(double w, bool top_left)
{
    return w > 0.0 || (w == 0.0 && top_left);
}

/**
 * Coverage test and barycentric weights of (px, py) for a triangle with positive area2.
 * Weights sum to one; returns false if the point lies outside.
 */
inline bool cover(const Point2& p0, const Point2& p1, const Point2& p2, double area2, double px, double py,
                  std::array<double, 3>& bary)
{
    const double w0 = edge_function(p1, p2, px, py);
    const double w1 = edge_function(p2, p0, px, py);
    const double w2 = edge_function(p0, p1, px, py);
    if (!edge_covers(w0, is_top_left(p1, p2)) || !edge_covers(w1, is_top_left(p2, p0)) ||
        !edge_covers(w2, is_top_left(p0, p1))) {
        return false;
    }
    bary = {w0 / area2, w1 / area2, w2 / area2};
    return true;
}

/// Index range [first, last] of pixel centres (k+0.5)/n·2−1 lying inside [lo, hi]; empty when first > last.
inline std::pair<long, long> pixel_span(double lo, double hi, long n)
{
    const double a = (lo + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
    const double b = (hi + 1.0) * 0.5 * static_cast<double>(n) - 0.5;
    long first = static_cast<long>(std::ceil(a));
    long last = static_cast<long>(std::floor(b));
    if (first < 0) {
        first = 0;
    }
    if (last > n - 1) {
        last = n - 1;
    }
    return {first, last};
}

} // namespace uvreenact::detail

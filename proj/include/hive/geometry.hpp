#pragma once

#include <cmath>

namespace hive {

/// Continuous map position in meters. Origin bottom-left, x east, y north.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;

    double length() const { return std::hypot(x, y); }
    constexpr double length_sq() const { return x * x + y * y; }

    Vec2 normalized() const {
        const double len = length();
        return len > 0.0 ? Vec2{x / len, y / len} : Vec2{};
    }

    Vec2 rotated(double radians) const {
        const double c = std::cos(radians);
        const double s = std::sin(radians);
        return {x * c - y * s, x * s + y * c};
    }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).length(); }
constexpr double distance_sq(Vec2 a, Vec2 b) { return (a - b).length_sq(); }

/// Integer grid cell. Cell (i, j) covers [i, i+1) x [j, j+1).
struct Cell {
    int x = 0;
    int y = 0;
    constexpr bool operator==(const Cell&) const = default;
};

inline Cell cell_of(Vec2 p) {
    return {static_cast<int>(std::floor(p.x)), static_cast<int>(std::floor(p.y))};
}

constexpr Vec2 cell_center(Cell c) { return {c.x + 0.5, c.y + 0.5}; }

}  // namespace hive

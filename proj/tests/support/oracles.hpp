#pragma once
// Independent reference computations used only by tests.

#include <cmath>
#include <vector>

#include "hive/terrain.hpp"

namespace hive::oracle {

/// Bellman-Ford style relaxation over (orthogonal, diagonal) step counts.
/// Deliberately a different algorithm from the Dijkstra implementation.
inline Grid<double> distance_grid(const WorldMap& map, Cell target) {
    constexpr double kRoot2 = 1.4142135623730951;
    struct Steps {
        int a = -1;
        int b = -1;
        double v() const { return a < 0 ? INFINITY : a + b * kRoot2; }
    };
    const int w = map.width();
    const int h = map.height();
    std::vector<Steps> s(static_cast<std::size_t>(w) * h);
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
    auto pass = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && map.passable_mask()[{x, y}]; };
    s[idx(target.x, target.y)] = {0, 0};
    bool changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                if (!pass(x, y)) continue;
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx;
                        const int ny = y + dy;
                        if (!pass(nx, ny)) continue;
                        if (dx != 0 && dy != 0 && !pass(x + dx, y) && !pass(x, y + dy)) continue;
                        const Steps& from = s[idx(nx, ny)];
                        if (from.a < 0) continue;
                        const bool diag = dx != 0 && dy != 0;
                        Steps cand{from.a + (diag ? 0 : 1), from.b + (diag ? 1 : 0)};
                        if (cand.v() < s[idx(x, y)].v()) {
                            s[idx(x, y)] = cand;
                            changed = true;
                        }
                    }
                }
            }
        }
    }
    Grid<double> out(w, h, INFINITY);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out[{x, y}] = s[idx(x, y)].v();
    return out;
}

/// Line of sight by sampling the segment every `step` meters.
inline bool sampled_line_of_sight(const WorldMap& map, Vec2 a, Vec2 b, double step = 0.1) {
    if (map.forest_at(a) || map.forest_at(b)) return false;
    const double len = distance(a, b);
    const int n = static_cast<int>(std::ceil(len / step));
    for (int i = 0; i <= n; ++i) {
        const double t = n == 0 ? 0.0 : static_cast<double>(i) / n;
        const Vec2 p = a + (b - a) * t;
        if (map.opaque_cell(map.cell_at(p))) return false;
    }
    return true;
}

}  // namespace hive::oracle

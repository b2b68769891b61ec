#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hive/geometry.hpp"

namespace hive {

enum class TerrainKind : std::uint8_t { Normal, Forest, Water, Building };

constexpr bool is_passable(TerrainKind k) {
    return k == TerrainKind::Normal || k == TerrainKind::Forest;
}
constexpr bool is_opaque(TerrainKind k) {
    return k == TerrainKind::Forest || k == TerrainKind::Building;
}

/// Rendered names used in map descriptions: normal / trees / water / buildings.
std::string_view terrain_word(TerrainKind k);
std::optional<TerrainKind> terrain_from_word(std::string_view word);

struct Circle {
    Vec2 center;
    double radius = 0.0;
    bool operator==(const Circle&) const = default;
};

struct Rect {
    Vec2 bottom_left;
    Vec2 top_right;
    bool operator==(const Rect&) const = default;
};

using Shape = std::variant<Circle, Rect>;

struct MapFeature {
    std::string name;
    TerrainKind kind = TerrainKind::Normal;
    std::vector<Shape> shapes;
    bool operator==(const MapFeature&) const = default;
};

/// Row-major boolean/kind grid of width x height 1 m cells.
template <class T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill)
        : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }

    T& operator[](Cell c) { return data_[index(c)]; }
    const T& operator[](Cell c) const { return data_[index(c)]; }

    std::size_t index(Cell c) const {
        return static_cast<std::size_t>(c.y) * width_ + static_cast<std::size_t>(c.x);
    }
    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

    bool operator==(const Grid&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// Geometric map plus its 1 m rasterization. Immutable after construction.
class WorldMap {
public:
    /// Validates shapes and rasterizes. Throws ValidationError naming the
    /// offending feature for zero-radius circles or inverted rects.
    WorldMap(int width, int height, std::vector<MapFeature> features);

    int width() const { return width_; }
    int height() const { return height_; }
    const std::vector<MapFeature>& features() const { return features_; }

    const Grid<TerrainKind>& kinds() const { return kinds_; }
    const Grid<std::uint8_t>& passable_mask() const { return passable_; }
    const Grid<std::uint8_t>& opaque_mask() const { return opaque_; }

    bool in_bounds(Vec2 p) const {
        return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ && p.y <= height_;
    }
    /// Cell containing p, with the top/right edge folded into the last cell.
    Cell cell_at(Vec2 p) const;
    TerrainKind kind_at(Vec2 p) const { return kinds_[cell_at(p)]; }
    bool passable_at(Vec2 p) const { return in_bounds(p) && passable_[cell_at(p)] != 0; }
    bool passable_cell(Cell c) const { return passable_.contains(c) && passable_[c] != 0; }
    bool opaque_cell(Cell c) const { return opaque_[c] != 0; }
    bool forest_at(Vec2 p) const { return kind_at(p) == TerrainKind::Forest; }

    /// Number of opaque cells in the inclusive cell rectangle [x0,x1]x[y0,y1].
    int opaque_count(int x0, int y0, int x1, int y1) const;

    /// Nearest passable cell center within max_radius meters, scanning rings
    /// outward. Ties resolved by lower y, then lower x.
    std::optional<Vec2> snap_to_passable(Vec2 p, double max_radius) const;

private:
    int width_;
    int height_;
    std::vector<MapFeature> features_;
    Grid<TerrainKind> kinds_;
    Grid<std::uint8_t> passable_;
    Grid<std::uint8_t> opaque_;
    std::vector<int> opaque_prefix_;  // (w+1)*(h+1) summed-area table
};

struct Masks {
    Grid<std::uint8_t> passable;
    Grid<std::uint8_t> opaque;
};

/// Paint features in order onto a width x height grid; later features win.
Grid<TerrainKind> paint_terrain(int width, int height, const std::vector<MapFeature>& features);
Masks rasterize(const WorldMap& map);

/// True iff a->b crosses no opaque cell and neither endpoint is in forest.
/// Throws OutOfBoundsError for points outside the map.
bool line_of_sight(const WorldMap& map, Vec2 a, Vec2 b);

/// First point along a->b before entering an impassable cell (or leaving the
/// map). Returns b when the whole segment is passable.
Vec2 clip_to_passable(const WorldMap& map, Vec2 a, Vec2 b);

/// Cells whose interior the segment a->b passes through, in order.
std::vector<Cell> traverse_cells(const WorldMap& map, Vec2 a, Vec2 b);

constexpr double kUnreachable = std::numeric_limits<double>::infinity();

class DistanceField {
public:
    DistanceField(Vec2 target, Cell target_cell, Grid<double> dist)
        : target_(target), target_cell_(target_cell), dist_(std::move(dist)) {}

    Vec2 target() const { return target_; }
    Cell target_cell() const { return target_cell_; }
    const Grid<double>& grid() const { return dist_; }
    double at(Cell c) const { return dist_.contains(c) ? dist_[c] : kUnreachable; }
    double at(Vec2 p) const;

private:
    Vec2 target_;
    Cell target_cell_;
    Grid<double> dist_;
};

/// 8-neighbour Dijkstra from target (orthogonal cost 1, diagonal sqrt 2, no
/// diagonal step between two impassable orthogonals). An impassable target is
/// snapped to the nearest passable cell within 5 m; throws ValidationError if
/// none, OutOfBoundsError if outside the map.
DistanceField build_distance_field(const WorldMap& map, Vec2 target);

constexpr double kTargetSnapRadius = 5.0;

/// Unit vector from pos toward the centre of the neighbouring cell with the
/// lowest distance (N, NE, E, SE, S, SW, W, NW order breaks ties). nullopt at
/// the minimum or when unreachable.
std::optional<Vec2> next_step_direction(const WorldMap& map, const DistanceField& field, Vec2 pos);

/// Next cell on the descent path from c, or nullopt at a local minimum.
std::optional<Cell> next_step_cell(const WorldMap& map, const DistanceField& field, Cell c);

/// One line per feature, e.g. "North River: water at (0, 85) - (100, 90)".
std::string describe_map(const WorldMap& map);

/// Inverse of describe_map for a single line; used by tests and map tooling.
MapFeature parse_feature_line(std::string_view line);

}  // namespace hive

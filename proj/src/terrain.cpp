#include "hive/terrain.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <functional>
#include <queue>
#include <sstream>

#include "hive/errors.hpp"

namespace hive {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// N, NE, E, SE, S, SW, W, NW
constexpr std::array<Cell, 8> kNeighbours = {
    Cell{0, 1}, Cell{1, 1}, Cell{1, 0}, Cell{1, -1}, Cell{0, -1}, Cell{-1, -1}, Cell{-1, 0}, Cell{-1, 1},
};

bool covers(const Shape& shape, Vec2 p) {
    if (const auto* c = std::get_if<Circle>(&shape)) {
        return distance_sq(p, c->center) <= c->radius * c->radius;
    }
    const auto& r = std::get<Rect>(shape);
    return p.x >= r.bottom_left.x && p.x < r.top_right.x && p.y >= r.bottom_left.y && p.y < r.top_right.y;
}

void validate_feature(const MapFeature& f) {
    if (f.shapes.empty()) {
        throw ValidationError("map feature '" + f.name + "' has no shapes");
    }
    for (const auto& s : f.shapes) {
        if (const auto* c = std::get_if<Circle>(&s)) {
            if (!(c->radius > 0.0)) {
                throw ValidationError("map feature '" + f.name + "' has a circle with non-positive radius");
            }
        } else {
            const auto& r = std::get<Rect>(s);
            if (!(r.top_right.x > r.bottom_left.x && r.top_right.y > r.bottom_left.y)) {
                throw ValidationError("map feature '" + f.name + "' has an inverted or empty rect");
            }
        }
    }
}

// Diagonal steps are blocked only when both orthogonal neighbours are walls.
bool diagonal_allowed(const WorldMap& map, Cell from, Cell d) {
    if (d.x == 0 || d.y == 0) {
        return true;
    }
    return map.passable_cell({from.x + d.x, from.y}) || map.passable_cell({from.x, from.y + d.y});
}

std::string format_number(double v) {
    if (v == std::round(v)) {
        return std::to_string(static_cast<long long>(std::round(v)));
    }
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// Amanatides-Woo traversal. The visitor receives (cell, t_enter in [0,1]) and
// returns false to stop.
template <class Visitor>
void walk_segment(int width, int height, Vec2 a, Vec2 b, Visitor&& visit) {
    auto fold = [&](Vec2 p) {
        Cell c = cell_of(p);
        if (p.x == width) c.x = width - 1;
        if (p.y == height) c.y = height - 1;
        return c;
    };
    Cell cell = fold(a);
    const Cell last = fold(b);
    const Vec2 d = b - a;

    const int step_x = d.x > 0 ? 1 : (d.x < 0 ? -1 : 0);
    const int step_y = d.y > 0 ? 1 : (d.y < 0 ? -1 : 0);
    const double inf = std::numeric_limits<double>::infinity();
    const double delta_x = step_x != 0 ? std::abs(1.0 / d.x) : inf;
    const double delta_y = step_y != 0 ? std::abs(1.0 / d.y) : inf;
    double t_max_x = inf;
    double t_max_y = inf;
    if (step_x > 0) t_max_x = (cell.x + 1 - a.x) / d.x;
    if (step_x < 0) t_max_x = (cell.x - a.x) / d.x;
    if (step_y > 0) t_max_y = (cell.y + 1 - a.y) / d.y;
    if (step_y < 0) t_max_y = (cell.y - a.y) / d.y;

    double t_enter = 0.0;
    if (!visit(cell, t_enter)) return;
    // Bounded by the Manhattan cell distance; guards against FP stalls.
    const int max_steps = std::abs(last.x - cell.x) + std::abs(last.y - cell.y) + 2;
    for (int i = 0; i < max_steps && !(cell == last); ++i) {
        if (t_max_x < t_max_y) {
            t_enter = t_max_x;
            cell.x += step_x;
            t_max_x += delta_x;
        } else if (t_max_y < t_max_x) {
            t_enter = t_max_y;
            cell.y += step_y;
            t_max_y += delta_y;
        } else {
            // Exact corner crossing: the two side cells are only touched at a point.
            t_enter = t_max_x;
            cell.x += step_x;
            cell.y += step_y;
            t_max_x += delta_x;
            t_max_y += delta_y;
        }
        if (t_enter > 1.0) break;
        if (!visit(cell, t_enter)) return;
    }
}

}  // namespace

std::string_view terrain_word(TerrainKind k) {
    switch (k) {
        case TerrainKind::Normal: return "normal";
        case TerrainKind::Forest: return "trees";
        case TerrainKind::Water: return "water";
        case TerrainKind::Building: return "buildings";
    }
    return "normal";
}

std::optional<TerrainKind> terrain_from_word(std::string_view word) {
    if (word == "normal") return TerrainKind::Normal;
    if (word == "trees" || word == "forest") return TerrainKind::Forest;
    if (word == "water") return TerrainKind::Water;
    if (word == "buildings" || word == "building") return TerrainKind::Building;
    return std::nullopt;
}

Grid<TerrainKind> paint_terrain(int width, int height, const std::vector<MapFeature>& features) {
    Grid<TerrainKind> kinds(width, height, TerrainKind::Normal);
    for (const auto& f : features) {
        validate_feature(f);
        for (const auto& s : f.shapes) {
            double x0, y0, x1, y1;
            if (const auto* c = std::get_if<Circle>(&s)) {
                x0 = c->center.x - c->radius;
                x1 = c->center.x + c->radius;
                y0 = c->center.y - c->radius;
                y1 = c->center.y + c->radius;
            } else {
                const auto& r = std::get<Rect>(s);
                x0 = r.bottom_left.x;
                y0 = r.bottom_left.y;
                x1 = r.top_right.x;
                y1 = r.top_right.y;
            }
            const int cx0 = std::max(0, static_cast<int>(std::floor(x0)) - 1);
            const int cy0 = std::max(0, static_cast<int>(std::floor(y0)) - 1);
            const int cx1 = std::min(width - 1, static_cast<int>(std::ceil(x1)));
            const int cy1 = std::min(height - 1, static_cast<int>(std::ceil(y1)));
            for (int y = cy0; y <= cy1; ++y) {
                for (int x = cx0; x <= cx1; ++x) {
                    if (covers(s, cell_center({x, y}))) {
                        kinds[{x, y}] = f.kind;
                    }
                }
            }
        }
    }
    return kinds;
}

WorldMap::WorldMap(int width, int height, std::vector<MapFeature> features)
    : width_(width), height_(height), features_(std::move(features)) {
    if (width <= 0 || height <= 0) {
        throw ValidationError("map dimensions must be positive");
    }
    kinds_ = paint_terrain(width, height, features_);
    passable_ = Grid<std::uint8_t>(width, height, 1);
    opaque_ = Grid<std::uint8_t>(width, height, 0);
    for (std::size_t i = 0; i < kinds_.data().size(); ++i) {
        passable_.data()[i] = is_passable(kinds_.data()[i]) ? 1 : 0;
        opaque_.data()[i] = is_opaque(kinds_.data()[i]) ? 1 : 0;
    }
    const int w1 = width + 1;
    opaque_prefix_.assign(static_cast<std::size_t>(w1) * (height + 1), 0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            opaque_prefix_[(y + 1) * w1 + (x + 1)] = opaque_[{x, y}] + opaque_prefix_[y * w1 + (x + 1)] +
                                                     opaque_prefix_[(y + 1) * w1 + x] - opaque_prefix_[y * w1 + x];
        }
    }
}

Cell WorldMap::cell_at(Vec2 p) const {
    Cell c = cell_of(p);
    c.x = std::clamp(c.x, 0, width_ - 1);
    c.y = std::clamp(c.y, 0, height_ - 1);
    return c;
}

int WorldMap::opaque_count(int x0, int y0, int x1, int y1) const {
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, width_ - 1);
    y1 = std::min(y1, height_ - 1);
    if (x0 > x1 || y0 > y1) return 0;
    const int w1 = width_ + 1;
    return opaque_prefix_[(y1 + 1) * w1 + (x1 + 1)] - opaque_prefix_[y0 * w1 + (x1 + 1)] -
           opaque_prefix_[(y1 + 1) * w1 + x0] + opaque_prefix_[y0 * w1 + x0];
}

std::optional<Vec2> WorldMap::snap_to_passable(Vec2 p, double max_radius) const {
    const Cell origin = cell_at(p);
    if (passable_[origin]) return p;
    const int r = static_cast<int>(std::ceil(max_radius));
    std::optional<Cell> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int y = origin.y - r; y <= origin.y + r; ++y) {
        for (int x = origin.x - r; x <= origin.x + r; ++x) {
            const Cell c{x, y};
            if (!passable_cell(c)) continue;
            const double d = distance(cell_center(c), p);
            if (d <= max_radius && d < best_d) {
                best_d = d;
                best = c;
            }
        }
    }
    if (!best) return std::nullopt;
    return cell_center(*best);
}

Masks rasterize(const WorldMap& map) { return {map.passable_mask(), map.opaque_mask()}; }

std::vector<Cell> traverse_cells(const WorldMap& map, Vec2 a, Vec2 b) {
    std::vector<Cell> out;
    walk_segment(map.width(), map.height(), a, b, [&](Cell c, double) {
        out.push_back(c);
        return true;
    });
    return out;
}

bool line_of_sight(const WorldMap& map, Vec2 a, Vec2 b) {
    if (!map.in_bounds(a) || !map.in_bounds(b)) {
        throw OutOfBoundsError("line_of_sight endpoint outside map");
    }
    if (map.forest_at(a) || map.forest_at(b)) return false;
    const Cell ca = map.cell_at(a);
    const Cell cb = map.cell_at(b);
    if (map.opaque_count(std::min(ca.x, cb.x), std::min(ca.y, cb.y), std::max(ca.x, cb.x), std::max(ca.y, cb.y)) ==
        0) {
        return true;
    }
    bool clear = true;
    walk_segment(map.width(), map.height(), a, b, [&](Cell c, double) {
        if (map.kinds().contains(c) && map.opaque_cell(c)) {
            clear = false;
            return false;
        }
        return true;
    });
    return clear;
}

Vec2 clip_to_passable(const WorldMap& map, Vec2 a, Vec2 b) {
    const double len = distance(a, b);
    if (len == 0.0) return a;
    Vec2 result = b;
    bool first = true;
    walk_segment(map.width(), map.height(), a, b, [&](Cell c, double t) {
        if (!map.passable_cell(c)) {
            if (first) {
                result = a;
            } else {
                const double back = std::max(0.0, t - 1e-6 / len);
                result = a + (b - a) * back;
            }
            return false;
        }
        first = false;
        return true;
    });
    if (!map.in_bounds(result)) {
        result.x = std::clamp(result.x, 0.0, static_cast<double>(map.width()) - 1e-9);
        result.y = std::clamp(result.y, 0.0, static_cast<double>(map.height()) - 1e-9);
    }
    return result;
}

double DistanceField::at(Vec2 p) const {
    Cell c = cell_of(p);
    c.x = std::clamp(c.x, 0, dist_.width() - 1);
    c.y = std::clamp(c.y, 0, dist_.height() - 1);
    return dist_[c];
}

DistanceField build_distance_field(const WorldMap& map, Vec2 target) {
    if (!map.in_bounds(target)) {
        throw OutOfBoundsError("distance field target outside map");
    }
    auto snapped = map.snap_to_passable(target, kTargetSnapRadius);
    if (!snapped) {
        throw ValidationError("no passable cell within 5 m of target (" + format_number(target.x) + ", " +
                              format_number(target.y) + ")");
    }
    const Cell start = map.cell_at(*snapped);

    // Distances are kept as (orthogonal, diagonal) step counts so that every
    // path length is evaluated as ortho + diag * sqrt2 in one fixed way.
    struct Steps {
        int ortho;
        int diag;
        double value() const { return ortho + diag * kSqrt2; }
    };
    Grid<Steps> steps(map.width(), map.height(), Steps{-1, -1});
    Grid<double> dist(map.width(), map.height(), kUnreachable);

    using Entry = std::pair<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    steps[start] = {0, 0};
    dist[start] = 0.0;
    open.push({0.0, steps.index(start)});
    std::vector<std::uint8_t> done(static_cast<std::size_t>(map.width()) * map.height(), 0);

    while (!open.empty()) {
        const auto [d, idx] = open.top();
        open.pop();
        if (done[idx]) continue;
        done[idx] = 1;
        const Cell c{static_cast<int>(idx % map.width()), static_cast<int>(idx / map.width())};
        const Steps s = steps[c];
        for (const Cell& off : kNeighbours) {
            const Cell n{c.x + off.x, c.y + off.y};
            if (!map.passable_cell(n) || done[steps.index(n)]) continue;
            if (!diagonal_allowed(map, c, off)) continue;
            const bool diag = off.x != 0 && off.y != 0;
            const Steps ns{s.ortho + (diag ? 0 : 1), s.diag + (diag ? 1 : 0)};
            const double nd = ns.value();
            if (nd < dist[n]) {
                dist[n] = nd;
                steps[n] = ns;
                open.push({nd, steps.index(n)});
            }
        }
    }
    return DistanceField(*snapped, start, std::move(dist));
}

std::optional<Cell> next_step_cell(const WorldMap& map, const DistanceField& field, Cell c) {
    const double here = field.at(c);
    if (here == kUnreachable) return std::nullopt;
    std::optional<Cell> best;
    double best_d = here;
    for (const Cell& off : kNeighbours) {
        const Cell n{c.x + off.x, c.y + off.y};
        if (!map.passable_cell(n) || !diagonal_allowed(map, c, off)) continue;
        const double d = field.at(n);
        if (d < best_d) {
            best_d = d;
            best = n;
        }
    }
    return best;
}

std::optional<Vec2> next_step_direction(const WorldMap& map, const DistanceField& field, Vec2 pos) {
    const auto next = next_step_cell(map, field, map.cell_at(pos));
    if (!next) return std::nullopt;
    const Vec2 d = cell_center(*next) - pos;
    if (d.length_sq() == 0.0) return std::nullopt;
    return d.normalized();
}

std::string describe_map(const WorldMap& map) {
    std::string out;
    for (const auto& f : map.features()) {
        out += f.name;
        out += ": ";
        out += terrain_word(f.kind);
        out += " at ";
        bool first = true;
        for (const auto& s : f.shapes) {
            if (!first) out += ", ";
            first = false;
            if (const auto* c = std::get_if<Circle>(&s)) {
                out += "(" + format_number(c->center.x) + ", " + format_number(c->center.y) + ") with radius " +
                       format_number(c->radius);
            } else {
                const auto& r = std::get<Rect>(s);
                out += "(" + format_number(r.bottom_left.x) + ", " + format_number(r.bottom_left.y) + ") - (" +
                       format_number(r.top_right.x) + ", " + format_number(r.top_right.y) + ")";
            }
        }
        out += "\n";
    }
    return out;
}

namespace {

struct LineReader {
    std::string_view s;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    bool eat(std::string_view tok) {
        skip_ws();
        if (s.substr(pos, tok.size()) == tok) {
            pos += tok.size();
            return true;
        }
        return false;
    }
    void expect(std::string_view tok) {
        if (!eat(tok)) {
            throw ValidationError("expected '" + std::string(tok) + "' in map line: " + std::string(s));
        }
    }
    double number() {
        skip_ws();
        double v = 0.0;
        const char* begin = s.data() + pos;
        auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
        if (ec != std::errc{}) {
            throw ValidationError("expected number in map line: " + std::string(s));
        }
        pos += static_cast<std::size_t>(ptr - begin);
        return v;
    }
    Vec2 point() {
        expect("(");
        const double x = number();
        expect(",");
        const double y = number();
        expect(")");
        return {x, y};
    }
};

}  // namespace

MapFeature parse_feature_line(std::string_view line) {
    const auto colon = line.rfind(": ");
    const auto at = line.find(" at ", colon == std::string_view::npos ? 0 : colon);
    if (colon == std::string_view::npos || at == std::string_view::npos) {
        throw ValidationError("malformed map line: " + std::string(line));
    }
    MapFeature f;
    f.name = std::string(line.substr(0, colon));
    const auto kind = terrain_from_word(line.substr(colon + 2, at - colon - 2));
    if (!kind) {
        throw ValidationError("unknown terrain kind in map line: " + std::string(line));
    }
    f.kind = *kind;
    LineReader r{line, at + 4};
    do {
        const Vec2 p = r.point();
        if (r.eat("with radius")) {
            f.shapes.emplace_back(Circle{p, r.number()});
        } else {
            r.expect("-");
            f.shapes.emplace_back(Rect{p, r.point()});
        }
    } while (r.eat(","));
    return f;
}

}  // namespace hive

#include "hive/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "hive/errors.hpp"

namespace hive {

GameState::GameState(std::shared_ptr<const WorldMap> map_, UnitTable types_, std::uint64_t seed_)
    : map(std::move(map_)), types(types_), seed(seed_), rng(seed_) {
    sight_index_ = SpatialHash(map->width(), map->height(), 15.0);
}

const Unit& GameState::unit(Team t, int id) const {
    const auto& v = team(t);
    if (id < 0 || id >= static_cast<int>(v.size())) {
        throw NotFoundError("unknown " + std::string(team_name(t)) + " unit " + std::to_string(id));
    }
    return v[id];
}

int GameState::alive_count(Team t) const {
    return static_cast<int>(std::count_if(team(t).begin(), team(t).end(), [](const Unit& u) { return u.alive(); }));
}

long long GameState::total_health() const {
    long long sum = 0;
    for (const auto& v : units)
        for (const auto& u : v) sum += u.health;
    return sum;
}

void GameState::refresh() {
    double max_sight = 0.0;
    for (std::size_t k = 0; k < kUnitKindCount; ++k) {
        max_sight = std::max(max_sight, types[static_cast<UnitKind>(k)].sight_range);
    }
    sight_index_ = SpatialHash(map->width(), map->height(), std::max(1.0, max_sight));
    std::vector<int> live;
    live.reserve(total_units());
    for (int g = 0; g < total_units(); ++g) {
        if (by_global(g).alive()) live.push_back(g);
    }
    sight_index_.rebuild(live, [this](int g) { return by_global(g).pos; });
}

std::uint64_t GameState::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    feed(static_cast<std::uint64_t>(tick));
    for (const auto& v : units) {
        for (const auto& u : v) {
            feed(std::bit_cast<std::uint64_t>(u.pos.x));
            feed(std::bit_cast<std::uint64_t>(u.pos.y));
            feed(static_cast<std::uint64_t>(static_cast<std::int64_t>(u.health)));
        }
    }
    return h;
}

std::vector<Unit> spawn_roster(const WorldMap& map, const UnitTable& types, Team team,
                               const std::vector<RosterEntry>& entries, Rng& rng) {
    std::vector<Unit> out;
    // Occupancy buckets of 1 m for the spacing test.
    std::vector<std::vector<Vec2>> buckets(static_cast<std::size_t>(map.width()) * map.height());
    auto bucket_at = [&](Cell c) -> std::vector<Vec2>& { return buckets[map.kinds().index(c)]; };
    auto too_close = [&](Vec2 p) {
        const Cell c = map.cell_at(p);
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                const Cell n{c.x + dx, c.y + dy};
                if (!map.kinds().contains(n)) continue;
                for (const Vec2& q : bucket_at(n)) {
                    if (distance_sq(p, q) < kSpawnSpacing * kSpawnSpacing) return true;
                }
            }
        }
        return false;
    };

    for (const auto& e : entries) {
        if (e.count <= 0) {
            throw ValidationError("roster entry for " + std::string(kind_name(e.kind)) + " has non-positive count");
        }
        const double x0 = std::clamp(e.region.bottom_left.x, 0.0, static_cast<double>(map.width()));
        const double y0 = std::clamp(e.region.bottom_left.y, 0.0, static_cast<double>(map.height()));
        const double x1 = std::clamp(e.region.top_right.x, 0.0, static_cast<double>(map.width()));
        const double y1 = std::clamp(e.region.top_right.y, 0.0, static_cast<double>(map.height()));
        if (!(x1 > x0 && y1 > y0)) {
            throw ValidationError("spawn region for " + std::string(kind_name(e.kind)) + " is empty");
        }
        const long long max_attempts = std::max<long long>(2000, 400LL * e.count);
        int placed = 0;
        for (long long attempt = 0; placed < e.count && attempt < max_attempts; ++attempt) {
            Vec2 p{rng.uniform(x0, x1), rng.uniform(y0, y1)};
            p.x = std::min(p.x, static_cast<double>(map.width()) - 1e-9);
            p.y = std::min(p.y, static_cast<double>(map.height()) - 1e-9);
            if (!map.passable_at(p) || too_close(p)) continue;
            bucket_at(map.cell_at(p)).push_back(p);
            Unit u;
            u.id = static_cast<int>(out.size());
            u.team = team;
            u.kind = e.kind;
            u.pos = p;
            u.health = types[e.kind].max_health;
            out.push_back(u);
            ++placed;
        }
        if (placed < e.count) {
            throw ValidationError("spawn region too small for " + std::to_string(e.count) + " " +
                                  std::string(kind_name(e.kind)) + " (placed " + std::to_string(placed) + ")");
        }
    }
    return out;
}

namespace {
std::vector<int>& scratch_indices() {
    thread_local std::vector<int> v;
    return v;
}
}  // namespace

void observe_into(const GameState& state, Team team, int id, Observation& out) {
    const Unit& self = state.unit(team, id);
    if (!self.alive()) {
        throw NotFoundError("cannot observe dead unit " + std::to_string(id));
    }
    const WorldMap& map = *state.map;
    out.self = self;
    out.map = &map;
    out.types = &state.types;
    out.visible.clear();
    out.in_forest = map.forest_at(self.pos);
    if (out.in_forest) return;

    const double sight = state.type_of(self).sight_range;
    const double sight_sq = sight * sight;
    const int me = state.global_index(team, id);
    // No opaque cell within sight: every segment in range is clear.
    const Cell lo = map.cell_at({std::max(0.0, self.pos.x - sight), std::max(0.0, self.pos.y - sight)});
    const Cell hi = map.cell_at({std::min<double>(map.width(), self.pos.x + sight), std::min<double>(map.height(), self.pos.y + sight)});
    const bool open = map.opaque_count(lo.x, lo.y, hi.x, hi.y) == 0;
    auto& seen = scratch_indices();
    seen.clear();
    state.sight_index().for_each_near(self.pos, sight, [&](int g) {
        if (g == me) return;
        const Unit& other = state.by_global(g);
        if (!other.alive()) return;
        if (distance_sq(self.pos, other.pos) > sight_sq) return;
        if (!open && !line_of_sight(map, self.pos, other.pos)) return;
        seen.push_back(g);
    });
    // Global index order is allies then enemies, each by id.
    std::sort(seen.begin(), seen.end());
    out.visible.reserve(seen.size());
    for (int g : seen) {
        const Unit& other = state.by_global(g);
        out.visible.push_back({other.id, other.team, other.kind, other.pos, other.health, other.cooldown_left,
                               std::sqrt(distance_sq(self.pos, other.pos))});
    }
}

Observation observe(const GameState& state, Team team, int id) {
    Observation obs;
    observe_into(state, team, id, obs);
    return obs;
}

namespace {

bool attack_valid(const GameState& state, const Unit& attacker, const Attack& a) {
    if (a.target_team == attacker.team) return false;
    const auto& targets = state.team(a.target_team);
    if (a.target_id < 0 || a.target_id >= static_cast<int>(targets.size())) return false;
    const Unit& target = targets[a.target_id];
    if (!target.alive() || attacker.cooldown_left > 0) return false;
    const double range = state.type_of(attacker).attack_range + kRangeSlack;
    if (distance_sq(attacker.pos, target.pos) > range * range) return false;
    return line_of_sight(*state.map, attacker.pos, target.pos);
}

void apply_attacks(GameState& state, const ActionSet& actions) {
    std::array<std::vector<int>, 2> damage{std::vector<int>(state.units[0].size(), 0),
                                          std::vector<int>(state.units[1].size(), 0)};
    std::array<std::vector<char>, 2> attacked{std::vector<char>(state.units[0].size(), 0),
                                             std::vector<char>(state.units[1].size(), 0)};
    for (std::size_t t = 0; t < 2; ++t) {
        const auto& team = state.units[t];
        for (std::size_t i = 0; i < team.size() && i < actions[t].size(); ++i) {
            const Unit& u = team[i];
            if (!u.alive()) continue;
            const auto* atk = std::get_if<Attack>(&actions[t][i]);
            if (atk == nullptr || !attack_valid(state, u, *atk)) continue;
            damage[team_index(atk->target_team)][atk->target_id] += state.type_of(u).damage;
            attacked[t][i] = 1;
        }
    }
    for (std::size_t t = 0; t < 2; ++t) {
        auto& team = state.units[t];
        for (std::size_t i = 0; i < team.size(); ++i) {
            team[i].health -= damage[t][i];
            if (attacked[t][i]) team[i].cooldown_left = state.type_of(team[i]).cooldown;
        }
    }
}

/// Clipped move; when a wall blocks it, the axis-aligned part that gets
/// furthest along `delta` is taken instead.
Vec2 slide_move(const WorldMap& map, Vec2 from, Vec2 delta) {
    const Vec2 to = from + delta;
    const Vec2 direct = clip_to_passable(map, from, to);
    if (direct == to) return to;
    auto progress = [&](Vec2 p) { const Vec2 d = p - from; return d.x * delta.x + d.y * delta.y; };
    Vec2 best = direct;
    for (const Vec2 axis : {Vec2{delta.x, 0.0}, Vec2{0.0, delta.y}}) {
        const Vec2 p = clip_to_passable(map, from, from + axis);
        if (progress(p) > progress(best) + 1e-12) best = p;
    }
    return best;
}

void apply_moves(GameState& state, const ActionSet& actions) {
    for (std::size_t t = 0; t < 2; ++t) {
        auto& team = state.units[t];
        for (std::size_t i = 0; i < team.size() && i < actions[t].size(); ++i) {
            Unit& u = team[i];
            if (!u.alive()) continue;
            const auto* mv = std::get_if<Move>(&actions[t][i]);
            if (mv == nullptr) continue;
            Vec2 delta = mv->delta;
            const double speed = state.type_of(u).speed;
            const double len = delta.length();
            if (len > speed) delta = delta * (speed / len);
            u.pos = slide_move(*state.map, u.pos, delta);
        }
    }
}

void resolve_pushes(GameState& state) {
    const WorldMap& map = *state.map;
    std::vector<int> live;
    live.reserve(state.total_units());
    for (int g = 0; g < state.total_units(); ++g) {
        if (state.by_global(g).alive()) live.push_back(g);
    }
    std::vector<Vec2> last_valid(state.total_units());
    for (int g : live) last_valid[g] = state.by_global(g).pos;

    SpatialHash buckets(map.width(), map.height(), kContactDistance);
    auto push = [&](int g, Vec2 delta) {
        Unit& u = state.by_global(g);
        u.pos += delta;
        if (map.passable_at(u.pos)) last_valid[g] = u.pos;
    };
    for (int iter = 0; iter < kPushIterations; ++iter) {
        buckets.rebuild(live, [&](int g) { return state.by_global(g).pos; });
        bool moved = false;
        for (int g : live) {
            buckets.for_each_near(state.by_global(g).pos, kContactDistance, [&](int h) {
                if (h <= g) return;
                const Vec2 a = state.by_global(g).pos;
                const Vec2 b = state.by_global(h).pos;
                const double d2 = distance_sq(a, b);
                if (d2 >= kContactDistance * kContactDistance) return;
                const double d = std::sqrt(d2);
                Vec2 dir;
                if (d > 0.0) {
                    dir = (b - a) * (1.0 / d);
                } else {
                    const double angle = static_cast<double>(mix64(static_cast<std::uint64_t>(g) << 32 | h) >> 11) *
                                         0x1.0p-53 * 2.0 * std::numbers::pi;
                    dir = {std::cos(angle), std::sin(angle)};
                }
                const double half = 0.5 * (kContactDistance - d);
                push(g, dir * -half);
                push(h, dir * half);
                moved = true;
            });
        }
        if (!moved) break;
    }
    // Anything left on a wall or off the map returns to its last valid spot.
    for (int g : live) {
        Unit& u = state.by_global(g);
        if (!map.passable_at(u.pos)) u.pos = last_valid[g];
    }
}

}  // namespace

void step_game(GameState& state, const ActionSet& actions) {
    apply_attacks(state, actions);
    apply_moves(state, actions);
    resolve_pushes(state);
    for (auto& team : state.units) {
        for (auto& u : team) {
            if (u.alive() && u.cooldown_left > 0) --u.cooldown_left;
        }
    }
    state.refresh();
    ++state.tick;
}

void write_trajectory(std::ostream& out, const GameState& state) {
    for (const auto& team : state.units) {
        for (const auto& u : team) {
            if (!u.alive()) continue;
            out << state.tick << ',' << u.id << ',' << team_name(u.team) << ',' << kind_name(u.kind) << ','
                << u.pos.x << ',' << u.pos.y << ',' << u.health << '\n';
        }
    }
}

}  // namespace hive

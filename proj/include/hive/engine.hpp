#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <variant>
#include <vector>

#include "hive/rng.hpp"
#include "hive/spatial_hash.hpp"
#include "hive/terrain.hpp"
#include "hive/units.hpp"

namespace hive {

/// Contact distance between unit centres (collision radius 0.5 m).
constexpr double kContactDistance = 1.0;
constexpr int kPushIterations = 4;
/// Minimum spacing between freshly spawned units.
constexpr double kSpawnSpacing = 0.8;
/// Slack on range checks so units resting exactly at contact can strike.
constexpr double kRangeSlack = 1e-6;

struct Noop {
    bool operator==(const Noop&) const = default;
};
struct Move {
    Vec2 delta;
    bool operator==(const Move&) const = default;
};
struct Attack {
    int target_id = 0;
    Team target_team = Team::Enemy;
    bool operator==(const Attack&) const = default;
};
using Action = std::variant<Noop, Move, Attack>;

/// One action per unit, indexed [team][id].
using ActionSet = std::array<std::vector<Action>, 2>;

struct RosterEntry {
    UnitKind kind = UnitKind::Spearmen;
    int count = 0;
    Rect region;
};

struct GameState {
    GameState(std::shared_ptr<const WorldMap> map, UnitTable types, std::uint64_t seed);

    int tick = 0;
    std::array<std::vector<Unit>, 2> units;
    std::shared_ptr<const WorldMap> map;
    UnitTable types;
    std::uint64_t seed = 0;
    Rng rng;

    std::vector<Unit>& team(Team t) { return units[team_index(t)]; }
    const std::vector<Unit>& team(Team t) const { return units[team_index(t)]; }
    const Unit& unit(Team t, int id) const;
    const UnitType& type_of(const Unit& u) const { return types[u.kind]; }

    /// Units are ordered allies first, then enemies, each by id.
    int global_index(Team t, int id) const {
        return t == Team::Ally ? id : static_cast<int>(units[0].size()) + id;
    }
    const Unit& by_global(int g) const {
        const int n0 = static_cast<int>(units[0].size());
        return g < n0 ? units[0][g] : units[1][g - n0];
    }
    Unit& by_global(int g) {
        const int n0 = static_cast<int>(units[0].size());
        return g < n0 ? units[0][g] : units[1][g - n0];
    }
    int total_units() const { return static_cast<int>(units[0].size() + units[1].size()); }
    int alive_count(Team t) const;
    long long total_health() const;

    /// Sight buckets over live units, keyed by global index. Valid after refresh().
    const SpatialHash& sight_index() const { return sight_index_; }
    /// Rebuild derived visibility/distance structures.
    void refresh();

    /// FNV-1a over (tick, positions, healths).
    std::uint64_t hash() const;

private:
    SpatialHash sight_index_;
};

/// Places `entries` by seeded uniform sampling over passable cells of each
/// region, at least kSpawnSpacing apart. Ids are dense in declaration order.
/// Throws ValidationError when a region cannot hold its count.
std::vector<Unit> spawn_roster(const WorldMap& map, const UnitTable& types, Team team,
                               const std::vector<RosterEntry>& entries, Rng& rng);

struct SeenUnit {
    int id = 0;
    Team team = Team::Ally;
    UnitKind kind = UnitKind::Spearmen;
    Vec2 pos;
    int health = 0;
    int cooldown_left = 0;
    double distance = 0.0;
};

struct Observation {
    Unit self;
    bool in_forest = false;
    std::vector<SeenUnit> visible;  // sorted by (team, id)
    Vec2 target;
    const DistanceField* field = nullptr;
    const WorldMap* map = nullptr;
    const UnitTable* types = nullptr;

    const UnitType& my_type() const { return (*types)[self.kind]; }
};

/// Local view of a live unit: everything within sight range and line of
/// sight, nothing when standing in forest. Throws NotFoundError for dead or
/// unknown units.
Observation observe(const GameState& state, Team team, int id);
void observe_into(const GameState& state, Team team, int id, Observation& out);

/// Applies one tick in the fixed phase order: attacks (simultaneous), moves
/// (clipped at walls), pushes, wall recovery, refresh. Stale or invalid
/// attacks are ignored.
void step_game(GameState& state, const ActionSet& actions);

/// Line-delimited trajectory record per live unit: tick,id,team,type,x,y,health.
void write_trajectory(std::ostream& out, const GameState& state);

}  // namespace hive

#include "doctest.h"
#include "hive/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace hive;

namespace {

struct Battle {
    std::shared_ptr<const WorldMap> map;
    GameState state;
    AssignmentTable table;
};

Battle make_battle(std::uint64_t seed) {
    auto map = std::make_shared<const WorldMap>(
        120, 120,
        std::vector<MapFeature>{{"Wood", TerrainKind::Forest, {Circle{{60, 60}, 8}}},
                                {"River", TerrainKind::Water, {Rect{{0, 80}, {120, 84}}}},
                                {"Bridge", TerrainKind::Normal, {Rect{{55, 80}, {65, 84}}}}});
    Battle b{map, GameState(map, UnitTable::standard(), seed), {}};
    Rng rng(seed);
    const auto types = UnitTable::standard();
    b.state.team(Team::Ally) = spawn_roster(*map, types, Team::Ally,
                                            {{UnitKind::Spearmen, 200, Rect{{20, 20}, {60, 40}}},
                                             {UnitKind::Archer, 200, Rect{{20, 20}, {60, 40}}}},
                                            rng);
    b.state.team(Team::Enemy) = spawn_roster(*map, types, Team::Enemy,
                                             {{UnitKind::Spearmen, 300, Rect{{40, 40}, {100, 75}}},
                                              {UnitKind::Cavalry, 100, Rect{{40, 90}, {100, 110}}}},
                                             rng);
    b.state.refresh();
    const auto fields = build_distance_fields(*map, {{60, 100}, {60, 20}}, ExecPolicy::Serial);
    const auto& lib = bt::standard_library();
    for (const auto& u : b.state.team(Team::Ally)) {
        const auto& tree = lib.find(u.kind == UnitKind::Archer ? bt::kLongRange : bt::kAttackAndMove)->second;
        b.table[0].push_back({tree, fields[0], fields[0]->target()});
    }
    for (const auto& u : b.state.team(Team::Enemy)) {
        b.table[1].push_back({lib.find(bt::kCloseRange)->second, fields[1], fields[1]->target()});
        (void)u;
    }
    return b;
}

}  // namespace

TEST_CASE("parallel decisions equal the serial reference, tick by tick") {
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
    auto serial = make_battle(11);
    auto parallel = make_battle(11);
    for (int tick = 0; tick < 40; ++tick) {
        const auto a = decide_actions(serial.state, serial.table, ExecPolicy::Serial);
        const auto b = decide_actions(parallel.state, parallel.table, ExecPolicy::Parallel);
        REQUIRE(a == b);
        step_game(serial.state, a);
        step_game(parallel.state, b);
        REQUIRE(serial.state.hash() == parallel.state.hash());
    }
}

TEST_CASE("decisions: dead units and unassigned units emit Noop") {
    auto b = make_battle(3);
    b.state.team(Team::Ally)[0].health = 0;
    b.table[1].clear();
    b.state.refresh();
    const auto a = decide_actions(b.state, b.table, ExecPolicy::Serial);
    CHECK(a[0][0] == Action{Noop{}});
    for (const auto& act : a[1]) CHECK(act == Action{Noop{}});
}

TEST_CASE("distance fields built in parallel equal serial ones") {
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
    auto b = make_battle(1);
    std::vector<Vec2> targets;
    for (int i = 0; i < 12; ++i) targets.push_back({5.0 + 9 * i, 5.0 + 9 * i});
    const auto s = build_distance_fields(*b.map, targets, ExecPolicy::Serial);
    const auto p = build_distance_fields(*b.map, targets, ExecPolicy::Parallel);
    REQUIRE(s.size() == p.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(s[i]->grid() == p[i]->grid());
        CHECK(s[i]->target_cell() == p[i]->target_cell());
    }
    // A target in the middle of a lake propagates the error out of the parallel region.
    auto lake = std::make_shared<const WorldMap>(
        50, 50, std::vector<MapFeature>{{"Lake", TerrainKind::Water, {Rect{{10, 10}, {40, 40}}}}});
    CHECK_THROWS(build_distance_fields(*lake, {{5, 5}, {25, 25}}, ExecPolicy::Parallel));
}

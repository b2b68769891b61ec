// Serial reference vs OpenMP kernels. Set OMP_NUM_THREADS to vary the
// parallel side; with one thread the two should be on par.
#include <benchmark/benchmark.h>

#include "hive/kernels.hpp"
#include "hive/scenario.hpp"

using namespace hive;

namespace {

ExecPolicy policy_of(const benchmark::State& st) { return st.range(1) ? ExecPolicy::Parallel : ExecPolicy::Serial; }

/// Coordinate rescaled to n units in total, every unit on a library tree.
struct Battle {
    Scenario scenario;
    GameState state;
    AssignmentTable table;

    explicit Battle(int n)
        : scenario(scale_scenario(load_builtin_scenario("coordinate"), n / 2, n / 2)),
          state(initial_state(scenario, 1)) {
        const auto fields = build_distance_fields(*scenario.map, {{75, 0}, {75, 150}}, ExecPolicy::Serial);
        const auto& lib = bt::standard_library();
        for (const auto& u : state.team(Team::Ally)) {
            const auto& tree = lib.find(u.kind == UnitKind::Archer ? bt::kLongRange : bt::kAttackAndMove)->second;
            table[0].push_back({tree, fields[0], fields[0]->target()});
        }
        for (std::size_t i = 0; i < state.team(Team::Enemy).size(); ++i)
            table[1].push_back({lib.find(bt::kAttackAndMove)->second, fields[1], fields[1]->target()});
    }
};

void BM_DecideActions(benchmark::State& st) {
    Battle b(static_cast<int>(st.range(0)));
    const auto policy = policy_of(st);
    for (auto _ : st) benchmark::DoNotOptimize(decide_actions(b.state, b.table, policy));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_Tick(benchmark::State& st) {
    Battle b(static_cast<int>(st.range(0)));
    const auto policy = policy_of(st);
    for (auto _ : st) step_game(b.state, decide_actions(b.state, b.table, policy));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_DistanceFields(benchmark::State& st) {
    const auto scenario = load_builtin_scenario("strategize_points");
    std::vector<Vec2> targets;
    for (int i = 0; i < st.range(0); ++i) targets.push_back({20.0 + 20 * i, 60.0 + 10 * (i % 3)});
    const auto policy = policy_of(st);
    for (auto _ : st) benchmark::DoNotOptimize(build_distance_fields(*scenario.map, targets, policy));
}

}  // namespace

BENCHMARK(BM_DecideActions)->ArgsProduct({{1000, 4000}, {0, 1}})->ArgNames({"units", "parallel"});
BENCHMARK(BM_Tick)->ArgsProduct({{1000, 4000}, {0, 1}})->ArgNames({"units", "parallel"});
BENCHMARK(BM_DistanceFields)->ArgsProduct({{8}, {0, 1}})->ArgNames({"targets", "parallel"});

BENCHMARK_MAIN();

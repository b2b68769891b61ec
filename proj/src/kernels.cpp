#include "hive/kernels.hpp"

#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hive {

namespace {

Action decide_one(const GameState& state, const UnitAssignment* assignment, Team team, int id, Observation& obs,
                  const bt::Params& params) {
    if (assignment == nullptr || !assignment->tree) return Noop{};
    observe_into(state, team, id, obs);
    obs.target = assignment->target;
    obs.field = assignment->field.get();
    Rng rng = unit_rng(state.seed, state.tick, team, id);
    auto result = bt::eval_bt(*assignment->tree, obs, rng, params);
    return result.action.value_or(Noop{});
}

const UnitAssignment* assignment_for(const AssignmentTable& table, Team team, int id) {
    const auto& v = table[team_index(team)];
    return id < static_cast<int>(v.size()) ? &v[id] : nullptr;
}

}  // namespace

int parallel_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

ActionSet decide_actions(const GameState& state, const AssignmentTable& assignments, ExecPolicy policy,
                         const bt::Params& params) {
    ActionSet actions;
    for (std::size_t t = 0; t < 2; ++t) actions[t].assign(state.units[t].size(), Noop{});
    const int total = state.total_units();

    if (policy == ExecPolicy::Serial) {
        Observation obs;
        for (int g = 0; g < total; ++g) {
            const Unit& u = state.by_global(g);
            if (!u.alive()) continue;
            actions[team_index(u.team)][u.id] =
                decide_one(state, assignment_for(assignments, u.team, u.id), u.team, u.id, obs, params);
        }
        return actions;
    }

    std::exception_ptr failure;
#pragma omp parallel
    {
        Observation obs;
#pragma omp for schedule(dynamic, 64)
        for (int g = 0; g < total; ++g) {
            const Unit& u = state.by_global(g);
            if (!u.alive()) continue;
            try {
                actions[team_index(u.team)][u.id] =
                    decide_one(state, assignment_for(assignments, u.team, u.id), u.team, u.id, obs, params);
            } catch (...) {
#pragma omp critical(hive_decide_failure)
                if (!failure) failure = std::current_exception();
            }
        }
    }
    if (failure) std::rethrow_exception(failure);
    return actions;
}

std::vector<std::shared_ptr<const DistanceField>> build_distance_fields(const WorldMap& map,
                                                                        const std::vector<Vec2>& targets,
                                                                        ExecPolicy policy) {
    std::vector<std::shared_ptr<const DistanceField>> out(targets.size());
    const int n = static_cast<int>(targets.size());
    if (policy == ExecPolicy::Serial) {
        for (int i = 0; i < n; ++i) out[i] = std::make_shared<const DistanceField>(build_distance_field(map, targets[i]));
        return out;
    }
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < n; ++i) {
        try {
            out[i] = std::make_shared<const DistanceField>(build_distance_field(map, targets[i]));
        } catch (...) {
#pragma omp critical(hive_field_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace hive

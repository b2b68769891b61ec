#pragma once

#include <array>
#include <memory>
#include <vector>

#include "hive/bt.hpp"
#include "hive/engine.hpp"

namespace hive {

/// What a unit is currently told to do. A null tree means "stand".
struct UnitAssignment {
    std::shared_ptr<const bt::Node> tree;
    std::shared_ptr<const DistanceField> field;
    Vec2 target;
};

using AssignmentTable = std::array<std::vector<UnitAssignment>, 2>;

enum class ExecPolicy { Serial, Parallel };

/// Per-unit generator for a tick; independent of evaluation order.
inline Rng unit_rng(std::uint64_t seed, int tick, Team team, int id) {
    return Rng::stream(seed, static_cast<std::uint64_t>(tick), team_index(team), static_cast<std::uint64_t>(id));
}

/// Observe + evaluate every live unit against the frozen state. The serial
/// path is the reference; the OpenMP path must produce identical actions.
ActionSet decide_actions(const GameState& state, const AssignmentTable& assignments, ExecPolicy policy,
                         const bt::Params& params = {});

/// One field per target; targets are independent so the parallel path
/// splits them across threads.
std::vector<std::shared_ptr<const DistanceField>> build_distance_fields(const WorldMap& map,
                                                                        const std::vector<Vec2>& targets,
                                                                        ExecPolicy policy);

/// Number of OpenMP threads available (1 when built without OpenMP).
int parallel_threads();

}  // namespace hive

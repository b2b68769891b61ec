#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hive/plan.hpp"

namespace hive {

/// Version of the simulation rules. Replays from another version are refused.
inline constexpr std::string_view kEngineVersion = "hive-engine/1";

struct GlobalObjective {
    enum class Kind { Elimination, ReachPoint, DefendPoint };
    Kind kind = Kind::Elimination;
    Vec2 point;           // ReachPoint / DefendPoint
    double radius = 3.0;  // meters
    bool operator==(const GlobalObjective&) const = default;
};

std::string_view objective_kind_name(GlobalObjective::Kind k);

/// Enemy roster entry with its controller: a library tree and a route of
/// target positions walked in order.
struct EnemyGroup {
    RosterEntry roster;
    std::string tree;
    std::vector<Vec2> route;
    bool operator==(const EnemyGroup&) const = default;
};

struct Marker {
    std::string label;
    Cell pos;
    bool operator==(const Marker&) const = default;
};

struct Scenario {
    std::string name;
    std::string title;
    std::shared_ptr<const WorldMap> map;
    UnitTable types = UnitTable::standard();
    std::vector<RosterEntry> allies;
    std::vector<EnemyGroup> enemies;
    GlobalObjective objective;
    int max_ticks = 300;
    std::vector<Marker> markers;  // preset markers, shown only when an ability asks for them
    std::string mission;          // closing paragraph of the system prompt
    plan::PositionRule position_rule;
    /// An enemy moves on to the next route point once this close.
    double waypoint_radius = 6.0;

    int ally_count() const;
    int enemy_count() const;
};

/// One of the benchmark's ability tests: a scenario plus prompt options.
struct AbilityTest {
    std::string name;      // coordinate, exploit_weakness, follow_markers, exploit_terrain, strategize_points
    std::string scenario;  // scenario name
    bool with_markers = false;
};

const std::vector<AbilityTest>& ability_tests();
const AbilityTest& ability_test(std::string_view name);

/// Root of the shipped data files; $HIVE_DATA_DIR overrides the build default.
std::filesystem::path data_dir();

/// Loads `<dir>/scenarios/<name>.json` and the map it references.
Scenario load_scenario(const std::filesystem::path& file);
Scenario load_builtin_scenario(std::string_view name);
/// Coordinate, ExploitWeakness, MarkersTerrain, StrategizePoints.
std::vector<Scenario> builtin_scenarios();
std::vector<std::string> builtin_scenario_names();

/// Map file: "size: W H" followed by one feature per line in the
/// describe_map format. Blank lines and lines starting with '#' are skipped.
std::shared_ptr<const WorldMap> load_map_file(const std::filesystem::path& file);
std::string map_file_text(const WorldMap& map);

/// Copy with every roster entry rescaled so the teams total `allies` and
/// `enemies` units (largest-remainder rounding, entry order kept).
Scenario scale_scenario(const Scenario& scenario, int allies, int enemies);

/// Canonical JSON of everything that changes episode results.
std::string scenario_fingerprint(const Scenario& scenario);
/// FNV-1a of the fingerprint, hex.
std::string config_hash(const Scenario& scenario);

/// Builds the initial state: allies then enemies spawned from a seeded stream.
GameState initial_state(const Scenario& scenario, std::uint64_t seed);

enum class Outcome { Win, Loss, Tie, EarlyCompletion, InvalidPlan, NoPlan };

std::string_view outcome_name(Outcome o);
std::optional<Outcome> outcome_from_name(std::string_view name);
/// Win 2, Tie/EarlyCompletion 1, everything else 0.
int outcome_rank(Outcome o);

struct EpisodeMetrics {
    double pct_enemies_eliminated = 0.0;
    std::optional<double> min_ally_distance_to_objective;  // point objectives only
    int ticks_elapsed = 0;
    int ally_survivors = 0;
    int enemy_survivors = 0;
    bool operator==(const EpisodeMetrics&) const = default;
};

/// Win/Loss from the global objective, or nullopt while undecided.
std::optional<Outcome> adjudicate(const Scenario& scenario, const GameState& state);

/// Final metrics; `best_distance` is the closest any live ally came to the
/// objective point over the episode.
EpisodeMetrics compute_metrics(const Scenario& scenario, const GameState& state, std::optional<double> best_distance);

/// A model response after extraction, parsing and validation.
struct PreparedPlan {
    std::string response;  // full assistant text
    std::shared_ptr<const plan::Plan> plan;
    std::optional<Outcome> failure;  // NoPlan or InvalidPlan
    std::string error;
    std::vector<plan::Violation> violations;
    int blocks = 0;

    bool ok() const { return plan != nullptr; }
};

PreparedPlan prepare_plan(const Scenario& scenario, std::string response, const plan::ValidationOptions& options = {});

/// "error: ..." / "warning [Overlap] ..." lines for a prepared plan.
std::vector<std::string> plan_diagnostics(const PreparedPlan& p);

struct TickInfo {
    int tick = 0;
    std::vector<int> achieved;  // plan steps achieved on this tick
};

struct EpisodeOptions {
    std::uint64_t seed = 0;
    ExecPolicy policy = ExecPolicy::Parallel;
    bool record_hashes = false;
    /// Measure simulation wall time. Off by default so records stay byte-stable.
    bool record_wall_time = false;
    /// Called with the initial state (tick 0) and after every tick.
    std::function<void(const GameState&, const TickInfo&)> on_tick;
};

struct ReplayRecord {
    int schema_version = 1;
    std::string engine_version = std::string(kEngineVersion);
    std::string config_hash;
    std::string scenario;
    std::string ability;
    std::string provider;
    std::string model;
    double temperature = 0.0;
    std::string prompt;
    std::string response;
    std::string plan_text;        // raw block
    std::string plan_normalized;  // print_plan of the parsed plan
    std::vector<std::string> diagnostics;
    std::uint64_t seed = 0;
    int ally_units = 0;
    int enemy_units = 0;
    Outcome outcome = Outcome::NoPlan;
    EpisodeMetrics metrics;
    std::vector<int> achieved_steps;
    std::uint64_t final_hash = 0;
    std::optional<double> model_latency_s;
    std::optional<double> sim_wall_s;
    std::vector<std::uint64_t> tick_hashes;  // only with record_hashes

    bool operator==(const ReplayRecord&) const = default;
};

/// Runs one episode. Plans that failed preparation short-circuit with their
/// failure outcome and no simulated ticks.
ReplayRecord run_episode(const Scenario& scenario, const PreparedPlan& prepared, const EpisodeOptions& options);

class ReplayVersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string replay_to_json(const ReplayRecord& record);
ReplayRecord replay_from_json(const std::string& text);
void save_replay(const ReplayRecord& record, const std::filesystem::path& file);
/// Throws ReplayVersionError for another schema or engine version.
ReplayRecord load_replay(const std::filesystem::path& file);

/// Re-runs a record against `scenario` (rescaled to the recorded roster
/// sizes). Throws ReplayVersionError when the scenario config hash differs.
ReplayRecord replay_episode(const ReplayRecord& record, const Scenario& scenario,
                            ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace hive

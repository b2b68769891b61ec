#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hive/bt.hpp"
#include "hive/kernels.hpp"

namespace hive::plan {

/// One entry of a unit list: a single id or a half-open slice with optional ends.
struct IdRange {
    std::optional<int> begin;
    std::optional<int> end;
    bool single = false;  // written as a bare integer

    static IdRange one(int id) { return {id, id + 1, true}; }
    static IdRange slice(std::optional<int> a, std::optional<int> b) { return {a, b, false}; }
    bool operator==(const IdRange&) const = default;
};

/// "all" or a bracketed list of ids and slices.
struct UnitSelector {
    bool all = false;
    std::vector<IdRange> ranges;

    static UnitSelector everyone() { return {true, {}}; }
    /// Sorted, de-duplicated ids in [0, roster_size).
    std::vector<int> resolve(int roster_size) const;
    bool operator==(const UnitSelector&) const = default;
};

enum class BehaviorName { AttackInCloseRange, AttackAndMove, AttackInLongRange, FollowMap, Stand };

std::string_view behavior_word(BehaviorName b);
std::optional<BehaviorName> behavior_from_word(std::string_view w);
/// Library tree used for a plan behaviour.
std::string_view library_tree_for(BehaviorName b);

struct PlanBehavior {
    BehaviorName name = BehaviorName::Stand;
    bt::UnitFilter targets;  // empty = any
    bool operator==(const PlanBehavior&) const = default;
};

struct Group {
    UnitSelector units;
    std::optional<Cell> target;  // integer map coordinates
    PlanBehavior behavior;
    bool operator==(const Group&) const = default;
};

struct Objective {
    enum class Kind { Position, Elimination };
    Kind kind = Kind::Position;
    UnitSelector targets;  // enemies, Elimination only
    bool operator==(const Objective&) const = default;
};

struct Step {
    int id = 0;
    std::vector<int> prerequisites;
    Objective objective;
    std::vector<Group> groups;
    int line = 0;  // source line of the "Step" header
    bool operator==(const Step& o) const {
        return id == o.id && prerequisites == o.prerequisites && objective == o.objective && groups == o.groups;
    }
};

struct Plan {
    std::vector<Step> steps;  // in source order, ids unique
    std::string raw_text;     // the block between the markers

    const Step* find(int id) const;
    bool operator==(const Plan& o) const { return steps == o.steps; }
};

/// No BEGIN PLAN / END PLAN block in the text.
class NoPlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The block exists but does not follow the plan grammar.
class InvalidPlanError : public std::runtime_error {
public:
    InvalidPlanError(const std::string& message, int line, std::string token = {});
    int line() const { return line_; }
    const std::string& token() const { return token_; }

private:
    int line_;
    std::string token_;
};

/// Text strictly between the first "BEGIN PLAN" and the next "END PLAN",
/// or nullopt. `blocks` receives the number of complete blocks found.
std::optional<std::string> extract_plan_block(std::string_view text, int* blocks = nullptr);

/// Parses model output. Surrounding prose is ignored; line numbers in errors
/// refer to the full input.
Plan parse_plan(std::string_view text);

/// Canonical text including the BEGIN/END markers.
std::string print_plan(const Plan& plan);

enum class Severity { Warning, Fatal };

struct Violation {
    enum class Kind { Bounds, EmptySlice, Overlap, DanglingPrerequisite, Cycle, PositionOutOfBounds, Unreachable };
    Kind kind;
    Severity severity;
    int step = -1;
    std::string message;
};

std::string_view violation_name(Violation::Kind k);

struct ValidationOptions {
    bool overlap_fatal = false;
};

struct RosterSizes {
    int allies = 0;
    int enemies = 0;
};

std::vector<Violation> validate_plan(const Plan& plan, RosterSizes rosters, const WorldMap& map,
                                     const ValidationOptions& options = {});
bool has_fatal(const std::vector<Violation>& violations);

/// Steps that are not achieved and whose prerequisites are all achieved.
std::set<int> activate_steps(const Plan& plan, const std::set<int>& achieved);

/// Distance fields keyed by target cell, built on first use.
class FieldCache {
public:
    explicit FieldCache(std::shared_ptr<const WorldMap> map, ExecPolicy policy = ExecPolicy::Parallel)
        : map_(std::move(map)), policy_(policy) {}

    std::shared_ptr<const DistanceField> get(Cell target);
    /// Builds any missing fields for `targets` in one batch.
    void prefetch(const std::vector<Cell>& targets);
    std::size_t size() const { return fields_.size(); }

private:
    static long long key(Cell c) { return (static_cast<long long>(c.y) << 32) | static_cast<unsigned>(c.x); }
    std::shared_ptr<const WorldMap> map_;
    ExecPolicy policy_;
    std::map<long long, std::shared_ptr<const DistanceField>> fields_;
};

/// Applies the groups of every active step, ascending step id, groups in
/// order; later writes win. Units outside all groups keep their assignment.
/// Returns the number of units written.
int assign_behaviors(const Plan& plan, const std::set<int>& active, const GameState& state, FieldCache& fields,
                     std::vector<UnitAssignment>& allies);

/// Assignment every ally starts with: the stand tree, no target.
UnitAssignment default_assignment();

/// How close a group must get for a position step to count.
struct PositionRule {
    double base_radius = 3.0;
    /// Add the radius of a disc holding the other live units of the group at ~1 unit/m^2.
    bool crowd_term = true;
    /// Never go below the follow_map stop distance of the group's behaviour.
    bool stop_term = true;
    bt::Params params;

    static PositionRule strict() { return {3.0, false, false, {}}; }
    bool operator==(const PositionRule&) const = default;
};

double position_radius(const PositionRule& rule, const Group& group, const UnitType& type, int live_in_group);

/// Ids of active steps whose objective holds in `state`.
std::vector<int> check_step_objectives(const Plan& plan, const std::set<int>& active, const GameState& state,
                                       const PositionRule& rule = {});

/// Mutable progress of a plan through an episode.
class PlanTracker {
public:
    PlanTracker(std::shared_ptr<const Plan> plan, PositionRule rule = {});

    const Plan& plan() const { return *plan_; }
    const std::set<int>& achieved() const { return achieved_; }
    const std::set<int>& active() const { return active_; }
    bool complete() const { return achieved_.size() == plan_->steps.size(); }

    /// Assigns behaviours for the initial active set.
    void start(const GameState& state, FieldCache& fields, std::vector<UnitAssignment>& allies);
    /// After a tick: marks achieved steps and re-assigns if the active set
    /// changed. Returns the ids achieved this tick.
    std::vector<int> update(const GameState& state, FieldCache& fields, std::vector<UnitAssignment>& allies);

private:
    std::shared_ptr<const Plan> plan_;
    PositionRule rule_;
    std::set<int> achieved_;
    std::set<int> active_;
};

}  // namespace hive::plan

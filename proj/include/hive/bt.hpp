#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hive/engine.hpp"
#include "hive/rng.hpp"

namespace hive::bt {

enum class Side { Foe, Friend };
enum class Sense { Toward, AwayFrom };
enum class Qualifier { Strongest, Weakest, Closest, Farthest, Random };
enum class Direction { North, East, South, West, Center };
enum class Intensity { Low, Middle, High };
enum class Horizon { Now, Low, Middle, High };
enum class Source { ThemFromMe, MeFromThem };
enum class Subject { Self, Foe, Friend };

/// Unit kinds joined by "or"; empty means "any".
struct UnitFilter {
    std::vector<UnitKind> kinds;

    static UnitFilter any() { return {}; }
    bool is_any() const { return kinds.empty(); }
    bool matches(UnitKind k) const;
    bool operator==(const UnitFilter&) const = default;
};

struct MoveDirection {
    Direction direction;
    bool operator==(const MoveDirection&) const = default;
};
struct MoveRelative {
    Sense sense;
    Qualifier qualifier;
    Side side;
    UnitFilter filter;
    bool operator==(const MoveRelative&) const = default;
};
struct AttackAtom {
    Qualifier qualifier;
    UnitFilter filter;
    bool operator==(const AttackAtom&) const = default;
};
struct Stand {
    bool operator==(const Stand&) const = default;
};
struct FollowMap {
    Sense sense;
    std::optional<Intensity> intensity;
    bool operator==(const FollowMap&) const = default;
};
struct InSight {
    Side side;
    UnitFilter filter;
    bool operator==(const InSight&) const = default;
};
struct InReach {
    Side side;
    Source source;
    Horizon horizon;
    UnitFilter filter;
    bool operator==(const InReach&) const = default;
};
struct IsDying {
    Subject subject;
    Intensity intensity;
    bool operator==(const IsDying&) const = default;
};
struct IsArmed {
    Subject subject;
    bool operator==(const IsArmed&) const = default;
};
struct IsFlock {
    Side side;
    Direction direction;
    bool operator==(const IsFlock&) const = default;
};
struct IsType {
    bool negated;
    UnitKind kind;
    bool operator==(const IsType&) const = default;
};
struct IsInForest {
    bool operator==(const IsInForest&) const = default;
};
struct SuccessAction {
    bool operator==(const SuccessAction&) const = default;
};
struct FailureAction {
    bool operator==(const FailureAction&) const = default;
};

using Atomic = std::variant<MoveDirection, MoveRelative, AttackAtom, Stand, FollowMap, InSight, InReach, IsDying,
                            IsArmed, IsFlock, IsType, IsInForest, SuccessAction, FailureAction>;

struct Node {
    enum class Kind { Sequence, Fallback, Condition, Action };

    Kind kind = Kind::Action;
    std::vector<Node> children;  // Sequence / Fallback
    Atomic atomic = Stand{};     // Condition / Action

    static Node sequence(std::vector<Node> children) { return {Kind::Sequence, std::move(children), Stand{}}; }
    static Node fallback(std::vector<Node> children) { return {Kind::Fallback, std::move(children), Stand{}}; }
    static Node condition(Atomic a) { return {Kind::Condition, {}, std::move(a)}; }
    static Node action(Atomic a) { return {Kind::Action, {}, std::move(a)}; }

    bool operator==(const Node&) const = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, int line, int column, std::vector<std::string> expected);
    int line() const { return line_; }
    int column() const { return column_; }
    const std::vector<std::string>& expected() const { return expected_; }

private:
    int line_;
    int column_;
    std::vector<std::string> expected_;
};

struct ParseOutput {
    Node root;
    /// Non-fatal findings, e.g. unit kinds without shipped stats.
    std::vector<std::string> warnings;
};

/// Parses the behaviour-tree text grammar. "::" and "|>" are equivalent child
/// separators. Throws ParseError with line/column and the expected tokens.
ParseOutput parse_with_warnings(std::string_view text);
Node parse_bt(std::string_view text);

/// Canonical single-line form; parse_bt(print_bt(n)) == n.
std::string print_bt(const Node& node);
std::string print_atomic(const Atomic& atomic);

/// Number of nodes in the tree.
std::size_t tree_size(const Node& node);

enum class Status { Success, Failure };

struct EvalResult {
    Status status = Status::Failure;
    std::optional<Action> action;
};

/// Tunable constants for atomic evaluation.
struct Params {
    double follow_noise_degrees = 10.0;
    /// follow_map stop distance as a fraction of sight range.
    double stop_low = 0.5;
    double stop_middle = 0.25;
    bool operator==(const Params&) const = default;
};

/// follow_map stop distance for a unit type and intensity (none/high = speed).
double stop_distance(const UnitType& type, std::optional<Intensity> intensity, const Params& params = {});

/// Memoryless evaluation from the root. The emitted action is the one from the
/// first action node that succeeds; a Success with no emitted action is a Noop.
EvalResult eval_bt(const Node& tree, const Observation& obs, Rng& rng, const Params& params = {});

/// Copy of `tree` where foe-directed atomics targeting "any" use `filter`.
Node substitute_targets(const Node& tree, const UnitFilter& filter);

/// Library tree names.
inline constexpr std::string_view kLongRange = "long_range_attack";
inline constexpr std::string_view kCloseRange = "close_range_attack";
inline constexpr std::string_view kAttackAndMove = "attack_and_move";
inline constexpr std::string_view kMoveToTarget = "move_toward_target";
inline constexpr std::string_view kStand = "stand";
inline constexpr std::string_view kLongRangeNoForest = "long_range_attack_out_of_forest";
inline constexpr std::string_view kCloseRangeNoForest = "close_range_attack_out_of_forest";

/// Source text of the seven shipped trees, keyed by the names above.
const std::map<std::string, std::string, std::less<>>& library_sources();

/// Parsed shipped trees.
const std::map<std::string, std::shared_ptr<const Node>, std::less<>>& standard_library();

}  // namespace hive::bt

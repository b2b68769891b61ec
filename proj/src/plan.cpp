#include "hive/plan.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>

#include "hive/errors.hpp"

namespace hive::plan {

// ---------------------------------------------------------------------------
// Selectors and names

std::vector<int> UnitSelector::resolve(int roster_size) const {
    std::vector<int> out;
    if (all) {
        out.resize(static_cast<std::size_t>(roster_size));
        for (int i = 0; i < roster_size; ++i) out[i] = i;
        return out;
    }
    for (const auto& r : ranges) {
        const int a = std::max(0, r.begin.value_or(0));
        const int b = std::min(roster_size, r.end.value_or(roster_size));
        for (int i = a; i < b; ++i) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

struct BehaviorEntry {
    BehaviorName name;
    std::string_view word;
    std::string_view tree;
};

constexpr BehaviorEntry kBehaviors[] = {
    {BehaviorName::AttackInCloseRange, "attack_in_close_range", bt::kCloseRange},
    {BehaviorName::AttackAndMove, "attack_and_move", bt::kAttackAndMove},
    {BehaviorName::AttackInLongRange, "attack_in_long_range", bt::kLongRange},
    {BehaviorName::FollowMap, "follow_map", bt::kMoveToTarget},
    {BehaviorName::Stand, "stand", bt::kStand},
};

}  // namespace

std::string_view behavior_word(BehaviorName b) {
    for (const auto& e : kBehaviors)
        if (e.name == b) return e.word;
    return "stand";
}

std::optional<BehaviorName> behavior_from_word(std::string_view w) {
    for (const auto& e : kBehaviors)
        if (e.word == w) return e.name;
    return std::nullopt;
}

std::string_view library_tree_for(BehaviorName b) {
    for (const auto& e : kBehaviors)
        if (e.name == b) return e.tree;
    return bt::kStand;
}

const Step* Plan::find(int id) const {
    for (const auto& s : steps)
        if (s.id == id) return &s;
    return nullptr;
}

InvalidPlanError::InvalidPlanError(const std::string& message, int line, std::string token)
    : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line), token_(std::move(token)) {}

// ---------------------------------------------------------------------------
// Parsing

std::optional<std::string> extract_plan_block(std::string_view text, int* blocks) {
    constexpr std::string_view kBegin = "BEGIN PLAN";
    constexpr std::string_view kEnd = "END PLAN";
    std::optional<std::string> first;
    int count = 0;
    std::size_t pos = 0;
    while (true) {
        const auto b = text.find(kBegin, pos);
        if (b == std::string_view::npos) break;
        const auto e = text.find(kEnd, b + kBegin.size());
        if (e == std::string_view::npos) break;
        if (!first) first = std::string(text.substr(b + kBegin.size(), e - b - kBegin.size()));
        ++count;
        pos = e + kEnd.size();
    }
    if (blocks) *blocks = count;
    return first;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

/// Character cursor over one line.
class Cursor {
public:
    Cursor(std::string_view text, int line) : s_(text), line_(line) {}

    void skip_ws() {
        while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
    }
    bool done() {
        skip_ws();
        return i_ >= s_.size();
    }
    bool peek(char c) {
        skip_ws();
        return i_ < s_.size() && s_[i_] == c;
    }
    bool accept(char c) {
        if (!peek(c)) return false;
        ++i_;
        return true;
    }
    void expect(char c, std::string_view what) {
        if (!accept(c)) fail("expected '" + std::string(1, c) + "' in " + std::string(what));
    }
    bool peek_int() {
        skip_ws();
        if (i_ >= s_.size()) return false;
        const char c = s_[i_];
        return std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1])));
    }
    int integer(std::string_view what) {
        skip_ws();
        const char* begin = s_.data() + i_;
        const char* end = s_.data() + s_.size();
        int v = 0;
        auto [ptr, ec] = std::from_chars(begin, end, v);
        if (ec != std::errc() || ptr == begin) fail("expected an integer in " + std::string(what));
        i_ += static_cast<std::size_t>(ptr - begin);
        if (i_ < s_.size() && s_[i_] == '.') fail("positions and ids must be integers", std::string(rest_word()));
        return v;
    }
    std::string_view word() {
        skip_ws();
        const std::size_t start = i_;
        while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
        return s_.substr(start, i_ - start);
    }
    std::string_view rest_word() const {
        std::size_t j = i_;
        while (j < s_.size() && !std::isspace(static_cast<unsigned char>(s_[j])) && s_[j] != ',' && s_[j] != ')' &&
               s_[j] != ']')
            ++j;
        std::size_t k = i_;
        while (k > 0 && !std::isspace(static_cast<unsigned char>(s_[k - 1])) && s_[k - 1] != '(' &&
               s_[k - 1] != '[' && s_[k - 1] != ',')
            --k;
        return s_.substr(k, j - k);
    }
    std::string_view rest() {
        skip_ws();
        return s_.substr(i_);
    }
    [[noreturn]] void fail(const std::string& msg, std::string token = {}) const {
        throw InvalidPlanError(msg, line_, std::move(token));
    }

private:
    std::string_view s_;
    std::size_t i_ = 0;
    int line_;
};

UnitSelector parse_selector(Cursor& c, std::string_view what) {
    if (c.peek('[')) {
        c.expect('[', what);
        UnitSelector sel;
        if (c.accept(']')) c.fail("empty unit list in " + std::string(what));
        do {
            std::optional<int> a;
            if (c.peek_int()) a = c.integer(what);
            if (c.accept(':')) {
                std::optional<int> b;
                if (c.peek_int()) b = c.integer(what);
                sel.ranges.push_back(IdRange::slice(a, b));
            } else {
                if (!a) c.fail("expected an id or slice in " + std::string(what), std::string(c.rest_word()));
                sel.ranges.push_back(IdRange::one(*a));
            }
        } while (c.accept(','));
        if (!c.accept(']')) c.fail("expected ',' or ']' in " + std::string(what), std::string(c.rest_word()));
        return sel;
    }
    const auto w = c.word();
    if (w == "all") return UnitSelector::everyone();
    c.fail("expected \"all\" or a bracketed id list in " + std::string(what),
           std::string(w.empty() ? c.rest_word() : w));
}

std::string_view field_value(std::string_view line, std::string_view key) {
    // "key:" with arbitrary spacing before the colon.
    std::string_view rest = line.substr(key.size());
    rest = trim(rest);
    if (rest.empty() || rest.front() != ':') return {};
    return rest.substr(1);
}

struct GroupDraft {
    Group group;
    bool has_behavior = false;
    int line = 0;
};

struct StepDraft {
    Step step;
    bool has_prereq = false;
    bool has_objective = false;
    std::vector<GroupDraft> groups;
};

class PlanParser {
public:
    PlanParser(std::string_view block, int first_line) : block_(block), line_no_(first_line) {}

    Plan run() {
        std::size_t pos = 0;
        while (pos <= block_.size()) {
            const auto nl = block_.find('\n', pos);
            const auto end = nl == std::string_view::npos ? block_.size() : nl;
            handle(trim(block_.substr(pos, end - pos)));
            if (nl == std::string_view::npos) break;
            pos = nl + 1;
            ++line_no_;
        }
        finish_step();
        if (plan_.steps.empty()) throw InvalidPlanError("plan has no steps", line_no_);
        plan_.raw_text = std::string(block_);
        return std::move(plan_);
    }

private:
    void handle(std::string_view line) {
        if (line.empty()) return;
        if (starts_with_ci(line, "step")) return step_header(line);
        if (!current_) throw InvalidPlanError("expected \"Step ID:\"", line_no_, std::string(first_token(line)));
        if (starts_with_ci(line, "prerequisites")) return prerequisites(line);
        if (starts_with_ci(line, "objective")) return objective(line);
        if (starts_with_ci(line, "units")) return units(line);
        if (line.front() == '-') {
            const auto item = trim(line.substr(1));
            if (starts_with_ci(item, "target position")) return target(item);
            if (starts_with_ci(item, "behavior")) return behavior(item);
        }
        throw InvalidPlanError("unexpected line", line_no_, std::string(first_token(line)));
    }

    static std::string_view first_token(std::string_view line) {
        const auto sp = line.find_first_of(" \t:");
        return line.substr(0, sp);
    }

    void step_header(std::string_view line) {
        finish_step();
        Cursor c(line.substr(4), line_no_);
        if (!c.peek_int()) c.fail("expected a step id after \"Step\"", std::string(c.rest_word()));
        StepDraft d;
        d.step.id = c.integer("step header");
        d.step.line = line_no_;
        c.accept(':');
        if (!c.done()) c.fail("unexpected text after step header", std::string(c.rest()));
        for (const auto& s : plan_.steps) {
            if (s.id == d.step.id) c.fail("duplicate step id " + std::to_string(d.step.id));
        }
        current_ = std::move(d);
    }

    void prerequisites(std::string_view line) {
        const auto v = field_value(line, "prerequisites");
        Cursor c(v, line_no_);
        if (current_->has_prereq) c.fail("prerequisites given twice");
        c.expect('[', "prerequisites");
        if (!c.accept(']')) {
            do {
                current_->step.prerequisites.push_back(c.integer("prerequisites"));
            } while (c.accept(','));
            c.expect(']', "prerequisites");
        }
        if (!c.done()) c.fail("unexpected text after prerequisites", std::string(c.rest()));
        current_->has_prereq = true;
    }

    void objective(std::string_view line) {
        const auto v = field_value(line, "objective");
        Cursor c(v, line_no_);
        if (current_->has_objective) c.fail("objective given twice");
        const auto w = c.word();
        if (w == "position") {
            current_->step.objective = {Objective::Kind::Position, {}};
        } else if (w == "elimination") {
            current_->step.objective = {Objective::Kind::Elimination, parse_selector(c, "elimination targets")};
        } else {
            c.fail("unknown objective", std::string(w.empty() ? c.rest_word() : w));
        }
        if (!c.done()) c.fail("unexpected text after objective", std::string(c.rest()));
        current_->has_objective = true;
    }

    void units(std::string_view line) {
        const auto v = field_value(line, "units");
        Cursor c(v, line_no_);
        GroupDraft g;
        g.group.units = parse_selector(c, "units");
        g.line = line_no_;
        if (!c.done()) c.fail("unexpected text after unit list", std::string(c.rest()));
        current_->groups.push_back(std::move(g));
    }

    GroupDraft& open_group(std::string_view what) {
        if (current_->groups.empty()) {
            throw InvalidPlanError(std::string(what) + " before any \"units:\" line", line_no_);
        }
        return current_->groups.back();
    }

    void target(std::string_view item) {
        auto& g = open_group("target position");
        const auto v = field_value(item, "target position");
        Cursor c(v, line_no_);
        if (g.group.target) c.fail("target position given twice");
        c.expect('(', "target position");
        const int x = c.integer("target position");
        c.expect(',', "target position");
        const int y = c.integer("target position");
        c.expect(')', "target position");
        if (!c.done()) c.fail("unexpected text after target position", std::string(c.rest()));
        g.group.target = Cell{x, y};
    }

    void behavior(std::string_view item) {
        auto& g = open_group("behavior");
        const auto v = field_value(item, "behavior");
        Cursor c(v, line_no_);
        if (g.has_behavior) c.fail("behavior given twice");
        const auto name = c.word();
        const auto b = behavior_from_word(name);
        if (!b) c.fail("unknown behavior '" + std::string(name.empty() ? c.rest_word() : name) + "'",
                       std::string(name.empty() ? c.rest_word() : name));
        g.group.behavior.name = *b;
        bool any = false;
        while (!c.done()) {
            const auto w = c.word();
            if (w.empty()) c.fail("unexpected text in behavior targets", std::string(c.rest_word()));
            if (w == "any") {
                any = true;
                continue;
            }
            const auto k = kind_from_name(w);
            if (!k || !is_shipped(*k)) c.fail("unknown unit type '" + std::string(w) + "'", std::string(w));
            auto& kinds = g.group.behavior.targets.kinds;
            if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
        }
        if (any) g.group.behavior.targets = bt::UnitFilter::any();
        g.has_behavior = true;
    }

    void finish_step() {
        if (!current_) return;
        auto& d = *current_;
        if (!d.has_prereq) throw InvalidPlanError("step " + std::to_string(d.step.id) + " has no prerequisites line", d.step.line);
        if (!d.has_objective) throw InvalidPlanError("step " + std::to_string(d.step.id) + " has no objective", d.step.line);
        if (d.groups.empty()) throw InvalidPlanError("step " + std::to_string(d.step.id) + " has no unit groups", d.step.line);
        for (auto& g : d.groups) {
            if (!g.has_behavior) throw InvalidPlanError("unit group without a behavior", g.line);
            d.step.groups.push_back(std::move(g.group));
        }
        plan_.steps.push_back(std::move(d.step));
        current_.reset();
    }

    std::string_view block_;
    int line_no_;
    Plan plan_;
    std::optional<StepDraft> current_;
};

}  // namespace

Plan parse_plan(std::string_view text) {
    const auto begin = text.find("BEGIN PLAN");
    const auto block = extract_plan_block(text);
    if (!block) throw NoPlanError("no BEGIN PLAN ... END PLAN block in the response");
    const int first_line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(begin), '\n'));
    return PlanParser(*block, first_line).run();
}

namespace {

std::string selector_text(const UnitSelector& s) {
    if (s.all) return "all";
    std::string out = "[";
    for (std::size_t i = 0; i < s.ranges.size(); ++i) {
        if (i) out += ", ";
        const auto& r = s.ranges[i];
        if (r.single) {
            out += std::to_string(*r.begin);
        } else {
            if (r.begin) out += std::to_string(*r.begin);
            out += ":";
            if (r.end) out += std::to_string(*r.end);
        }
    }
    return out + "]";
}

}  // namespace

std::string print_plan(const Plan& plan) {
    std::string out = "BEGIN PLAN\n";
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        const auto& s = plan.steps[i];
        if (i) out += "\n";
        out += "Step " + std::to_string(s.id) + ":\nprerequisites: [";
        for (std::size_t k = 0; k < s.prerequisites.size(); ++k) {
            if (k) out += ", ";
            out += std::to_string(s.prerequisites[k]);
        }
        out += "]\nobjective: ";
        out += s.objective.kind == Objective::Kind::Position ? "position"
                                                             : "elimination " + selector_text(s.objective.targets);
        out += "\n";
        for (const auto& g : s.groups) {
            out += "units: " + selector_text(g.units) + "\n";
            if (g.target) out += "- target position: (" + std::to_string(g.target->x) + ", " + std::to_string(g.target->y) + ")\n";
            out += "- behavior: " + std::string(behavior_word(g.behavior.name));
            if (g.behavior.targets.is_any()) {
                out += " any";
            } else {
                for (auto k : g.behavior.targets.kinds) out += " " + std::string(kind_name(k));
            }
            out += "\n";
        }
    }
    return out + "END PLAN\n";
}

// ---------------------------------------------------------------------------
// Validation

std::string_view violation_name(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::Bounds: return "bounds";
        case Violation::Kind::EmptySlice: return "empty-slice";
        case Violation::Kind::Overlap: return "overlap";
        case Violation::Kind::DanglingPrerequisite: return "dangling-prerequisite";
        case Violation::Kind::Cycle: return "cycle";
        case Violation::Kind::PositionOutOfBounds: return "position-out-of-bounds";
        case Violation::Kind::Unreachable: return "unreachable-target";
    }
    return "?";
}

namespace {

void check_selector(const UnitSelector& sel, int roster, std::string_view team, int step, std::vector<Violation>& out) {
    if (sel.all) return;
    for (const auto& r : sel.ranges) {
        const std::string text = selector_text(UnitSelector{false, {r}});
        const bool neg = (r.begin && *r.begin < 0) || (r.end && *r.end < 0);
        const bool past = r.single ? *r.begin >= roster : ((r.begin && *r.begin > roster) || (r.end && *r.end > roster));
        if (neg || past) {
            out.push_back({Violation::Kind::Bounds, Severity::Fatal, step,
                           "step " + std::to_string(step) + ": " + text + " outside the " + std::string(team) +
                               " roster of " + std::to_string(roster)});
            continue;
        }
        if (!r.single && r.begin.value_or(0) >= r.end.value_or(roster)) {
            out.push_back({Violation::Kind::EmptySlice, Severity::Warning, step,
                           "step " + std::to_string(step) + ": slice " + text + " selects no units"});
        }
    }
}

std::string compress_ids(const std::vector<int>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size();) {
        std::size_t j = i;
        while (j + 1 < ids.size() && ids[j + 1] == ids[j] + 1) ++j;
        if (!out.empty()) out += ", ";
        out += std::to_string(ids[i]);
        if (j > i) out += "-" + std::to_string(ids[j]);
        i = j + 1;
    }
    return out;
}

}  // namespace

std::vector<Violation> validate_plan(const Plan& plan, RosterSizes rosters, const WorldMap& map,
                                     const ValidationOptions& options) {
    std::vector<Violation> out;
    std::map<int, const Step*> by_id;
    for (const auto& s : plan.steps) by_id[s.id] = &s;

    for (const auto& s : plan.steps) {
        if (s.objective.kind == Objective::Kind::Elimination) {
            check_selector(s.objective.targets, rosters.enemies, "enemy", s.id, out);
        }
        std::vector<int> owner(static_cast<std::size_t>(std::max(0, rosters.allies)), 0);
        for (const auto& g : s.groups) {
            check_selector(g.units, rosters.allies, "ally", s.id, out);
            for (int id : g.units.resolve(rosters.allies)) ++owner[id];
            if (g.target) {
                const Vec2 p{static_cast<double>(g.target->x), static_cast<double>(g.target->y)};
                if (!map.in_bounds(p)) {
                    out.push_back({Violation::Kind::PositionOutOfBounds, Severity::Fatal, s.id,
                                   "step " + std::to_string(s.id) + ": target (" + std::to_string(g.target->x) + ", " +
                                       std::to_string(g.target->y) + ") is outside the " + std::to_string(map.width()) +
                                       "x" + std::to_string(map.height()) + " map"});
                } else if (!map.passable_at(p) && !map.snap_to_passable(p, kTargetSnapRadius)) {
                    out.push_back({Violation::Kind::Unreachable, Severity::Fatal, s.id,
                                   "step " + std::to_string(s.id) + ": no passable ground near (" +
                                       std::to_string(g.target->x) + ", " + std::to_string(g.target->y) + ")"});
                }
            }
        }
        std::vector<int> shared;
        for (int i = 0; i < rosters.allies; ++i)
            if (owner[i] > 1) shared.push_back(i);
        if (!shared.empty()) {
            out.push_back({Violation::Kind::Overlap, options.overlap_fatal ? Severity::Fatal : Severity::Warning, s.id,
                           "step " + std::to_string(s.id) + ": units " + compress_ids(shared) +
                               " belong to more than one group"});
        }
        for (int p : s.prerequisites) {
            if (!by_id.count(p)) {
                out.push_back({Violation::Kind::DanglingPrerequisite, Severity::Fatal, s.id,
                               "step " + std::to_string(s.id) + ": prerequisite " + std::to_string(p) + " does not exist"});
            }
        }
    }

    // Cycle detection over existing prerequisite edges.
    enum class Mark { None, Open, Done };
    std::map<int, Mark> mark;
    std::set<int> reported;
    std::function<bool(int, std::vector<int>&)> visit = [&](int id, std::vector<int>& path) {
        mark[id] = Mark::Open;
        path.push_back(id);
        for (int p : by_id[id]->prerequisites) {
            if (!by_id.count(p)) continue;
            if (mark[p] == Mark::Open) {
                const auto it = std::find(path.begin(), path.end(), p);
                std::string cyc;
                for (auto k = it; k != path.end(); ++k) cyc += std::to_string(*k) + " -> ";
                cyc += std::to_string(p);
                if (reported.insert(p).second) {
                    out.push_back({Violation::Kind::Cycle, Severity::Fatal, p, "prerequisite cycle " + cyc});
                }
            } else if (mark[p] == Mark::None) {
                visit(p, path);
            }
        }
        path.pop_back();
        mark[id] = Mark::Done;
        return true;
    };
    for (const auto& [id, step] : by_id) {
        if (mark[id] == Mark::None) {
            std::vector<int> path;
            visit(id, path);
        }
    }
    return out;
}

bool has_fatal(const std::vector<Violation>& violations) {
    return std::any_of(violations.begin(), violations.end(),
                       [](const Violation& v) { return v.severity == Severity::Fatal; });
}

// ---------------------------------------------------------------------------
// Progression

std::set<int> activate_steps(const Plan& plan, const std::set<int>& achieved) {
    std::set<int> active;
    for (const auto& s : plan.steps) {
        if (achieved.count(s.id)) continue;
        const bool ready = std::all_of(s.prerequisites.begin(), s.prerequisites.end(),
                                       [&](int p) { return achieved.count(p) > 0; });
        if (ready) active.insert(s.id);
    }
    return active;
}

std::shared_ptr<const DistanceField> FieldCache::get(Cell target) {
    const auto k = key(target);
    if (auto it = fields_.find(k); it != fields_.end()) return it->second;
    auto f = std::make_shared<const DistanceField>(
        build_distance_field(*map_, {static_cast<double>(target.x), static_cast<double>(target.y)}));
    fields_.emplace(k, f);
    return f;
}

void FieldCache::prefetch(const std::vector<Cell>& targets) {
    std::vector<Cell> missing;
    std::vector<Vec2> points;
    for (const auto& t : targets) {
        if (fields_.count(key(t))) continue;
        if (std::find(missing.begin(), missing.end(), t) != missing.end()) continue;
        missing.push_back(t);
        points.push_back({static_cast<double>(t.x), static_cast<double>(t.y)});
    }
    if (missing.empty()) return;
    auto built = build_distance_fields(*map_, points, policy_);
    for (std::size_t i = 0; i < missing.size(); ++i) fields_.emplace(key(missing[i]), std::move(built[i]));
}

UnitAssignment default_assignment() {
    return {bt::standard_library().find(bt::kStand)->second, nullptr, {}};
}

int assign_behaviors(const Plan& plan, const std::set<int>& active, const GameState& state, FieldCache& fields,
                     std::vector<UnitAssignment>& allies) {
    const int n = static_cast<int>(state.team(Team::Ally).size());
    if (static_cast<int>(allies.size()) < n) allies.resize(n, default_assignment());

    std::vector<const Step*> steps;
    for (const auto& s : plan.steps)
        if (active.count(s.id)) steps.push_back(&s);
    std::sort(steps.begin(), steps.end(), [](const Step* a, const Step* b) { return a->id < b->id; });

    std::vector<Cell> targets;
    for (const Step* s : steps)
        for (const auto& g : s->groups)
            if (g.target) targets.push_back(*g.target);
    fields.prefetch(targets);

    int written = 0;
    const auto& lib = bt::standard_library();
    for (const Step* s : steps) {
        for (const auto& g : s->groups) {
            const auto& base = *lib.find(library_tree_for(g.behavior.name))->second;
            auto tree = std::make_shared<const bt::Node>(bt::substitute_targets(base, g.behavior.targets));
            std::shared_ptr<const DistanceField> field;
            Vec2 target;
            if (g.target) {
                field = fields.get(*g.target);
                target = field->target();
            }
            for (int id : g.units.resolve(n)) {
                allies[id] = {tree, field, target};
                ++written;
            }
        }
    }
    return written;
}

namespace {

std::optional<bt::Intensity> follow_intensity(const bt::Node& n, bool& found) {
    if (n.kind == bt::Node::Kind::Action) {
        if (const auto* f = std::get_if<bt::FollowMap>(&n.atomic); f && f->sense == bt::Sense::Toward) {
            found = true;
            return f->intensity;
        }
        return std::nullopt;
    }
    for (const auto& c : n.children) {
        auto r = follow_intensity(c, found);
        if (found) return r;
    }
    return std::nullopt;
}

}  // namespace

double position_radius(const PositionRule& rule, const Group& group, const UnitType& type, int live_in_group) {
    double r = rule.base_radius;
    if (rule.stop_term) {
        bool found = false;
        const auto& tree = *bt::standard_library().find(library_tree_for(group.behavior.name))->second;
        const auto intensity = follow_intensity(tree, found);
        if (found) r = std::max(r, bt::stop_distance(type, intensity, rule.params));
    }
    if (rule.crowd_term) r += std::sqrt(std::max(0, live_in_group - 1) / std::numbers::pi);
    return r;
}

std::vector<int> check_step_objectives(const Plan& plan, const std::set<int>& active, const GameState& state,
                                       const PositionRule& rule) {
    std::vector<int> done;
    const auto& allies = state.team(Team::Ally);
    const auto& enemies = state.team(Team::Enemy);
    const int na = static_cast<int>(allies.size());
    for (const auto& s : plan.steps) {
        if (!active.count(s.id)) continue;
        bool ok = true;
        if (s.objective.kind == Objective::Kind::Elimination) {
            for (int id : s.objective.targets.resolve(static_cast<int>(enemies.size()))) {
                if (enemies[id].alive()) {
                    ok = false;
                    break;
                }
            }
        } else {
            for (const auto& g : s.groups) {
                if (!g.target) continue;
                const Vec2 t{static_cast<double>(g.target->x), static_cast<double>(g.target->y)};
                const auto ids = g.units.resolve(na);
                int live = 0;
                for (int id : ids) live += allies[id].alive() ? 1 : 0;
                for (int id : ids) {
                    const Unit& u = allies[id];
                    if (!u.alive()) continue;
                    const double r = position_radius(rule, g, state.type_of(u), live);
                    if (distance_sq(u.pos, t) > r * r) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
        }
        if (ok) done.push_back(s.id);
    }
    return done;
}

PlanTracker::PlanTracker(std::shared_ptr<const Plan> plan, PositionRule rule)
    : plan_(std::move(plan)), rule_(rule) {}

void PlanTracker::start(const GameState& state, FieldCache& fields, std::vector<UnitAssignment>& allies) {
    achieved_.clear();
    active_ = activate_steps(*plan_, achieved_);
    assign_behaviors(*plan_, active_, state, fields, allies);
}

std::vector<int> PlanTracker::update(const GameState& state, FieldCache& fields, std::vector<UnitAssignment>& allies) {
    auto newly = check_step_objectives(*plan_, active_, state, rule_);
    if (newly.empty()) return newly;
    achieved_.insert(newly.begin(), newly.end());
    auto next = activate_steps(*plan_, achieved_);
    if (next != active_) {
        active_ = std::move(next);
        assign_behaviors(*plan_, active_, state, fields, allies);
    }
    return newly;
}

}  // namespace hive::plan

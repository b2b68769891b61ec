#include <atomic>
#include <cmath>
#include <numbers>

#include "hive/bt.hpp"
#include "hive/log.hpp"

namespace hive::bt {

namespace {

Team side_team(const Observation& obs, Side side) {
    return side == Side::Foe ? opponent(obs.self.team) : obs.self.team;
}

double horizon_steps(Horizon h) {
    switch (h) {
        case Horizon::Now: return 0.0;
        case Horizon::Low: return 1.0;
        case Horizon::Middle: return 2.0;
        case Horizon::High: return 3.0;
    }
    return 0.0;
}

double dying_fraction(Intensity i) {
    switch (i) {
        case Intensity::Low: return 0.75;
        case Intensity::Middle: return 0.50;
        case Intensity::High: return 0.25;
    }
    return 0.5;
}

bool below_fraction(int health, int max_health, double fraction) {
    return static_cast<double>(health) < fraction * max_health;
}

/// Pick one of `candidates` by qualifier. Candidates are pre-sorted by id, so
/// strict comparisons keep the lower id on ties.
const SeenUnit* pick(const std::vector<const SeenUnit*>& candidates, Qualifier q, Rng& rng) {
    if (candidates.empty()) return nullptr;
    const SeenUnit* best = candidates.front();
    switch (q) {
        case Qualifier::Strongest:
            for (const auto* c : candidates)
                if (c->health > best->health) best = c;
            return best;
        case Qualifier::Weakest:
            for (const auto* c : candidates)
                if (c->health < best->health) best = c;
            return best;
        case Qualifier::Closest:
            for (const auto* c : candidates)
                if (c->distance < best->distance) best = c;
            return best;
        case Qualifier::Farthest:
            for (const auto* c : candidates)
                if (c->distance > best->distance) best = c;
            return best;
        case Qualifier::Random:
            return candidates[rng.below(candidates.size())];
    }
    return best;
}

Vec2 random_unit_vector(Rng& rng) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return {std::cos(a), std::sin(a)};
}

std::atomic<bool> g_flock_warned{false};

class Evaluator {
public:
    Evaluator(const Observation& obs, Rng& rng, const Params& params)
        : obs_(obs), rng_(rng), params_(params), type_(obs.my_type()) {}

    Status eval(const Node& n) {
        switch (n.kind) {
            case Node::Kind::Sequence:
                for (const auto& c : n.children)
                    if (eval(c) == Status::Failure) return Status::Failure;
                return Status::Success;
            case Node::Kind::Fallback:
                for (const auto& c : n.children)
                    if (eval(c) == Status::Success) return Status::Success;
                return Status::Failure;
            case Node::Kind::Condition:
                return std::visit([this](const auto& a) { return condition(a); }, n.atomic);
            case Node::Kind::Action: {
                std::optional<Action> act;
                const Status s = std::visit([&](const auto& a) { return action(a, act); }, n.atomic);
                if (s == Status::Success && !emitted_ && act) emitted_ = act;
                return s;
            }
        }
        return Status::Failure;
    }

    std::optional<Action> emitted() const { return emitted_; }

private:
    std::vector<const SeenUnit*> matching(Side side, const UnitFilter& filter) const {
        std::vector<const SeenUnit*> out;
        const Team team = side_team(obs_, side);
        for (const auto& s : obs_.visible) {
            if (s.team == team && filter.matches(s.kind)) out.push_back(&s);
        }
        return out;
    }

    // ---- conditions -------------------------------------------------------

    Status condition(const InSight& a) {
        return matching(a.side, a.filter).empty() ? Status::Failure : Status::Success;
    }

    Status condition(const InReach& a) {
        const double t = horizon_steps(a.horizon);
        for (const auto* s : matching(a.side, a.filter)) {
            double reach;
            if (a.source == Source::ThemFromMe) {
                reach = type_.attack_range + t * type_.speed;
            } else {
                const UnitType& theirs = (*obs_.types)[s->kind];
                reach = theirs.attack_range + t * theirs.speed;
            }
            if (s->distance <= reach + kRangeSlack) return Status::Success;
        }
        return Status::Failure;
    }

    Status condition(const IsDying& a) {
        const double f = dying_fraction(a.intensity);
        if (a.subject == Subject::Self) {
            return below_fraction(obs_.self.health, type_.max_health, f) ? Status::Success : Status::Failure;
        }
        const Side side = a.subject == Subject::Foe ? Side::Foe : Side::Friend;
        for (const auto* s : matching(side, UnitFilter::any())) {
            if (below_fraction(s->health, (*obs_.types)[s->kind].max_health, f)) return Status::Success;
        }
        return Status::Failure;
    }

    Status condition(const IsArmed& a) {
        if (a.subject == Subject::Self) return obs_.self.cooldown_left == 0 ? Status::Success : Status::Failure;
        const Side side = a.subject == Subject::Foe ? Side::Foe : Side::Friend;
        for (const auto* s : matching(side, UnitFilter::any())) {
            if (s->cooldown_left == 0) return Status::Success;
        }
        return Status::Failure;
    }

    Status condition(const IsFlock&) {
        if (!g_flock_warned.exchange(true)) {
            log::warn("is_flock has no defined semantics and always fails");
        }
        return Status::Failure;
    }

    Status condition(const IsType& a) {
        const bool same = obs_.self.kind == a.kind;
        return same != a.negated ? Status::Success : Status::Failure;
    }

    Status condition(const IsInForest&) { return obs_.in_forest ? Status::Success : Status::Failure; }
    Status condition(const SuccessAction&) { return Status::Success; }
    Status condition(const FailureAction&) { return Status::Failure; }

    // Action atomics used as conditions report whether they would succeed.
    template <class A>
    Status condition(const A& a) {
        std::optional<Action> ignored;
        return action(a, ignored);
    }

    // ---- actions ----------------------------------------------------------

    Status action(const Stand&, std::optional<Action>& out) {
        out = Noop{};
        return Status::Success;
    }

    Status action(const SuccessAction&, std::optional<Action>&) { return Status::Success; }
    Status action(const FailureAction&, std::optional<Action>&) { return Status::Failure; }

    Status action(const AttackAtom& a, std::optional<Action>& out) {
        if (obs_.self.cooldown_left > 0) return Status::Failure;
        const double range = type_.attack_range + kRangeSlack;
        std::vector<const SeenUnit*> in_range;
        for (const auto* s : matching(Side::Foe, a.filter)) {
            if (s->distance <= range) in_range.push_back(s);
        }
        const SeenUnit* target = pick(in_range, a.qualifier, rng_);
        if (!target) return Status::Failure;
        out = Attack{target->id, target->team};
        return Status::Success;
    }

    Status action(const MoveRelative& a, std::optional<Action>& out) {
        const SeenUnit* ref = pick(matching(a.side, a.filter), a.qualifier, rng_);
        if (!ref) return Status::Failure;
        const Vec2 to = ref->pos - obs_.self.pos;
        if (a.sense == Sense::Toward) {
            out = Move{to.normalized() * std::min(type_.speed, ref->distance)};
        } else {
            const Vec2 dir = ref->distance > 0.0 ? to.normalized() * -1.0 : random_unit_vector(rng_);
            out = Move{dir * type_.speed};
        }
        return Status::Success;
    }

    Status action(const MoveDirection& a, std::optional<Action>& out) {
        Vec2 dir;
        double len = type_.speed;
        switch (a.direction) {
            case Direction::North: dir = {0, 1}; break;
            case Direction::East: dir = {1, 0}; break;
            case Direction::South: dir = {0, -1}; break;
            case Direction::West: dir = {-1, 0}; break;
            case Direction::Center: {
                const Vec2 center{obs_.map->width() / 2.0, obs_.map->height() / 2.0};
                const Vec2 to = center - obs_.self.pos;
                dir = to.normalized();
                len = std::min(len, to.length());
                break;
            }
        }
        out = Move{dir * len};
        return Status::Success;
    }

    Status action(const FollowMap& a, std::optional<Action>& out) {
        if (obs_.field == nullptr) return Status::Failure;
        const WorldMap& map = *obs_.map;
        const DistanceField& field = *obs_.field;
        const Vec2 pos = obs_.self.pos;
        const Cell here = map.cell_at(pos);
        const double path = field.at(here);
        if (path == kUnreachable) return Status::Failure;
        const double remaining = path > 0.0 ? path : distance(pos, field.target());

        Vec2 dir;
        double len = type_.speed;
        if (a.sense == Sense::Toward) {
            if (remaining <= stop_distance(type_, a.intensity, params_)) return Status::Failure;
            dir = descent_direction(map, field, pos);
            len = std::min(len, remaining);
        } else {
            dir = ascent_direction(map, field, here, pos);
        }
        if (dir.length_sq() == 0.0) return Status::Failure;
        const double jitter = params_.follow_noise_degrees * std::numbers::pi / 180.0;
        dir = dir.rotated(rng_.uniform(-jitter, jitter));
        out = Move{dir * len};
        return Status::Success;
    }

    // Aim at the furthest cell along the descent chain reachable in a straight
    // passable line within one step, so fast units do not zig-zag cell by cell.
    Vec2 descent_direction(const WorldMap& map, const DistanceField& field, Vec2 pos) const {
        Cell c = map.cell_at(pos);
        std::optional<Vec2> aim;
        const int lookahead = static_cast<int>(std::ceil(type_.speed)) + 1;
        for (int i = 0; i < lookahead; ++i) {
            const auto next = next_step_cell(map, field, c);
            if (!next) break;
            c = *next;
            const Vec2 centre = cell_center(c);
            if (i > 0 && !(clip_to_passable(map, pos, centre) == centre)) break;
            aim = centre;
        }
        if (!aim) {
            // Inside the target cell: head for the exact target point.
            return (field.target() - pos).normalized();
        }
        return (*aim - pos).normalized();
    }

    static Vec2 ascent_direction(const WorldMap& map, const DistanceField& field, Cell here, Vec2 pos) {
        static constexpr Cell kOrder[] = {{0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}};
        double best = field.at(here);
        std::optional<Cell> pick_cell;
        for (const Cell& off : kOrder) {
            const Cell n{here.x + off.x, here.y + off.y};
            if (!map.passable_cell(n)) continue;
            if (off.x != 0 && off.y != 0 && !map.passable_cell({here.x + off.x, here.y}) &&
                !map.passable_cell({here.x, here.y + off.y})) {
                continue;
            }
            const double d = field.at(n);
            if (d != kUnreachable && d > best) {
                best = d;
                pick_cell = n;
            }
        }
        if (!pick_cell) return {};
        return (cell_center(*pick_cell) - pos).normalized();
    }

    // Conditions used as actions (e.g. "A (in_sight foe any)") behave as checks.
    template <class A>
    Status action(const A& a, std::optional<Action>&) {
        return condition(a);
    }

    const Observation& obs_;
    Rng& rng_;
    const Params& params_;
    const UnitType& type_;
    std::optional<Action> emitted_;
};

}  // namespace

double stop_distance(const UnitType& type, std::optional<Intensity> intensity, const Params& params) {
    if (!intensity) return type.speed;
    switch (*intensity) {
        case Intensity::Low: return params.stop_low * type.sight_range;
        case Intensity::Middle: return params.stop_middle * type.sight_range;
        case Intensity::High: return type.speed;
    }
    return type.speed;
}

EvalResult eval_bt(const Node& tree, const Observation& obs, Rng& rng, const Params& params) {
    Evaluator ev(obs, rng, params);
    const Status s = ev.eval(tree);
    EvalResult r;
    r.status = s;
    r.action = ev.emitted();
    return r;
}

}  // namespace hive::bt

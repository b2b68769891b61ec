#include <chrono>
#include <limits>

#include "hive/log.hpp"
#include "hive/scenario.hpp"

namespace hive {

std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Win: return "win";
        case Outcome::Loss: return "loss";
        case Outcome::Tie: return "tie";
        case Outcome::EarlyCompletion: return "early_completion";
        case Outcome::InvalidPlan: return "invalid_plan";
        case Outcome::NoPlan: return "no_plan";
    }
    return "?";
}

std::optional<Outcome> outcome_from_name(std::string_view name) {
    for (Outcome o : {Outcome::Win, Outcome::Loss, Outcome::Tie, Outcome::EarlyCompletion, Outcome::InvalidPlan,
                      Outcome::NoPlan})
        if (outcome_name(o) == name) return o;
    return std::nullopt;
}

int outcome_rank(Outcome o) {
    switch (o) {
        case Outcome::Win: return 2;
        case Outcome::Tie:
        case Outcome::EarlyCompletion: return 1;
        default: return 0;
    }
}

namespace {

bool any_live_within(const std::vector<Unit>& units, Vec2 p, double r) {
    const double r2 = r * r;
    for (const auto& u : units)
        if (u.alive() && distance_sq(u.pos, p) <= r2) return true;
    return false;
}

std::optional<double> closest_live(const std::vector<Unit>& units, Vec2 p) {
    std::optional<double> best;
    for (const auto& u : units) {
        if (!u.alive()) continue;
        const double d = distance(u.pos, p);
        if (!best || d < *best) best = d;
    }
    return best;
}

bool has_point(const Scenario& s) { return s.objective.kind != GlobalObjective::Kind::Elimination; }

}  // namespace

std::optional<Outcome> adjudicate(const Scenario& scenario, const GameState& state) {
    const bool allies_dead = state.alive_count(Team::Ally) == 0;
    const bool enemies_dead = state.alive_count(Team::Enemy) == 0;
    const auto& obj = scenario.objective;
    switch (obj.kind) {
        case GlobalObjective::Kind::Elimination:
            if (enemies_dead) return Outcome::Win;
            if (allies_dead) return Outcome::Loss;
            break;
        case GlobalObjective::Kind::ReachPoint:
            if (any_live_within(state.team(Team::Ally), obj.point, obj.radius)) return Outcome::Win;
            if (allies_dead) return Outcome::Loss;
            break;
        case GlobalObjective::Kind::DefendPoint:
            if (any_live_within(state.team(Team::Enemy), obj.point, obj.radius) || allies_dead) return Outcome::Loss;
            if (enemies_dead) return Outcome::Win;
            break;
    }
    return std::nullopt;
}

EpisodeMetrics compute_metrics(const Scenario& scenario, const GameState& state, std::optional<double> best_distance) {
    EpisodeMetrics m;
    const int enemies = static_cast<int>(state.team(Team::Enemy).size());
    m.enemy_survivors = state.alive_count(Team::Enemy);
    m.ally_survivors = state.alive_count(Team::Ally);
    m.pct_enemies_eliminated = enemies == 0 ? 1.0 : static_cast<double>(enemies - m.enemy_survivors) / enemies;
    m.ticks_elapsed = state.tick;
    if (has_point(scenario)) {
        const auto now = closest_live(state.team(Team::Ally), scenario.objective.point);
        if (best_distance && now) m.min_ally_distance_to_objective = std::min(*best_distance, *now);
        else m.min_ally_distance_to_objective = best_distance ? best_distance : now;
    }
    return m;
}

PreparedPlan prepare_plan(const Scenario& scenario, std::string response, const plan::ValidationOptions& options) {
    PreparedPlan out;
    out.response = std::move(response);
    plan::extract_plan_block(out.response, &out.blocks);
    if (out.blocks > 1) log::warn("response holds " + std::to_string(out.blocks) + " plan blocks; using the first");
    try {
        auto parsed = std::make_shared<plan::Plan>(plan::parse_plan(out.response));
        out.violations = plan::validate_plan(*parsed, {scenario.ally_count(), scenario.enemy_count()}, *scenario.map,
                                             options);
        if (plan::has_fatal(out.violations)) {
            out.failure = Outcome::InvalidPlan;
            for (const auto& v : out.violations) {
                if (v.severity == plan::Severity::Fatal) {
                    out.error = v.message;
                    break;
                }
            }
            return out;
        }
        out.plan = std::move(parsed);
    } catch (const plan::NoPlanError& e) {
        out.failure = Outcome::NoPlan;
        out.error = e.what();
    } catch (const plan::InvalidPlanError& e) {
        out.failure = Outcome::InvalidPlan;
        out.error = e.what();
    }
    return out;
}

std::vector<std::string> plan_diagnostics(const PreparedPlan& p) {
    std::vector<std::string> out;
    if (!p.error.empty() && p.violations.empty()) out.push_back("error: " + p.error);
    for (const auto& v : p.violations) {
        out.push_back(std::string(v.severity == plan::Severity::Fatal ? "error" : "warning") + " [" +
                      std::string(plan::violation_name(v.kind)) + "] " + v.message);
    }
    if (p.blocks > 1) out.push_back("warning: " + std::to_string(p.blocks) + " plan blocks, first one used");
    return out;
}

ReplayRecord run_episode(const Scenario& scenario, const PreparedPlan& prepared, const EpisodeOptions& options) {
    ReplayRecord rec;
    rec.config_hash = config_hash(scenario);
    rec.scenario = scenario.name;
    rec.response = prepared.response;
    rec.seed = options.seed;
    rec.ally_units = scenario.ally_count();
    rec.enemy_units = scenario.enemy_count();
    rec.diagnostics = plan_diagnostics(prepared);
    if (auto block = plan::extract_plan_block(prepared.response)) rec.plan_text = *block;

    if (!prepared.ok()) {
        // Nothing moves: metrics of the untouched starting position.
        rec.outcome = prepared.failure.value_or(Outcome::NoPlan);
        rec.metrics = compute_metrics(scenario, initial_state(scenario, options.seed), std::nullopt);
        return rec;
    }
    rec.plan_normalized = plan::print_plan(*prepared.plan);

    const auto started = std::chrono::steady_clock::now();
    GameState state = initial_state(scenario, options.seed);
    plan::FieldCache fields(scenario.map, options.policy);

    // Enemy controllers: every route point gets a field up front.
    std::vector<Cell> route_points;
    const auto& lib = bt::standard_library();
    for (const auto& g : scenario.enemies)
        for (const auto& p : g.route) route_points.push_back({static_cast<int>(p.x), static_cast<int>(p.y)});
    fields.prefetch(route_points);

    AssignmentTable table;
    std::vector<int> group_of, leg;
    for (std::size_t gi = 0; gi < scenario.enemies.size(); ++gi) {
        const auto& g = scenario.enemies[gi];
        const auto field = fields.get({static_cast<int>(g.route[0].x), static_cast<int>(g.route[0].y)});
        for (int k = 0; k < g.roster.count; ++k) {
            table[1].push_back({lib.find(g.tree)->second, field, field->target()});
            group_of.push_back(static_cast<int>(gi));
            leg.push_back(0);
        }
    }
    auto advance_enemies = [&] {
        const auto& enemies = state.team(Team::Enemy);
        const double r2 = scenario.waypoint_radius * scenario.waypoint_radius;
        for (std::size_t i = 0; i < enemies.size(); ++i) {
            if (!enemies[i].alive()) continue;
            const auto& route = scenario.enemies[group_of[i]].route;
            if (leg[i] + 1 >= static_cast<int>(route.size())) continue;
            if (distance_sq(enemies[i].pos, table[1][i].target) > r2) continue;
            ++leg[i];
            const auto& p = route[leg[i]];
            const auto field = fields.get({static_cast<int>(p.x), static_cast<int>(p.y)});
            table[1][i].field = field;
            table[1][i].target = field->target();
        }
    };

    plan::PlanTracker tracker(prepared.plan, scenario.position_rule);
    tracker.start(state, fields, table[0]);

    std::optional<double> best;
    auto track_distance = [&] {
        if (!has_point(scenario)) return;
        if (auto d = closest_live(state.team(Team::Ally), scenario.objective.point); d && (!best || *d < *best)) best = d;
    };
    track_distance();
    if (options.on_tick) options.on_tick(state, {0, {}});

    std::optional<Outcome> outcome;
    while (!outcome) {
        const auto actions = decide_actions(state, table, options.policy, scenario.position_rule.params);
        step_game(state, actions);
        advance_enemies();
        TickInfo info{state.tick, tracker.update(state, fields, table[0])};
        track_distance();
        if (options.record_hashes) rec.tick_hashes.push_back(state.hash());
        outcome = adjudicate(scenario, state);
        if (!outcome && tracker.complete()) outcome = Outcome::EarlyCompletion;
        if (!outcome && state.tick >= scenario.max_ticks) outcome = Outcome::Tie;
        if (options.on_tick) options.on_tick(state, info);
    }

    rec.outcome = *outcome;
    rec.metrics = compute_metrics(scenario, state, best);
    rec.achieved_steps.assign(tracker.achieved().begin(), tracker.achieved().end());
    rec.final_hash = state.hash();
    if (options.record_wall_time) {
        rec.sim_wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    return rec;
}

}  // namespace hive

#include "hive/scenario.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hive/errors.hpp"
#include "json.hpp"

namespace hive {

using nlohmann::json;

std::string_view objective_kind_name(GlobalObjective::Kind k) {
    switch (k) {
        case GlobalObjective::Kind::Elimination: return "elimination";
        case GlobalObjective::Kind::ReachPoint: return "reach_point";
        case GlobalObjective::Kind::DefendPoint: return "defend_point";
    }
    return "?";
}

int Scenario::ally_count() const {
    return std::accumulate(allies.begin(), allies.end(), 0, [](int s, const RosterEntry& e) { return s + e.count; });
}

int Scenario::enemy_count() const {
    return std::accumulate(enemies.begin(), enemies.end(), 0,
                           [](int s, const EnemyGroup& e) { return s + e.roster.count; });
}

const std::vector<AbilityTest>& ability_tests() {
    static const std::vector<AbilityTest> tests{
        {"coordinate", "coordinate", false},
        {"exploit_weakness", "exploit_weakness", false},
        {"follow_markers", "markers_terrain", true},
        {"exploit_terrain", "markers_terrain", false},
        {"strategize_points", "strategize_points", false},
    };
    return tests;
}

const AbilityTest& ability_test(std::string_view name) {
    for (const auto& t : ability_tests())
        if (t.name == name) return t;
    throw NotFoundError("unknown ability test '" + std::string(name) + "'");
}

std::filesystem::path data_dir() {
    if (const char* env = std::getenv("HIVE_DATA_DIR"); env && *env) return env;
    return HIVE_DATA_DIR;
}

namespace {

std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Vec2 vec_of(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("expected [x, y], got " + j.dump());
    return {j[0].get<double>(), j[1].get<double>()};
}

Rect rect_of(const json& j) {
    if (!j.is_array() || j.size() != 2) throw ValidationError("expected [[x0, y0], [x1, y1]], got " + j.dump());
    return {vec_of(j[0]), vec_of(j[1])};
}

RosterEntry roster_of(const json& j) {
    RosterEntry e;
    const auto name = j.at("kind").get<std::string>();
    const auto kind = kind_from_name(name);
    if (!kind || !is_shipped(*kind)) throw ValidationError("unknown unit kind '" + name + "'");
    e.kind = *kind;
    e.count = j.at("count").get<int>();
    e.region = rect_of(j.at("region"));
    return e;
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }
json rect_json(const Rect& r) { return json::array({vec_json(r.bottom_left), vec_json(r.top_right)}); }
json roster_json(const RosterEntry& e) {
    return {{"kind", kind_name(e.kind)}, {"count", e.count}, {"region", rect_json(e.region)}};
}

}  // namespace

std::shared_ptr<const WorldMap> load_map_file(const std::filesystem::path& file) {
    const auto text = read_text(file);
    std::istringstream in(text);
    std::string line;
    int width = 0, height = 0;
    std::vector<MapFeature> features;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        if (line.compare(first, 5, "size:") == 0) {
            std::istringstream dims(line.substr(first + 5));
            if (!(dims >> width >> height) || width <= 0 || height <= 0) {
                throw ValidationError(file.string() + ":" + std::to_string(line_no) + ": bad size line");
            }
            continue;
        }
        try {
            features.push_back(parse_feature_line(line));
        } catch (const std::exception& e) {
            throw ValidationError(file.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (width == 0) throw ValidationError(file.string() + ": missing size line");
    return std::make_shared<const WorldMap>(width, height, std::move(features));
}

std::string map_file_text(const WorldMap& map) {
    return "size: " + std::to_string(map.width()) + " " + std::to_string(map.height()) + "\n" + describe_map(map);
}

Scenario load_scenario(const std::filesystem::path& file) {
    json j;
    try {
        j = json::parse(read_text(file));
    } catch (const json::parse_error& e) {
        throw ValidationError(file.string() + ": " + e.what());
    }
    try {
        Scenario s;
        s.name = j.at("name").get<std::string>();
        s.title = j.value("title", s.name);
        s.map = load_map_file(file.parent_path() / j.at("map").get<std::string>());
        s.max_ticks = j.at("max_ticks").get<int>();
        if (s.max_ticks <= 0) throw ValidationError("max_ticks must be positive");

        const auto& obj = j.at("objective");
        const auto type = obj.at("type").get<std::string>();
        if (type == "elimination") {
            s.objective.kind = GlobalObjective::Kind::Elimination;
        } else if (type == "reach_point" || type == "defend_point") {
            s.objective.kind = type == "reach_point" ? GlobalObjective::Kind::ReachPoint : GlobalObjective::Kind::DefendPoint;
            s.objective.point = vec_of(obj.at("point"));
            s.objective.radius = obj.value("radius", 3.0);
        } else {
            throw ValidationError("unknown objective type '" + type + "'");
        }

        for (const auto& a : j.at("allies")) s.allies.push_back(roster_of(a));
        const auto& lib = bt::standard_library();
        for (const auto& e : j.at("enemies")) {
            EnemyGroup g;
            g.roster = roster_of(e);
            g.tree = e.at("tree").get<std::string>();
            if (!lib.count(g.tree)) throw ValidationError("unknown behavior tree '" + g.tree + "'");
            for (const auto& p : e.at("route")) g.route.push_back(vec_of(p));
            if (g.route.empty()) throw ValidationError("enemy group without a route");
            s.enemies.push_back(std::move(g));
        }
        if (j.contains("markers")) {
            for (const auto& m : j["markers"]) {
                const Vec2 p = vec_of(m.at("pos"));
                s.markers.push_back({m.at("label").get<std::string>(), {static_cast<int>(p.x), static_cast<int>(p.y)}});
            }
        }
        s.mission = j.value("mission", "");
        if (j.contains("position_rule")) {
            const auto& r = j["position_rule"];
            s.position_rule.base_radius = r.value("base_radius", s.position_rule.base_radius);
            s.position_rule.crowd_term = r.value("crowd_term", s.position_rule.crowd_term);
            s.position_rule.stop_term = r.value("stop_term", s.position_rule.stop_term);
        }
        s.waypoint_radius = j.value("waypoint_radius", s.waypoint_radius);
        if (s.allies.empty() || s.enemies.empty()) throw ValidationError("both teams need at least one roster entry");
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(file.string() + ": " + e.what());
    }
}

std::vector<std::string> builtin_scenario_names() {
    return {"coordinate", "exploit_weakness", "markers_terrain", "strategize_points"};
}

Scenario load_builtin_scenario(std::string_view name) {
    const auto names = builtin_scenario_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw NotFoundError("unknown scenario '" + std::string(name) + "'");
    }
    return load_scenario(data_dir() / "scenarios" / (std::string(name) + ".json"));
}

std::vector<Scenario> builtin_scenarios() {
    std::vector<Scenario> out;
    for (const auto& n : builtin_scenario_names()) out.push_back(load_builtin_scenario(n));
    return out;
}

namespace {

std::vector<int> apportion(const std::vector<int>& counts, int total) {
    const long long sum = std::accumulate(counts.begin(), counts.end(), 0LL);
    std::vector<int> out(counts.size());
    std::vector<std::pair<long long, std::size_t>> rem;
    int given = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const long long num = static_cast<long long>(counts[i]) * total;
        out[i] = static_cast<int>(num / sum);
        given += out[i];
        rem.push_back({num % sum, i});
    }
    std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < total; ++k, ++given) ++out[rem[k % rem.size()].second];
    return out;
}

/// Grows a spawn region away from the nearest map edge until it holds
/// `count` units at a comfortable density.
Rect fit_region(const Rect& r, int count, int old_count, const WorldMap& map) {
    if (count <= old_count) return r;
    const double area = (r.top_right.x - r.bottom_left.x) * (r.top_right.y - r.bottom_left.y);
    const double needed = area * count / old_count;
    Rect out = r;
    const double w = r.top_right.x - r.bottom_left.x;
    const double grow = needed / w - (r.top_right.y - r.bottom_left.y);
    if (r.bottom_left.y <= map.height() - r.top_right.y) {
        out.top_right.y = std::min<double>(map.height(), out.top_right.y + grow);
    } else {
        out.bottom_left.y = std::max(0.0, out.bottom_left.y - grow);
    }
    return out;
}

}  // namespace

Scenario scale_scenario(const Scenario& scenario, int allies, int enemies) {
    if (allies < static_cast<int>(scenario.allies.size()) || enemies < static_cast<int>(scenario.enemies.size())) {
        throw ValidationError("scaled roster too small for " + scenario.name);
    }
    Scenario s = scenario;
    std::vector<int> a, e;
    for (const auto& r : s.allies) a.push_back(r.count);
    for (const auto& g : s.enemies) e.push_back(g.roster.count);
    const auto na = apportion(a, allies);
    const auto ne = apportion(e, enemies);
    // Entries sharing a region grow together.
    auto scale_group = [&](auto get_entry, std::size_t n, const std::vector<int>& old_counts,
                           const std::vector<int>& new_counts) {
        std::vector<Rect> fitted(n);
        for (std::size_t i = 0; i < n; ++i) {
            int old_total = 0, new_total = 0;
            for (std::size_t k = 0; k < n; ++k) {
                if (get_entry(k).region == get_entry(i).region) {
                    old_total += old_counts[k];
                    new_total += new_counts[k];
                }
            }
            fitted[i] = fit_region(get_entry(i).region, new_total, old_total, *s.map);
        }
        for (std::size_t i = 0; i < n; ++i) {
            get_entry(i).region = fitted[i];
            get_entry(i).count = new_counts[i];
        }
    };
    scale_group([&](std::size_t i) -> RosterEntry& { return s.allies[i]; }, s.allies.size(), a, na);
    scale_group([&](std::size_t i) -> RosterEntry& { return s.enemies[i].roster; }, s.enemies.size(), e, ne);
    return s;
}

std::string scenario_fingerprint(const Scenario& s) {
    json j;
    j["engine"] = kEngineVersion;
    j["name"] = s.name;
    j["map"] = map_file_text(*s.map);
    j["max_ticks"] = s.max_ticks;
    j["objective"] = {{"type", objective_kind_name(s.objective.kind)},
                      {"point", vec_json(s.objective.point)},
                      {"radius", s.objective.radius}};
    json types = json::array();
    for (UnitKind k : {UnitKind::Spearmen, UnitKind::Archer, UnitKind::Cavalry}) {
        const auto& t = s.types[k];
        types.push_back({t.speed, t.max_health, t.damage, t.attack_range, t.sight_range, t.cooldown});
    }
    j["types"] = types;
    json allies = json::array();
    for (const auto& r : s.allies) allies.push_back(roster_json(r));
    j["allies"] = allies;
    json enemies = json::array();
    for (const auto& g : s.enemies) {
        json route = json::array();
        for (const auto& p : g.route) route.push_back(vec_json(p));
        enemies.push_back({{"roster", roster_json(g.roster)}, {"tree", g.tree}, {"route", route}});
    }
    j["enemies"] = enemies;
    j["position_rule"] = {{"base_radius", s.position_rule.base_radius},
                          {"crowd_term", s.position_rule.crowd_term},
                          {"stop_term", s.position_rule.stop_term},
                          {"stop_low", s.position_rule.params.stop_low},
                          {"stop_middle", s.position_rule.params.stop_middle},
                          {"noise", s.position_rule.params.follow_noise_degrees}};
    j["waypoint_radius"] = s.waypoint_radius;
    return j.dump();
}

std::string config_hash(const Scenario& scenario) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : scenario_fingerprint(scenario)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

GameState initial_state(const Scenario& scenario, std::uint64_t seed) {
    GameState state(scenario.map, scenario.types, seed);
    Rng rng = Rng::stream(seed, 0xC0FFEE, 0, 0);
    state.team(Team::Ally) = spawn_roster(*scenario.map, scenario.types, Team::Ally, scenario.allies, rng);
    std::vector<RosterEntry> enemies;
    for (const auto& g : scenario.enemies) enemies.push_back(g.roster);
    state.team(Team::Enemy) = spawn_roster(*scenario.map, scenario.types, Team::Enemy, enemies, rng);
    state.refresh();
    return state;
}

}  // namespace hive

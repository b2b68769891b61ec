#include <cstdio>
#include <fstream>
#include <sstream>

#include "hive/errors.hpp"
#include "hive/scenario.hpp"
#include "json.hpp"

namespace hive {

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t parse_hex64(const std::string& s) { return std::stoull(s, nullptr, 16); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return j[key].get<double>();
}

}  // namespace

std::string replay_to_json(const ReplayRecord& r) {
    json j;
    j["schema_version"] = r.schema_version;
    j["engine_version"] = r.engine_version;
    j["config_hash"] = r.config_hash;
    j["scenario"] = r.scenario;
    j["ability"] = r.ability;
    j["provider"] = r.provider;
    j["model"] = r.model;
    j["temperature"] = r.temperature;
    j["seed"] = hex64(r.seed);
    j["ally_units"] = r.ally_units;
    j["enemy_units"] = r.enemy_units;
    j["prompt"] = r.prompt;
    j["response"] = r.response;
    j["plan_text"] = r.plan_text;
    j["plan_normalized"] = r.plan_normalized;
    j["diagnostics"] = r.diagnostics;
    j["outcome"] = outcome_name(r.outcome);
    j["metrics"] = {{"pct_enemies_eliminated", r.metrics.pct_enemies_eliminated},
                    {"min_ally_distance_to_objective", optional_json(r.metrics.min_ally_distance_to_objective)},
                    {"ticks_elapsed", r.metrics.ticks_elapsed},
                    {"ally_survivors", r.metrics.ally_survivors},
                    {"enemy_survivors", r.metrics.enemy_survivors}};
    j["achieved_steps"] = r.achieved_steps;
    j["final_hash"] = hex64(r.final_hash);
    j["timing"] = {{"model_latency_s", optional_json(r.model_latency_s)}, {"sim_wall_s", optional_json(r.sim_wall_s)}};
    json hashes = json::array();
    for (auto h : r.tick_hashes) hashes.push_back(hex64(h));
    j["tick_hashes"] = hashes;
    return j.dump(2) + "\n";
}

ReplayRecord replay_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("replay is not valid JSON: ") + e.what());
    }
    const int schema = j.value("schema_version", -1);
    if (schema != kSchemaVersion) {
        throw ReplayVersionError("replay schema version " + std::to_string(schema) + " is not supported (expected " +
                                 std::to_string(kSchemaVersion) + ")");
    }
    const auto engine = j.value("engine_version", std::string());
    if (engine != kEngineVersion) {
        throw ReplayVersionError("replay was produced by " + engine + ", this build is " + std::string(kEngineVersion));
    }
    try {
        ReplayRecord r;
        r.schema_version = schema;
        r.engine_version = engine;
        r.config_hash = j.at("config_hash").get<std::string>();
        r.scenario = j.at("scenario").get<std::string>();
        r.ability = j.value("ability", "");
        r.provider = j.value("provider", "");
        r.model = j.value("model", "");
        r.temperature = j.value("temperature", 0.0);
        r.seed = parse_hex64(j.at("seed").get<std::string>());
        r.ally_units = j.at("ally_units").get<int>();
        r.enemy_units = j.at("enemy_units").get<int>();
        r.prompt = j.value("prompt", "");
        r.response = j.value("response", "");
        r.plan_text = j.value("plan_text", "");
        r.plan_normalized = j.value("plan_normalized", "");
        r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
        const auto outcome = outcome_from_name(j.at("outcome").get<std::string>());
        if (!outcome) throw ValidationError("unknown outcome in replay");
        r.outcome = *outcome;
        const auto& m = j.at("metrics");
        r.metrics.pct_enemies_eliminated = m.at("pct_enemies_eliminated").get<double>();
        r.metrics.min_ally_distance_to_objective = optional_from(m, "min_ally_distance_to_objective");
        r.metrics.ticks_elapsed = m.at("ticks_elapsed").get<int>();
        r.metrics.ally_survivors = m.at("ally_survivors").get<int>();
        r.metrics.enemy_survivors = m.at("enemy_survivors").get<int>();
        r.achieved_steps = j.value("achieved_steps", std::vector<int>{});
        r.final_hash = parse_hex64(j.at("final_hash").get<std::string>());
        if (j.contains("timing")) {
            r.model_latency_s = optional_from(j["timing"], "model_latency_s");
            r.sim_wall_s = optional_from(j["timing"], "sim_wall_s");
        }
        for (const auto& h : j.value("tick_hashes", std::vector<std::string>{})) r.tick_hashes.push_back(parse_hex64(h));
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed replay: ") + e.what());
    }
}

void save_replay(const ReplayRecord& record, const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + file.string());
    out << replay_to_json(record);
}

ReplayRecord load_replay(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return replay_from_json(ss.str());
}

ReplayRecord replay_episode(const ReplayRecord& record, const Scenario& scenario, ExecPolicy policy) {
    const Scenario scaled = (scenario.ally_count() == record.ally_units && scenario.enemy_count() == record.enemy_units)
                                ? scenario
                                : scale_scenario(scenario, record.ally_units, record.enemy_units);
    const auto hash = config_hash(scaled);
    if (hash != record.config_hash) {
        throw ReplayVersionError("scenario configuration changed since the replay was recorded (" + record.config_hash +
                                 " vs " + hash + ")");
    }
    EpisodeOptions opts;
    opts.seed = record.seed;
    opts.policy = policy;
    opts.record_hashes = !record.tick_hashes.empty();
    auto out = run_episode(scaled, prepare_plan(scaled, record.response), opts);
    out.ability = record.ability;
    out.provider = record.provider;
    out.model = record.model;
    out.temperature = record.temperature;
    out.prompt = record.prompt;
    out.model_latency_s = record.model_latency_s;
    return out;
}

}  // namespace hive

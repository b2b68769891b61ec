#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "fake_vendor.hpp"
#include "hive/errors.hpp"
#include "hive/server.hpp"
#include "json.hpp"

using namespace hive;
using namespace hive::server;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

fs::path answers() { return fs::path(HIVE_DATA_DIR) / "fixtures" / "answers"; }

/// A running service plus an HTTP client pointed at it.
struct Harness {
    SessionService service;
    HttpServer http;
    int port;
    httplib::Client client;

    explicit Harness(ServerConfig cfg)
        : service(std::move(cfg)), http(service), port(http.start("127.0.0.1", 0)), client("127.0.0.1", port) {
        client.set_read_timeout(60, 0);
    }

    httplib::Result post(const std::string& path, const json& body = json::object()) {
        return client.Post(path, body.dump(), "application/json");
    }
    std::string create(const std::string& scenario, std::optional<std::uint64_t> seed = std::nullopt) {
        json body = {{"scenario", scenario}};
        if (seed) body["seed"] = *seed;
        auto r = post("/sessions", body);
        REQUIRE(r);
        REQUIRE(r->status == 201);
        return json::parse(r->body)["id"];
    }

    /// Reads a server-sent event stream to its end.
    std::vector<std::pair<int, StateFrame>> stream(const std::string& id, const std::string& query = "",
                                                   const httplib::Headers& headers = {}) {
        std::string raw;
        auto r = client.Get("/sessions/" + id + "/stream" + query, headers, [&](const char* data, size_t n) {
            raw.append(data, n);
            return true;
        });
        REQUIRE(r);
        REQUIRE(r->status == 200);
        CHECK(r->get_header_value("Content-Type") == "text/event-stream");
        return parse_events(raw);
    }

    static std::vector<std::pair<int, StateFrame>> parse_events(const std::string& raw) {
        std::vector<std::pair<int, StateFrame>> out;
        std::size_t pos = 0;
        while (true) {
            const auto end = raw.find("\n\n", pos);
            if (end == std::string::npos) break;
            const auto event = raw.substr(pos, end - pos);
            pos = end + 2;
            int id = -1;
            std::string data;
            std::istringstream lines(event);
            for (std::string line; std::getline(lines, line);) {
                if (line.rfind("id: ", 0) == 0) id = std::stoi(line.substr(4));
                if (line.rfind("data: ", 0) == 0) data = line.substr(6);
            }
            out.emplace_back(id, frame_from_json(data));
        }
        CHECK(pos == raw.size());
        return out;
    }

    json get(const std::string& path) {
        auto r = client.Get(path);
        REQUIRE(r);
        REQUIRE(r->status == 200);
        return json::parse(r->body);
    }
};

ServerConfig mock_config(const fs::path& dir, double tps = 0.0, int decimation = 1) {
    ServerConfig c;
    c.mock_dir = dir;
    c.ticks_per_second = tps;
    c.decimation = decimation;
    return c;
}

/// Frames re-derived from a replay record: the same seed and response,
/// sampled at the stream's tick step.
std::vector<StateFrame> frames_from_replay(const ReplayRecord& rec, int step) {
    const auto scenario = load_builtin_scenario(rec.scenario);
    std::vector<StateFrame> frames;
    EpisodeOptions eo;
    eo.seed = rec.seed;
    StateFrame last;
    eo.on_tick = [&](const GameState& s, const TickInfo&) {
        last = make_frame(s);
        if (s.tick % step == 0) frames.push_back(last);
    };
    const auto again = run_episode(scenario, prepare_plan(scenario, rec.response), eo);
    if (!frames.empty() && frames.back().tick == last.tick) frames.pop_back();
    last.outcome = again.outcome;
    frames.push_back(last);
    return frames;
}

}  // namespace

TEST_CASE("frame JSON round trip and cadence arithmetic") {
    const auto scenario = load_builtin_scenario("exploit_weakness");
    auto state = initial_state(scenario, 4);
    state.units[1][3].health = 0;
    const auto f = make_frame(state, Outcome::Tie);
    CHECK(f.units.size() == static_cast<std::size_t>(scenario.ally_count() + scenario.enemy_count() - 1));
    for (const auto& u : f.units) CHECK(u.health > 0);
    CHECK(frame_from_json(frame_to_json(f)) == f);
    CHECK_THROWS_AS(frame_from_json("{\"tick\": 1}"), ValidationError);

    ServerConfig c;
    c.mock_dir = answers();
    CHECK(c.frame_step() == 1);  // 10 ticks/s is under 20 fps
    c.ticks_per_second = 100;
    CHECK(c.frame_step() == 5);
    c.ticks_per_second = 0;
    c.decimation = 10;
    CHECK(c.frame_step() == 10);
    c.decimation = 0;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.decimation = 1;
    c.mock_dir = "/nonexistent";
    CHECK_THROWS_AS(c.validate(), ValidationError);

    const auto geo = json::parse(map_geometry_json(*scenario.map));
    CHECK(geo["width"] == scenario.map->width());
    CHECK(geo["features"].size() == scenario.map->features().size());
}

TEST_CASE("session creation") {
    Harness h(mock_config(answers()));
    auto r = h.post("/sessions", {{"scenario", "strategize_points"}, {"seed", 7}});
    REQUIRE(r);
    REQUIRE(r->status == 201);
    const auto j = json::parse(r->body);
    CHECK(j["phase"] == "planning");
    CHECK(j["allies"] == 700);
    CHECK(j["seed"] == 7);
    CHECK(j["map"]["width"].get<int>() > 0);
    CHECK_FALSE(j["map"]["features"].empty());
    CHECK(j["frame"]["tick"] == 0);
    CHECK(j["frame"]["units"].size() == 700 + 900);

    // Same seed, same initial frame; no seed, one drawn and recorded.
    auto again = json::parse(h.post("/sessions", {{"scenario", "strategize_points"}, {"seed", 7}})->body);
    CHECK(again["frame"] == j["frame"]);
    CHECK(again["id"] != j["id"]);
    const auto drawn = json::parse(h.post("/sessions", {{"scenario", "coordinate"}})->body);
    CHECK(drawn["seed"].is_number_unsigned());
    CHECK(h.get("/sessions/" + drawn["id"].get<std::string>())["seed"] == drawn["seed"]);
    CHECK(h.get("/sessions")["sessions"].size() == 3);

    CHECK(h.post("/sessions", {{"scenario", "atlantis"}})->status == 404);
    CHECK(h.post("/sessions", {{"seed", 1}})->status == 400);
    CHECK(h.client.Post("/sessions", "not json", "application/json")->status == 400);
    CHECK(h.client.Get("/sessions/s999")->status == 404);
    CHECK(h.get("/scenarios")["abilities"].size() == 5);
}

TEST_CASE("markers are lettered in placement order and reach the next prompt") {
    std::vector<std::string> systems;
    std::mutex mu;
    auto cfg = mock_config(answers());
    struct Spy : llm::Provider {
        std::vector<std::string>* out;
        std::mutex* mu;
        llm::MockProvider mock{answers()};
        std::string name() const override { return "mock"; }
        llm::Completion complete(const llm::ProviderConfig& c, const std::vector<llm::Message>& m) override {
            std::lock_guard lock(*mu);
            out->push_back(m.front().content);
            mock.select("follow_markers", 0);
            return mock.complete(c, m);
        }
    };
    cfg.factory = [&] {
        auto s = std::make_unique<Spy>();
        s->out = &systems;
        s->mu = &mu;
        return s;
    };
    Harness h(std::move(cfg));
    const auto id = h.create("follow_markers", 1);
    h.post("/sessions/" + id + "/prompt", {{"text", "Hold on."}});
    auto a = h.post("/sessions/" + id + "/markers", {{"x", 193}, {"y", 85}});
    auto b = h.post("/sessions/" + id + "/markers", {{"x", 49}, {"y", 136}});
    REQUIRE(a->status == 201);
    REQUIRE(b->status == 201);
    CHECK(json::parse(a->body) == json{{"label", "A"}, {"x", 193}, {"y", 85}});
    CHECK(json::parse(b->body) == json{{"label", "B"}, {"x", 49}, {"y", 136}});
    CHECK(h.post("/sessions/" + id + "/markers", {{"x", 5000}, {"y", 1}})->status == 400);
    CHECK(h.post("/sessions/" + id + "/markers", {{"x", 1.5}, {"y", 1}})->status == 400);
    CHECK(h.get("/sessions/" + id)["markers"].size() == 2);

    h.post("/sessions/" + id + "/prompt", {{"text", "Follow the markers."}});
    REQUIRE(systems.size() == 2);
    CHECK(systems[0].find("Markers:\n") == std::string::npos);
    CHECK(systems[1].find("Markers:\nA at (193, 85)\nB at (49, 136)\n") != std::string::npos);
    // The second request carries the first exchange.
    const auto view = h.get("/sessions/" + id);
    CHECK(view["transcript"].size() == 4);
    CHECK(view["transcript"][0]["role"] == "user");
    CHECK(view["transcript"][1]["role"] == "assistant");
}

TEST_CASE("command loop: re-prompt after an invalid plan, run, replay") {
    TempDir fx("hive_server_fixtures");
    write(fx.path / "coordinate" / "0.txt", "BEGIN PLAN\nStep 0:\nprerequisites: [7]\nEND PLAN");
    write(fx.path / "coordinate" / "1.txt", read_file(answers() / "coordinate.txt"));
    TempDir replays("hive_server_replays");
    auto cfg = mock_config(fx.path);
    cfg.replay_dir = replays.path;
    Harness h(std::move(cfg));
    const auto id = h.create("coordinate", 11);
    const auto base = "/sessions/" + id;

    auto r = h.post(base + "/prompt", {{"text", "Cover the central row."}});
    REQUIRE(r->status == 200);
    auto j = json::parse(r->body);
    CHECK(j["plan_ok"] == false);
    CHECK_FALSE(j["diagnostics"].empty());
    CHECK(h.get(base)["phase"] == "planning");

    r = h.post(base + "/run");
    CHECK(r->status == 409);
    CHECK(json::parse(r->body)["error"].get<std::string>().find("no valid plan") != std::string::npos);

    r = h.post(base + "/prompt", {{"text", "Try again."}});
    j = json::parse(r->body);
    CHECK(j["plan_ok"] == true);
    CHECK(j["assistant"].get<std::string>().find("BEGIN PLAN") != std::string::npos);
    CHECK(j["steps"] == 2);
    CHECK(j["plan"]["steps"].size() == 2);
    CHECK(h.client.Get(base + "/replay")->status == 409);

    r = h.post(base + "/run");
    CHECK((r->status == 202 || r->status == 200));
    REQUIRE(h.service.wait_finished(id, std::chrono::seconds(120)));
    r = h.post(base + "/run");
    CHECK(r->status == 200);
    CHECK(json::parse(r->body)["phase"] == "finished");
    const auto outcome = json::parse(r->body)["outcome"];
    CHECK(h.post(base + "/prompt", {{"text", "More."}})->status == 409);
    CHECK(h.post(base + "/markers", {{"x", 1}, {"y", 1}})->status == 409);

    const auto rec = replay_from_json(h.client.Get(base + "/replay")->body);
    CHECK(outcome_name(rec.outcome) == outcome.get<std::string>());
    CHECK(rec.prompt == "Try again.");
    CHECK(rec.seed == 11);
    CHECK(load_replay(replays.path / (id + ".json")) == rec);
    // The session's episode is re-executable from its replay.
    CHECK(replay_episode(rec, load_builtin_scenario("coordinate")).final_hash == rec.final_hash);
    CHECK(h.get(base)["outcome"] == outcome);
}

TEST_CASE("provider failure is surfaced") {
    TempDir fx("hive_server_empty");
    Harness h(mock_config(fx.path));
    const auto id = h.create("exploit_terrain", 1);
    auto r = h.post("/sessions/" + id + "/prompt", {{"text", "Go."}});
    CHECK(r->status == 502);
    CHECK(json::parse(r->body)["kind"] == "missing");
    CHECK(h.get("/sessions/" + id)["transcript"].empty());
    CHECK(h.post("/sessions/" + id + "/prompt", json::object())->status == 400);
}

TEST_CASE("stream: static frame, decimation, final outcome, resume, replay reconstruction") {
    Harness h(mock_config(answers(), 0.0, 10));
    const auto id = h.create("exploit_weakness", 5);

    auto planning = h.stream(id);
    REQUIRE(planning.size() == 1);
    CHECK(planning[0].first == 0);
    CHECK(planning[0].second.tick == 0);
    CHECK_FALSE(planning[0].second.outcome);

    h.post("/sessions/" + id + "/prompt", {{"text", "Exploit their weakness."}});
    h.post("/sessions/" + id + "/run");
    REQUIRE(h.service.wait_finished(id, std::chrono::seconds(120)));
    const auto rec = replay_from_json(h.client.Get("/sessions/" + id + "/replay")->body);
    const int ticks = rec.metrics.ticks_elapsed;

    const auto events = h.stream(id);
    // Ticks 0, 10, ... below the last tick, then the final frame.
    const std::size_t expected = (ticks - 1) / 10 + 1 + 1;
    CHECK(events.size() == expected);
    CHECK(events.size() <= static_cast<std::size_t>(ticks / 10 + 1 + 1));
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(events[i].first == events[i].second.tick);
        if (i > 0) CHECK(events[i].second.tick > events[i - 1].second.tick);
        CHECK(events[i].second.outcome.has_value() == (i + 1 == events.size()));
        for (const auto& u : events[i].second.units) CHECK(u.health > 0);
    }
    CHECK(events.back().second.tick == ticks);
    CHECK(*events.back().second.outcome == rec.outcome);

    std::vector<StateFrame> streamed;
    for (const auto& [tick, f] : events) streamed.push_back(f);
    CHECK(streamed == frames_from_replay(rec, 10));

    // Resume after a dropped connection.
    const int cut = events[3].first;
    auto rest = h.stream(id, "?from=" + std::to_string(cut));
    REQUIRE(rest.size() == events.size() - 4);
    CHECK(rest.front().second == events[4].second);
    auto via_header = h.stream(id, "", {{"Last-Event-ID", std::to_string(cut)}});
    CHECK(via_header.size() == rest.size());
    CHECK(h.client.Get("/sessions/" + id + "/stream?from=abc")->status == 400);
    CHECK(h.client.Get("/sessions/nope/stream")->status == 404);
}

TEST_CASE("paced run streams live to two subscribers") {
    Harness h(mock_config(answers(), 100.0, 1));
    const auto id = h.create("exploit_weakness", 2);
    h.post("/sessions/" + id + "/prompt", {{"text", "Go."}});
    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(h.post("/sessions/" + id + "/run")->status == 202);

    std::vector<std::pair<int, StateFrame>> a, b;
    std::thread ta([&] {
        httplib::Client c("127.0.0.1", h.port);
        std::string raw;
        c.Get("/sessions/" + id + "/stream", [&](const char* d, size_t n) {
            raw.append(d, n);
            return true;
        });
        a = Harness::parse_events(raw);
    });
    std::thread tb([&] {
        httplib::Client c("127.0.0.1", h.port);
        std::string raw;
        c.Get("/sessions/" + id + "/stream", [&](const char* d, size_t n) {
            raw.append(d, n);
            return true;
        });
        b = Harness::parse_events(raw);
    });
    ta.join();
    tb.join();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    REQUIRE_FALSE(a.empty());
    CHECK(a == b);
    const int ticks = a.back().second.tick;
    REQUIRE(a.back().second.outcome);
    // 100 ticks/s capped at 20 frames/s: every 5th tick.
    CHECK(a.size() == static_cast<std::size_t>((ticks - 1) / 5 + 2));
    CHECK(wall >= ticks / 100.0 * 0.9);
}

TEST_CASE("no credential material leaves the server") {
    const std::string secret = "sk-server-secret-0a1b2c3d4e";
    ::setenv("HIVE_SERVER_SECRET", secret.c_str(), 1);
    FakeVendor vendor;
    vendor.reply = json{{"choices",
                         {{{"message", {{"role", "assistant"}, {"content", read_file(answers() / "coordinate.txt")}}},
                           {"finish_reason", "stop"}}}}}
                       .dump();
    TempDir replays("hive_server_secret");
    ServerConfig cfg;
    cfg.provider = llm::ProviderConfig::defaults_for("openai");
    cfg.provider.endpoint = vendor.url();
    cfg.provider.credential_env = "HIVE_SERVER_SECRET";
    cfg.ticks_per_second = 0;
    cfg.replay_dir = replays.path;
    Harness h(std::move(cfg));
    const auto id = h.create("coordinate", 3);
    const auto base = "/sessions/" + id;
    std::vector<std::string> bodies;
    bodies.push_back(h.post(base + "/prompt", {{"text", "Go."}})->body);
    CHECK(vendor.header("Authorization") == "Bearer " + secret);
    bodies.push_back(h.post(base + "/run")->body);
    REQUIRE(h.service.wait_finished(id, std::chrono::seconds(120)));
    for (const auto* path : {"", "/replay"}) bodies.push_back(h.client.Get(base + path)->body);
    bodies.push_back(h.client.Get("/sessions")->body);
    std::string raw;
    h.client.Get(base + "/stream", [&](const char* d, size_t n) {
        raw.append(d, n);
        return true;
    });
    bodies.push_back(raw);
    for (const auto& e : fs::directory_iterator(replays.path)) bodies.push_back(read_file(e.path()));
    CHECK(bodies.size() == 7);
    for (const auto& text : bodies) {
        CHECK_FALSE(text.empty());
        CHECK(text.find(secret) == std::string::npos);
        CHECK(text.find("HIVE_SERVER_SECRET") == std::string::npos);
    }
}

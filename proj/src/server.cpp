#include "hive/server.hpp"

#include <cmath>
#include <condition_variable>
#include <fstream>
#include <random>

#include "hive/errors.hpp"
#include "hive/log.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hive::server {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Planning: return "planning";
        case Phase::Running: return "running";
        case Phase::Finished: return "finished";
    }
    return "?";
}

StateFrame make_frame(const GameState& state, std::optional<Outcome> outcome) {
    StateFrame f;
    f.tick = state.tick;
    f.outcome = outcome;
    for (const auto& team : state.units)
        for (const auto& u : team)
            if (u.alive()) f.units.push_back({u.id, u.team, u.kind, u.pos.x, u.pos.y, u.health});
    return f;
}

namespace {

json frame_json(const StateFrame& f) {
    json units = json::array();
    for (const auto& u : f.units)
        units.push_back({{"id", u.id},
                         {"team", team_name(u.team)},
                         {"type", kind_name(u.kind)},
                         {"x", u.x},
                         {"y", u.y},
                         {"health", u.health}});
    json j = {{"tick", f.tick}, {"units", std::move(units)}};
    if (f.outcome) j["outcome"] = outcome_name(*f.outcome);
    return j;
}

json point(Vec2 p) { return json::array({p.x, p.y}); }

json plan_summary(const plan::Plan& p, int allies) {
    json steps = json::array();
    for (const auto& s : p.steps) {
        json groups = json::array();
        for (const auto& g : s.groups)
            groups.push_back({{"units", g.units.resolve(allies).size()},
                              {"target", g.target ? json::array({g.target->x, g.target->y}) : json(nullptr)},
                              {"behavior", plan::behavior_word(g.behavior.name)}});
        steps.push_back({{"id", s.id},
                         {"prerequisites", s.prerequisites},
                         {"objective", s.objective.kind == plan::Objective::Kind::Position ? "position" : "elimination"},
                         {"groups", std::move(groups)}});
    }
    return {{"steps", std::move(steps)}};
}

json info_json(const SessionInfo& i) {
    return {{"id", i.id},
            {"name", i.name},
            {"scenario", i.scenario},
            {"seed", i.seed},
            {"phase", phase_name(i.phase)},
            {"allies", i.ally_units},
            {"enemies", i.enemy_units}};
}

}  // namespace

std::string frame_to_json(const StateFrame& frame) { return frame_json(frame).dump(); }

StateFrame frame_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        StateFrame f;
        f.tick = j.at("tick").get<int>();
        for (const auto& u : j.at("units")) {
            FrameUnit fu;
            fu.id = u.at("id").get<int>();
            fu.team = u.at("team").get<std::string>() == "ally" ? Team::Ally : Team::Enemy;
            const auto kind = kind_from_name(u.at("type").get<std::string>());
            if (!kind) throw ValidationError("unknown unit type in frame");
            fu.kind = *kind;
            fu.x = u.at("x").get<double>();
            fu.y = u.at("y").get<double>();
            fu.health = u.at("health").get<int>();
            f.units.push_back(fu);
        }
        if (j.contains("outcome")) {
            f.outcome = outcome_from_name(j["outcome"].get<std::string>());
            if (!f.outcome) throw ValidationError("unknown outcome in frame");
        }
        return f;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed frame: ") + e.what());
    }
}

std::string map_geometry_json(const WorldMap& map) {
    json features = json::array();
    for (const auto& f : map.features()) {
        json shapes = json::array();
        for (const auto& s : f.shapes) {
            if (const auto* c = std::get_if<Circle>(&s))
                shapes.push_back({{"circle", {{"center", point(c->center)}, {"radius", c->radius}}}});
            else {
                const auto& r = std::get<Rect>(s);
                shapes.push_back({{"rect", {{"bottom_left", point(r.bottom_left)}, {"top_right", point(r.top_right)}}}});
            }
        }
        features.push_back({{"name", f.name}, {"kind", terrain_word(f.kind)}, {"shapes", std::move(shapes)}});
    }
    return json{{"width", map.width()}, {"height", map.height()}, {"features", std::move(features)}}.dump();
}

void ServerConfig::validate() const {
    provider.validate();
    if (!(ticks_per_second >= 0.0)) throw ValidationError("ticks_per_second must be >= 0");
    if (decimation < 1) throw ValidationError("decimation must be >= 1");
    if (!(max_fps > 0.0)) throw ValidationError("max_fps must be > 0");
    if (provider.provider == "mock" && !factory && !fs::is_directory(mock_dir))
        throw ValidationError("mock provider needs a fixture directory, got '" + mock_dir.string() + "'");
}

int ServerConfig::frame_step() const {
    int step = decimation;
    if (ticks_per_second > 0.0) step = std::max(step, static_cast<int>(std::ceil(ticks_per_second / max_fps)));
    return step;
}

struct SessionService::Session {
    SessionInfo info;
    Scenario scenario;
    StateFrame initial;

    std::mutex command;  // one command at a time
    mutable std::mutex mu;
    mutable std::condition_variable cv;
    std::vector<Marker> markers;
    std::vector<llm::Message> history;
    std::vector<llm::Exchange> exchanges;
    int prompts = 0;
    std::optional<PreparedPlan> plan;
    std::string plan_prompt;
    std::vector<StateFrame> frames;
    std::optional<ReplayRecord> record;
    std::thread runner;
};

namespace {
struct Aborted {};
}  // namespace

SessionService::SessionService(ServerConfig config) : config_(std::move(config)) { config_.validate(); }

SessionService::~SessionService() {
    shutdown();
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_)
        if (s->runner.joinable()) s->runner.join();
}

void SessionService::shutdown() {
    stopping_ = true;
    std::lock_guard lock(mu_);
    for (auto& [id, s] : sessions_) {
        std::lock_guard sl(s->mu);
        s->cv.notify_all();
    }
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
    std::lock_guard lock(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
    return it->second;
}

SessionInfo SessionService::create(const std::string& name, std::optional<std::uint64_t> seed) {
    std::string scenario_name = name;
    for (const auto& t : ability_tests())
        if (t.name == name) scenario_name = t.scenario;
    auto s = std::make_shared<Session>();
    s->scenario = load_builtin_scenario(scenario_name);
    if (!seed) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    }
    s->info.name = name;
    s->info.scenario = s->scenario.name;
    s->info.seed = *seed;
    s->info.ally_units = s->scenario.ally_count();
    s->info.enemy_units = s->scenario.enemy_count();
    s->initial = make_frame(initial_state(s->scenario, *seed));
    std::lock_guard lock(mu_);
    s->info.id = "s" + std::to_string(next_id_++);
    sessions_[s->info.id] = s;
    log::info("session " + s->info.id + " created on " + s->info.scenario + " seed " + std::to_string(*seed));
    return s->info;
}

SessionView SessionService::view(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->mu);
    SessionView v;
    v.info = s->info;
    v.markers = s->markers;
    v.transcript = s->history;
    if (s->plan) v.plan = s->plan->plan;
    if (s->record) v.outcome = s->record->outcome;
    return v;
}

std::shared_ptr<const WorldMap> SessionService::map(const std::string& id) const { return find(id)->scenario.map; }

std::vector<SessionInfo> SessionService::list() const {
    std::vector<std::shared_ptr<Session>> all;
    {
        std::lock_guard lock(mu_);
        for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    std::vector<SessionInfo> out;
    for (const auto& s : all) {
        std::lock_guard lock(s->mu);
        out.push_back(s->info);
    }
    return out;
}

PromptResult SessionService::prompt(const std::string& id, const std::string& text) {
    const auto s = find(id);
    std::lock_guard command(s->command);
    llm::Transcript transcript("");
    int index = 0;
    {
        std::lock_guard lock(s->mu);
        if (s->info.phase != Phase::Planning)
            throw ConflictError("session is " + std::string(phase_name(s->info.phase)) + "; prompts are only taken while planning");
        transcript = llm::Transcript(llm::build_system_prompt(s->scenario, s->markers));
        for (const auto& m : s->history) transcript.push(m.role, m.content);
        index = s->prompts;
    }
    auto provider = config_.factory ? config_.factory() : llm::make_provider(config_.provider, config_.mock_dir);
    if (auto* mock = dynamic_cast<llm::MockProvider*>(provider.get())) mock->select(s->info.name, index);

    const auto user = llm::build_user_message(initial_state(s->scenario, s->info.seed), text);
    const auto reply = llm::query_model(*provider, config_.provider, transcript, user);
    auto prepared = prepare_plan(s->scenario, reply.text);

    PromptResult r;
    r.assistant = reply.text;
    r.plan_ok = prepared.ok();
    r.steps = prepared.ok() ? static_cast<int>(prepared.plan->steps.size()) : 0;
    r.diagnostics = plan_diagnostics(prepared);
    r.exchange = reply.exchange;

    std::lock_guard lock(s->mu);
    s->prompts++;
    s->history.push_back({llm::Role::User, user});
    s->history.push_back({llm::Role::Assistant, reply.text});
    s->exchanges.push_back(reply.exchange);
    if (prepared.ok()) {
        s->plan = std::move(prepared);
        s->plan_prompt = text;
    }
    return r;
}

Marker SessionService::add_marker(const std::string& id, int x, int y) {
    const auto s = find(id);
    std::lock_guard command(s->command);
    std::lock_guard lock(s->mu);
    if (s->info.phase != Phase::Planning) throw ConflictError("markers can only be placed while planning");
    if (!s->scenario.map->in_bounds({static_cast<double>(x), static_cast<double>(y)}))
        throw OutOfBoundsError("marker (" + std::to_string(x) + ", " + std::to_string(y) + ") is off the map");
    if (s->markers.size() >= 26) throw ConflictError("all 26 marker letters are in use");
    Marker m{std::string(1, static_cast<char>('A' + s->markers.size())), {x, y}};
    s->markers.push_back(m);
    return m;
}

Phase SessionService::run(const std::string& id) {
    const auto s = find(id);
    std::lock_guard command(s->command);
    std::lock_guard lock(s->mu);
    if (s->info.phase != Phase::Planning) return s->info.phase;
    if (!s->plan) throw ConflictError("no valid plan yet; send a prompt that produces one first");
    s->info.phase = Phase::Running;
    s->frames.clear();
    s->runner = std::thread([this, s] { simulate(s); });
    return Phase::Running;
}

void SessionService::simulate(const std::shared_ptr<Session>& s) {
    const int step = config_.frame_step();
    const double tps = config_.ticks_per_second;
    const auto start = std::chrono::steady_clock::now();
    std::optional<StateFrame> pending;
    bool pending_selected = false;

    auto publish = [&](StateFrame f) {
        std::lock_guard lock(s->mu);
        s->frames.push_back(std::move(f));
        s->cv.notify_all();
    };

    EpisodeOptions eo;
    eo.seed = s->info.seed;
    eo.policy = config_.policy;
    // The final frame is only known once the episode ends, so each frame is
    // held back one tick before it goes out.
    eo.on_tick = [&](const GameState& state, const TickInfo&) {
        if (stopping_) throw Aborted{};
        if (pending && pending_selected) publish(std::move(*pending));
        pending = make_frame(state);
        pending_selected = state.tick % step == 0;
        if (tps > 0.0 && state.tick > 0)
            std::this_thread::sleep_until(start + std::chrono::duration<double>(state.tick / tps));
    };

    std::optional<ReplayRecord> rec;
    try {
        rec = run_episode(s->scenario, *s->plan, eo);
    } catch (const Aborted&) {
        log::info("session " + s->info.id + " run aborted");
    } catch (const std::exception& e) {
        log::error("session " + s->info.id + " run failed: " + e.what());
    }
    if (rec) {
        rec->ability = s->info.name;
        rec->provider = config_.provider.provider;
        rec->model = config_.provider.model;
        rec->temperature = config_.provider.temperature;
        rec->prompt = s->plan_prompt;
        if (!config_.replay_dir.empty()) {
            try {
                save_replay(*rec, config_.replay_dir / (s->info.id + ".json"));
            } catch (const std::exception& e) {
                log::error("cannot save replay of " + s->info.id + ": " + e.what());
            }
        }
    }
    std::lock_guard lock(s->mu);
    if (pending) {
        pending->outcome = rec ? std::optional(rec->outcome) : std::nullopt;
        s->frames.push_back(std::move(*pending));
    }
    s->record = std::move(rec);
    s->info.phase = Phase::Finished;
    s->cv.notify_all();
}

bool SessionService::wait_finished(const std::string& id, std::chrono::milliseconds timeout) const {
    const auto s = find(id);
    std::unique_lock lock(s->mu);
    return s->cv.wait_for(lock, timeout, [&] { return s->info.phase == Phase::Finished || stopping_; }) &&
           s->info.phase == Phase::Finished;
}

ReplayRecord SessionService::replay(const std::string& id) const {
    const auto s = find(id);
    std::lock_guard lock(s->mu);
    if (s->info.phase != Phase::Finished) throw ConflictError("the episode has not finished");
    if (!s->record) throw ConflictError("the episode was aborted");
    return *s->record;
}

FrameBatch SessionService::frames_after(const std::string& id, int after_tick, std::chrono::milliseconds wait) const {
    const auto s = find(id);
    std::unique_lock lock(s->mu);
    FrameBatch b;
    if (s->info.phase == Phase::Planning) {
        if (s->initial.tick > after_tick) b.frames.push_back(s->initial);
        b.complete = true;
        return b;
    }
    auto newer = [&] { return !s->frames.empty() && s->frames.back().tick > after_tick; };
    s->cv.wait_for(lock, wait, [&] { return newer() || s->info.phase == Phase::Finished || stopping_; });
    for (const auto& f : s->frames)
        if (f.tick > after_tick) b.frames.push_back(f);
    b.complete = s->info.phase == Phase::Finished || stopping_;
    return b;
}

// ---------------------------------------------------------------- HTTP

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message, const std::string& kind = {}) {
    json body = {{"error", message}};
    if (!kind.empty()) body["kind"] = kind;
    send_json(res, status, body);
}

/// Maps service exceptions to status codes.
template <class F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
    } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
    } catch (const OutOfBoundsError& e) {
        send_error(res, 400, e.what());
    } catch (const ValidationError& e) {
        send_error(res, 400, e.what());
    } catch (const json::exception& e) {
        send_error(res, 400, std::string("bad request body: ") + e.what());
    } catch (const llm::ProviderError& e) {
        send_error(res, 502, e.what(), std::string(llm::provider_error_name(e.kind())));
    }
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    auto j = json::parse(req.body);
    if (!j.is_object()) throw ValidationError("request body must be a JSON object");
    return j;
}

json view_json(const SessionView& v) {
    json j = info_json(v.info);
    json markers = json::array();
    for (const auto& m : v.markers) markers.push_back({{"label", m.label}, {"x", m.pos.x}, {"y", m.pos.y}});
    j["markers"] = std::move(markers);
    json transcript = json::array();
    for (const auto& m : v.transcript) transcript.push_back({{"role", llm::role_name(m.role)}, {"content", m.content}});
    j["transcript"] = std::move(transcript);
    j["plan"] = v.plan ? plan_summary(*v.plan, v.info.ally_units) : json(nullptr);
    j["outcome"] = v.outcome ? json(outcome_name(*v.outcome)) : json(nullptr);
    return j;
}

}  // namespace

HttpServer::HttpServer(SessionService& service) : service_(service), http_(std::make_unique<httplib::Server>()) {
    auto& http = *http_;

    http.Get("/scenarios", [](const httplib::Request&, httplib::Response& res) {
        json names = builtin_scenario_names();
        json abilities = json::array();
        for (const auto& t : ability_tests()) abilities.push_back(t.name);
        send_json(res, 200, {{"scenarios", names}, {"abilities", abilities}});
    });

    http.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = body_of(req);
            const auto name = body.at("scenario").get<std::string>();
            std::optional<std::uint64_t> seed;
            if (body.contains("seed") && !body["seed"].is_null()) seed = body["seed"].get<std::uint64_t>();
            const auto info = service_.create(name, seed);
            json j = info_json(info);
            j["map"] = json::parse(map_geometry_json(*service_.map(info.id)));
            j["frame"] = frame_json(service_.frames_after(info.id, -1, {}).frames.at(0));
            send_json(res, 201, j);
        });
    });

    http.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
        json all = json::array();
        for (const auto& i : service_.list()) all.push_back(info_json(i));
        send_json(res, 200, {{"sessions", all}});
    });

    http.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { send_json(res, 200, view_json(service_.view(req.matches[1]))); });
    });

    http.Post(R"(/sessions/([^/]+)/prompt)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto text = body_of(req).at("text").get<std::string>();
            const auto r = service_.prompt(req.matches[1], text);
            const auto v = service_.view(req.matches[1]);
            send_json(res, 200,
                      {{"assistant", r.assistant},
                       {"plan_ok", r.plan_ok},
                       {"steps", r.steps},
                       {"diagnostics", r.diagnostics},
                       {"plan", v.plan ? plan_summary(*v.plan, v.info.ally_units) : json(nullptr)},
                       {"exchange",
                        {{"latency_s", r.exchange.latency_s},
                         {"prompt_tokens", r.exchange.prompt_tokens},
                         {"completion_tokens", r.exchange.completion_tokens},
                         {"truncated", r.exchange.truncated},
                         {"attempts", r.exchange.attempts}}}});
        });
    });

    http.Post(R"(/sessions/([^/]+)/markers)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto body = body_of(req);
            if (!body.at("x").is_number_integer() || !body.at("y").is_number_integer())
                throw ValidationError("marker coordinates must be integers");
            const auto m = service_.add_marker(req.matches[1], body["x"].get<int>(), body["y"].get<int>());
            send_json(res, 201, {{"label", m.label}, {"x", m.pos.x}, {"y", m.pos.y}});
        });
    });

    http.Post(R"(/sessions/([^/]+)/run)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto phase = service_.run(req.matches[1]);
            json j = {{"phase", phase_name(phase)}};
            if (phase == Phase::Finished) {
                const auto v = service_.view(req.matches[1]);
                j["outcome"] = v.outcome ? json(outcome_name(*v.outcome)) : json(nullptr);
            }
            send_json(res, phase == Phase::Finished ? 200 : 202, j);
        });
    });

    http.Get(R"(/sessions/([^/]+)/replay)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            res.status = 200;
            res.set_content(replay_to_json(service_.replay(req.matches[1])), "application/json");
        });
    });

    http.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            service_.view(id);  // 404 before the stream opens
            int from = -1;
            try {
                if (req.has_param("from")) from = std::stoi(req.get_param_value("from"));
                else if (req.has_header("Last-Event-ID")) from = std::stoi(req.get_header_value("Last-Event-ID"));
            } catch (const std::exception&) {
                throw ValidationError("resume tick must be an integer");
            }
            auto last = std::make_shared<int>(from);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("text/event-stream", [this, id, last](size_t, httplib::DataSink& sink) {
                const auto batch = service_.frames_after(id, *last, std::chrono::milliseconds(250));
                for (const auto& f : batch.frames) {
                    const auto event = "id: " + std::to_string(f.tick) + "\nevent: frame\ndata: " + frame_to_json(f) + "\n\n";
                    if (!sink.write(event.data(), event.size())) return false;
                    *last = f.tick;
                }
                if (batch.complete) sink.done();
                return true;
            });
        });
    });
}

HttpServer::~HttpServer() {
    stop();
    wait();
}

int HttpServer::start(const std::string& host, int port) {
    const int bound = port == 0 ? http_->bind_to_any_port(host) : (http_->bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw ValidationError("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { http_->listen_after_bind(); });
    http_->wait_until_ready();
    return bound;
}

void HttpServer::wait() {
    if (thread_.joinable()) thread_.join();
}

void HttpServer::stop() {
    service_.shutdown();
    http_->stop();
}

}  // namespace hive::server

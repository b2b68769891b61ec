#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hive/llm_bridge.hpp"

namespace httplib {
class Server;
}

namespace hive::server {

enum class Phase { Planning, Running, Finished };
std::string_view phase_name(Phase p);

struct FrameUnit {
    int id = 0;
    Team team = Team::Ally;
    UnitKind kind = UnitKind::Spearmen;
    double x = 0.0;
    double y = 0.0;
    int health = 0;
    bool operator==(const FrameUnit&) const = default;
};

/// Live units at one tick; the last frame of an episode carries the outcome.
struct StateFrame {
    int tick = 0;
    std::vector<FrameUnit> units;
    std::optional<Outcome> outcome;
    bool operator==(const StateFrame&) const = default;
};

StateFrame make_frame(const GameState& state, std::optional<Outcome> outcome = std::nullopt);
std::string frame_to_json(const StateFrame& frame);
StateFrame frame_from_json(const std::string& text);

/// Map features in a flat-rendering friendly JSON form.
std::string map_geometry_json(const WorldMap& map);

struct ServerConfig {
    /// Server-level provider settings; sessions never hold any of it.
    llm::ProviderConfig provider;
    std::filesystem::path mock_dir;
    /// Real-time pacing of a run. 0 simulates as fast as possible.
    double ticks_per_second = 10.0;
    /// Stream every n-th tick. Paced runs are further thinned to max_fps.
    int decimation = 1;
    double max_fps = 20.0;
    /// Finished episodes are saved here as <session id>.json when set.
    std::filesystem::path replay_dir;
    ExecPolicy policy = ExecPolicy::Parallel;
    /// Overrides make_provider(provider, mock_dir).
    std::function<std::unique_ptr<llm::Provider>()> factory;

    void validate() const;
    /// Ticks between streamed frames.
    int frame_step() const;
};

struct SessionInfo {
    std::string id;
    std::string name;  // as requested: scenario or ability name
    std::string scenario;
    std::uint64_t seed = 0;
    Phase phase = Phase::Planning;
    int ally_units = 0;
    int enemy_units = 0;
};

struct PromptResult {
    std::string assistant;
    bool plan_ok = false;
    int steps = 0;
    std::vector<std::string> diagnostics;
    llm::Exchange exchange;
};

struct SessionView {
    SessionInfo info;
    std::vector<Marker> markers;
    std::vector<llm::Message> transcript;  // user and assistant turns
    std::shared_ptr<const plan::Plan> plan;
    std::optional<Outcome> outcome;
};

struct FrameBatch {
    std::vector<StateFrame> frames;
    bool complete = false;  // nothing more will follow
};

/// Session registry and the human command loop. Commands on one session are
/// serialized; sessions are independent. Throws NotFoundError for unknown
/// sessions or scenarios, ConflictError for commands the phase forbids.
class SessionService {
public:
    explicit SessionService(ServerConfig config);
    ~SessionService();
    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    const ServerConfig& config() const { return config_; }

    /// `name` is a scenario or an ability test name. A random seed is drawn
    /// and recorded when none is given.
    SessionInfo create(const std::string& name, std::optional<std::uint64_t> seed = std::nullopt);
    SessionView view(const std::string& id) const;
    std::shared_ptr<const WorldMap> map(const std::string& id) const;
    std::vector<SessionInfo> list() const;

    /// Queries the provider with the state message and `text`. A valid plan
    /// replaces the stored one; an invalid one leaves it and returns
    /// diagnostics. Provider failures propagate as llm::ProviderError.
    PromptResult prompt(const std::string& id, const std::string& text);
    /// Next letter in placement order. Throws OutOfBoundsError off the map.
    Marker add_marker(const std::string& id, int x, int y);
    /// Starts the episode in the background. No-op once running or finished.
    Phase run(const std::string& id);
    bool wait_finished(const std::string& id, std::chrono::milliseconds timeout) const;
    ReplayRecord replay(const std::string& id) const;

    /// Frames with tick > after_tick, waiting up to `wait` for new ones.
    /// Planning sessions yield their initial frame only.
    FrameBatch frames_after(const std::string& id, int after_tick, std::chrono::milliseconds wait) const;

    /// Wakes every waiter and aborts running episodes.
    void shutdown();

private:
    struct Session;
    std::shared_ptr<Session> find(const std::string& id) const;
    void simulate(const std::shared_ptr<Session>& s);

    ServerConfig config_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t next_id_ = 1;
    std::atomic<bool> stopping_{false};
};

/// HTTP front end:
///   POST /sessions                 {"scenario": name, "seed": n?}
///   GET  /sessions, /sessions/{id}
///   POST /sessions/{id}/prompt     {"text": ...}
///   POST /sessions/{id}/markers    {"x": int, "y": int}
///   POST /sessions/{id}/run
///   GET  /sessions/{id}/replay
///   GET  /sessions/{id}/stream     server-sent events, one StateFrame per
///                                  event; resume with ?from=<tick> or Last-Event-ID
class HttpServer {
public:
    explicit HttpServer(SessionService& service);
    ~HttpServer();

    /// Binds (port 0 picks a free one) and serves on a background thread.
    int start(const std::string& host, int port);
    /// Blocks until stop().
    void wait();
    void stop();

private:
    SessionService& service_;
    std::unique_ptr<httplib::Server> http_;
    std::thread thread_;
};

}  // namespace hive::server

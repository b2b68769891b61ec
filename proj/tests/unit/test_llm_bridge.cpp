#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hive/errors.hpp"
#include "hive/llm_bridge.hpp"
#include "hive/log.hpp"
#include "fake_vendor.hpp"
#include "json.hpp"

using namespace hive;
using namespace hive::llm;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string answer(const std::string& name) { return read_file(fs::path(HIVE_DATA_DIR) / "fixtures/answers" / (name + ".txt")); }

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

/// Fails with the given error a fixed number of times, then answers.
class Flaky : public Provider {
public:
    Flaky(int failures, ProviderError::Kind kind) : failures_(failures), kind_(kind) {}
    std::string name() const override { return "flaky"; }
    Completion complete(const ProviderConfig&, const std::vector<Message>&) override {
        ++calls;
        if (calls <= failures_) throw ProviderError(kind_, "simulated");
        return {"ok", 1, 1, false};
    }
    int calls = 0;

private:
    int failures_;
    ProviderError::Kind kind_;
};

}  // namespace

TEST_CASE("system prompt reproduces the published instruction") {
    auto s = load_builtin_scenario("strategize_points");
    // The published instruction was rendered with these speeds.
    s.types[UnitKind::Spearmen].speed = 2;
    s.types[UnitKind::Archer].speed = 4;
    s.types[UnitKind::Cavalry].speed = 12;
    auto prompt = build_system_prompt(s, {{"A", {17, 5}}, {"B", {6, 32}}, {"C", {25, 28}}});

    const std::string map_header = "\n### Map of this scenario\n";
    const auto at = prompt.find(map_header);
    REQUIRE(at != std::string::npos);
    const auto map_text = describe_map(*s.map);
    CHECK(prompt.compare(at + map_header.size(), map_text.size(), map_text) == 0);
    prompt.erase(at, map_header.size() + map_text.size());

    const auto reference = read_file(fs::path(HIVE_SOURCE_DIR) / "tests/data/instruction_reference.txt");
    REQUIRE_FALSE(reference.empty());
    CHECK(prompt == reference);
}

TEST_CASE("system prompt uses live configuration") {
    const auto s = load_builtin_scenario("strategize_points");
    const auto prompt = build_system_prompt(s, {});
    CHECK(prompt.find("center of your camp in (150, 134)") != std::string::npos);
    CHECK(prompt.find("archer: Health=2; Sight range=15; Attack range=15; Moving speed=2; Attack damage=3; Attack cooldown=1\n") !=
          std::string::npos);
    CHECK(prompt.find("spearmen: Health=24; Sight range=15; Attack range=1; Moving speed=1; Attack damage=1;") !=
          std::string::npos);
    CHECK(prompt.find("cavalry: Health=12; Sight range=15; Attack range=1; Moving speed=6;") != std::string::npos);
    CHECK(prompt.find("Allies:\n\tspearmen: [0:350]\n\tarcher: [350:700]\nEnemies:\n\tspearmen: [0:900]\n") !=
          std::string::npos);
    CHECK(prompt.find("## Markers") == std::string::npos);
    CHECK(prompt == build_system_prompt(s, {}));

    auto tweaked = s;
    tweaked.types[UnitKind::Archer].damage = 5;
    tweaked.types[UnitKind::Cavalry].attack_range = 1.5;
    const auto p2 = build_system_prompt(tweaked, {});
    CHECK(p2.find("Attack range=15; Moving speed=2; Attack damage=5;") != std::string::npos);
    CHECK(p2.find("cavalry: Health=12; Sight range=15; Attack range=1.5;") != std::string::npos);

    // Sections appear in a fixed order.
    const auto m = load_builtin_scenario("markers_terrain");
    const auto with = build_system_prompt(m, m.markers);
    std::vector<std::string> order = {"You are a game assistant", "four types of terrain", "### Map of this scenario",
                                      "River: water at", "## Markers", "A at (193, 85)", "D at (11, 9)",
                                      "Description of the unit types", "Spearmen are strong against Cavalry",
                                      "Descriptions of each team's composition", "# Syntax for a Detailed Plan",
                                      "## Example of a Valid Detailed Plan", "## List of Planning Mistakes",
                                      "objective position at (61, 0)"};
    std::size_t last = 0;
    for (const auto& key : order) {
        CAPTURE(key);
        const auto p = with.find(key, last);
        REQUIRE(p != std::string::npos);
        last = p;
    }
    CHECK(count(with, "\nA at (") == 1);
    CHECK(build_system_prompt(m, {}).find("## Markers") == std::string::npos);
    CHECK(markers_block({{"A", {17, 5}}, {"B", {6, 32}}}) == "Markers:\nA at (17, 5)\nB at (6, 32)\n");
    CHECK(markers_block({}).empty());
}

TEST_CASE("team composition follows roster sizes") {
    const auto coord = load_builtin_scenario("coordinate");
    CHECK(composition_lines(coord.allies) == "\tspearmen: [0:500]\n\tarcher: [500:1000]\n");
    const auto scaled = scale_scenario(coord, 100, 100);
    const auto prompt = build_system_prompt(scaled, {});
    CHECK(prompt.find("Allies:\n\tspearmen: [0:50]\n\tarcher: [50:100]\nEnemies:\n\tspearmen: [0:100]\n") !=
          std::string::npos);
    const auto weak = load_builtin_scenario("exploit_weakness");
    CHECK(build_system_prompt(weak, {}).find("Enemies:\n\tarcher: [0:250]\n\tspearmen: [250:500]\n\tcavalry: [500:750]\n") !=
          std::string::npos);
}

TEST_CASE("state message formatting") {
    auto map = std::make_shared<const WorldMap>(10, 10, std::vector<MapFeature>{});
    GameState st(map, UnitTable::standard(), 0);
    st.team(Team::Ally) = {Unit{0, Team::Ally, UnitKind::Spearmen, {1, 2}, 24, 0},
                           Unit{1, Team::Ally, UnitKind::Spearmen, {3, 4}, 24, 0}};
    CHECK(build_state_message(st) ==
          "Health and positions of all the units of each team (∅ means that the unit is dead).\n"
          "Allies:\nHealth: [24, 24]\nX positions: [1, 3]\nY positions: [2, 4]\n"
          "Enemies:\nHealth: []\nX positions: []\nY positions: []\n");

    st.team(Team::Enemy) = {Unit{0, Team::Enemy, UnitKind::Archer, {2.6, 7.4}, 2, 0},
                            Unit{1, Team::Enemy, UnitKind::Archer, {5, 5}, 0, 0},
                            Unit{2, Team::Enemy, UnitKind::Cavalry, {8.5, 0.49}, 7, 0}};
    const auto msg = build_state_message(st);
    CHECK(msg.find("Enemies:\nHealth: [2, ∅, 7]\nX positions: [3, ∅, 9]\nY positions: [7, ∅, 0]\n") != std::string::npos);

    const auto s = load_builtin_scenario("strategize_points");
    const auto full = build_state_message(initial_state(s, 1));
    std::string health = "Allies:\nHealth: [";
    for (int i = 0; i < 700; ++i) health += std::string(i ? ", " : "") + (i < 350 ? "24" : "2");
    CHECK(full.find(health + "]\n") != std::string::npos);
    CHECK(count(full, "∅") == 1);
    CHECK(build_user_message(st, "Hold the bridge.").ends_with("\nHold the bridge."));
}

TEST_CASE("plan block extraction") {
    const auto sonnet = answer("coordinate");
    const auto block = extract_plan_text(sonnet);
    REQUIRE(block);
    CHECK(block->find_first_not_of(" \n") == block->find("Step 0:"));
    const auto step1 = block->find("Step 1:");
    REQUIRE(step1 != std::string::npos);
    const std::string first = block->substr(0, step1);
    CHECK(count(first, "units: [") == 6);
    CHECK(count(first, ", 75)") == 3);
    CHECK(count(first, ", 65)") == 3);
    CHECK(block->find("BEGIN PLAN") == std::string::npos);

    CHECK_FALSE(extract_plan_text("END PLAN\nStep 0:\nBEGIN PLAN"));
    CHECK_FALSE(extract_plan_text("no plan here"));

    std::vector<std::string> warnings;
    auto previous = log::set_sink([&](log::Level l, std::string_view m) {
        if (l == log::Level::Warning) warnings.emplace_back(m);
    });
    const auto two = extract_plan_text("BEGIN PLAN\nfirst\nEND PLAN\nand\nBEGIN PLAN\nsecond\nEND PLAN\n");
    log::set_sink(previous);
    REQUIRE(two);
    CHECK(two->find("first") != std::string::npos);
    CHECK(two->find("second") == std::string::npos);
    CHECK(warnings.size() == 1);
}

TEST_CASE("mock provider answers from fixtures") {
    TempDir dir("hive_mock_fixtures");
    write(dir.path / "coordinate" / "3.txt", "third");
    write(dir.path / "coordinate.txt", "shared");
    write(dir.path / "default.txt", "fallback");
    MockProvider mock(dir.path);
    ProviderConfig cfg;
    cfg.temperature = 0.7;
    Transcript t("system text");

    mock.select("coordinate", 3);
    auto r = query_model(mock, cfg, t, "go");
    CHECK(r.text == "third");
    CHECK(r.exchange.latency_s >= 0.0);
    CHECK(r.exchange.latency_s < 0.5);
    CHECK(r.exchange.attempts == 1);
    mock.select("coordinate", 4);
    CHECK(query_model(mock, cfg, t, "again").text == "shared");
    mock.select("other", 0);
    CHECK(query_model(mock, cfg, t, "more").text == "fallback");

    REQUIRE(t.messages().size() == 7);
    CHECK(t.messages()[0] == Message{Role::System, "system text"});
    CHECK(t.messages()[1] == Message{Role::User, "go"});
    CHECK(t.messages()[2] == Message{Role::Assistant, "third"});
    CHECK(t.exchanges().size() == 3);

    const auto reqs = mock.requests();
    REQUIRE(reqs.size() == 3);
    for (const auto& q : reqs) CHECK(q.temperature == 0.7);
    CHECK(reqs[2].messages.size() == 6);

    fs::remove(dir.path / "default.txt");
    try {
        query_model(mock, cfg, t, "lost");
        FAIL("expected a missing fixture");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::Missing);
    }
    CHECK(t.messages().size() == 7);
}

TEST_CASE("a recorded answer replayed through the mock gives the same plan") {
    const auto s = load_builtin_scenario("coordinate");
    MockProvider mock(fs::path(HIVE_DATA_DIR) / "fixtures/answers");
    mock.select("coordinate", 0);
    Transcript t(build_system_prompt(s, {}));
    const auto r = query_model(mock, {}, t, build_user_message(initial_state(s, 1), "Defend."));
    CHECK(r.text == answer("coordinate"));
    const auto direct = plan::print_plan(plan::parse_plan(answer("coordinate")));
    CHECK(plan::print_plan(plan::parse_plan(r.text)) == direct);
}

TEST_CASE("transport retries are bounded and limited to connection failures") {
    ProviderConfig cfg;
    Transcript t("sys");
    Flaky twice(2, ProviderError::Kind::Transport);
    const auto r = query_model(twice, cfg, t, "x");
    CHECK(r.exchange.attempts == 3);
    CHECK(twice.calls == 3);

    Flaky thrice(3, ProviderError::Kind::Transport);
    CHECK_THROWS_AS(query_model(thrice, cfg, t, "x"), ProviderError);
    CHECK(thrice.calls == 3);

    cfg.transport_retries = 0;
    Flaky once(1, ProviderError::Kind::Transport);
    CHECK_THROWS_AS(query_model(once, cfg, t, "x"), ProviderError);
    CHECK(once.calls == 1);

    cfg.transport_retries = 2;
    for (auto kind : {ProviderError::Kind::Auth, ProviderError::Kind::Quota, ProviderError::Kind::Timeout,
                      ProviderError::Kind::Protocol}) {
        Flaky f(1, kind);
        CHECK_THROWS_AS(query_model(f, cfg, t, "x"), ProviderError);
        CHECK(f.calls == 1);
    }
    CHECK(t.exchanges().size() == 1);
}

TEST_CASE("unreachable endpoint fails with a transport error") {
    ::setenv("HIVE_TEST_DUMMY_KEY", "dummy", 1);
    auto cfg = ProviderConfig::defaults_for("openai");
    cfg.endpoint = "http://127.0.0.1:1";
    cfg.credential_env = "HIVE_TEST_DUMMY_KEY";
    cfg.timeout_s = 2;
    OpenAIProvider p;
    Transcript t("sys");
    try {
        query_model(p, cfg, t, "hello");
        FAIL("expected a transport error");
    } catch (const ProviderError& e) {
        CHECK(e.kind() == ProviderError::Kind::Transport);
    }
    CHECK(t.messages().size() == 1);
}

TEST_CASE("vendor adapters map the wire formats") {
    const std::string secret = "sk-hive-test-0123456789";
    ::setenv("HIVE_TEST_SECRET", secret.c_str(), 1);
    FakeVendor vendor;

    SUBCASE("openai") {
        vendor.reply = R"({"choices":[{"message":{"role":"assistant","content":"BEGIN PLAN\nEND PLAN"},"finish_reason":"length"}],"usage":{"prompt_tokens":120,"completion_tokens":8}})";
        auto cfg = ProviderConfig::defaults_for("openai");
        cfg.endpoint = vendor.url();
        cfg.credential_env = "HIVE_TEST_SECRET";
        cfg.model = "gpt-4o-mini";
        cfg.temperature = 0.3;
        cfg.max_tokens = 777;
        auto provider = make_provider(cfg);
        Transcript t("You are a game assistant.");
        const auto r = query_model(*provider, cfg, t, "state + prompt");
        CHECK(r.text == "BEGIN PLAN\nEND PLAN");
        CHECK(r.exchange.truncated);
        CHECK(r.exchange.prompt_tokens == 120);
        CHECK(r.exchange.completion_tokens == 8);
        const auto body = nlohmann::json::parse(vendor.last_body);
        CHECK(body["model"] == "gpt-4o-mini");
        CHECK(body["temperature"] == doctest::Approx(0.3));
        CHECK(body["max_tokens"] == 777);
        REQUIRE(body["messages"].size() == 2);
        CHECK(body["messages"][0]["role"] == "system");
        CHECK(body["messages"][1]["content"] == "state + prompt");
        CHECK(vendor.header("Authorization") == "Bearer " + secret);
        for (const auto& m : t.messages()) CHECK(m.content.find(secret) == std::string::npos);
    }
    SUBCASE("anthropic") {
        vendor.reply = R"({"content":[{"type":"text","text":"Here.\n"},{"type":"text","text":"BEGIN PLAN\nEND PLAN"}],"stop_reason":"end_turn","usage":{"input_tokens":50,"output_tokens":9}})";
        auto cfg = ProviderConfig::defaults_for("anthropic");
        cfg.endpoint = vendor.url();
        cfg.credential_env = "HIVE_TEST_SECRET";
        auto provider = make_provider(cfg);
        Transcript t("instruction");
        t.push(Role::User, "earlier");
        t.push(Role::Assistant, "reply");
        const auto r = query_model(*provider, cfg, t, "now");
        CHECK(r.text == "Here.\nBEGIN PLAN\nEND PLAN");
        CHECK_FALSE(r.exchange.truncated);
        CHECK(r.exchange.completion_tokens == 9);
        const auto body = nlohmann::json::parse(vendor.last_body);
        CHECK(body["system"] == "instruction");
        REQUIRE(body["messages"].size() == 3);
        CHECK(body["messages"][0]["role"] == "user");
        CHECK(body["temperature"] == 0.0);
        CHECK(vendor.header("x-api-key") == secret);
        CHECK_FALSE(vendor.header("anthropic-version").empty());
    }
    SUBCASE("status codes map to typed errors") {
        auto cfg = ProviderConfig::defaults_for("openai");
        cfg.endpoint = vendor.url();
        cfg.credential_env = "HIVE_TEST_SECRET";
        OpenAIProvider p;
        const std::vector<std::pair<int, ProviderError::Kind>> cases = {
            {401, ProviderError::Kind::Auth}, {429, ProviderError::Kind::Quota}, {504, ProviderError::Kind::Timeout},
            {500, ProviderError::Kind::Protocol}};
        for (auto [status, kind] : cases) {
            vendor.status = status;
            vendor.reply = "{}";
            Transcript t("sys");
            try {
                query_model(p, cfg, t, "x");
                FAIL("expected an error");
            } catch (const ProviderError& e) {
                CHECK(e.kind() == kind);
                CHECK(std::string(e.what()).find(secret) == std::string::npos);
            }
        }
        vendor.status = 200;
        vendor.reply = "not json";
        Transcript t("sys");
        CHECK_THROWS_AS(query_model(p, cfg, t, "x"), ProviderError);
    }
    SUBCASE("missing credential never reaches the network") {
        auto cfg = ProviderConfig::defaults_for("openai");
        cfg.endpoint = vendor.url();
        cfg.credential_env = "HIVE_TEST_UNSET_VARIABLE";
        ::unsetenv("HIVE_TEST_UNSET_VARIABLE");
        OpenAIProvider p;
        Transcript t("sys");
        try {
            query_model(p, cfg, t, "x");
            FAIL("expected an auth error");
        } catch (const ProviderError& e) {
            CHECK(e.kind() == ProviderError::Kind::Auth);
        }
        CHECK(vendor.last_body.empty());
    }
}

TEST_CASE("provider configuration is validated") {
    ProviderConfig c;
    CHECK_NOTHROW(c.validate());
    c.temperature = 2.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c.temperature = -0.1;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.provider = "gemini";
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = {};
    c.transport_retries = 3;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    CHECK_THROWS_AS(make_provider(ProviderConfig{}), ValidationError);
    CHECK(ProviderConfig::defaults_for("anthropic").credential_env == "ANTHROPIC_API_KEY");
}

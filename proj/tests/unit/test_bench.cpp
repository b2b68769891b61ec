#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "doctest.h"
#include "fake_vendor.hpp"
#include "hive/bench.hpp"
#include "hive/errors.hpp"
#include "json.hpp"

using namespace hive;
using namespace hive::bench;
namespace fs = std::filesystem;

namespace {

const char* kGenericPlan =
    "Sure.\nBEGIN PLAN\nStep 0:\nprerequisites: []\nobjective: elimination all\nunits: all\n"
    "- target position: (75, 75)\n- behavior: attack_in_long_range any\nEND PLAN\n";

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

/// Wraps a mock provider and keeps every request it sees.
struct Capture {
    std::mutex mu;
    std::vector<llm::MockProvider::Request> requests;
    std::vector<std::string> keys;
};

class CapturingMock : public llm::Provider {
public:
    CapturingMock(fs::path dir, Capture& cap) : mock_(std::move(dir)), cap_(cap) {}
    std::string name() const override { return "mock"; }
    llm::Completion complete(const llm::ProviderConfig& c, const std::vector<llm::Message>& m) override {
        {
            std::lock_guard lock(cap_.mu);
            cap_.requests.push_back({c.model, c.temperature, c.max_tokens, m});
        }
        return mock_.complete(c, m);
    }
    llm::MockProvider& inner() { return mock_; }

private:
    llm::MockProvider mock_;
    Capture& cap_;
};

std::map<std::string, int> histogram(const std::vector<EpisodeRow>& rows) {
    std::map<std::string, int> h;
    for (const auto& r : rows) h[std::string(histogram_category(r.outcome))]++;
    return h;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    return out;
}

EpisodeRow row(const std::string& model, const std::string& ability, Outcome o, double pct = 0.0) {
    EpisodeRow r;
    r.model = model;
    r.provider = "mock";
    r.ability = ability;
    r.outcome = o;
    r.metrics.pct_enemies_eliminated = pct;
    if (ability == "follow_markers" || ability == "exploit_terrain") r.metrics.min_ally_distance_to_objective = pct * 100;
    return r;
}

}  // namespace

TEST_CASE("prompt corpus ships fifty plus ten prompts") {
    const auto c = PromptCorpus::load();
    REQUIRE(c.by_ability.size() == 5);
    for (const auto& a : ability_order()) {
        CAPTURE(a);
        const auto& p = c.prompts(a);
        REQUIRE(p.size() == 10);
        for (const auto& s : p) CHECK(s.size() > 40);
    }
    CHECK(c.alone.size() == 10);
    CHECK(c.prompts("coordinate")[0] ==
          "Make a plan that forms as many squads as you think necessary to cover the central row of the battlefield to "
          "eliminate all the enemies as fast as possible. Judisiously place our long range units so that they are not in "
          "close combat.");
    CHECK(c.alone[0] == "First, study the situation to find a good approach to achieve this mission then design the corresponding plan.");
    CHECK_THROWS_AS(c.prompts("rush"), NotFoundError);
    CHECK(alone_abilities().size() == 4);
}

TEST_CASE("suite runs every prompt once and records replays") {
    TempDir fixtures("hive_bench_fixtures");
    TempDir out("hive_bench_out");
    write(fixtures.path / "default.txt", kGenericPlan);
    const auto corpus = PromptCorpus::load();
    SuiteOptions opt;
    opt.abilities = {"coordinate"};
    opt.units = std::make_pair(40, 40);
    opt.mock_dir = fixtures.path;
    opt.out_dir = out.path;
    opt.seed = 3;
    const auto rows = run_ability_suite({}, opt, corpus);
    REQUIRE(rows.size() == 10);
    int sum = 0;
    for (const auto& [k, n] : histogram(rows)) sum += n;
    CHECK(sum == 10);
    for (int i = 0; i < 10; ++i) {
        CAPTURE(i);
        const auto& r = rows[i];
        CHECK(r.prompt_index == i);
        CHECK(r.seed == 3);
        CHECK(r.ally_units == 40);
        CHECK(r.study == Study::Ability);
        CHECK_FALSE(r.latency_s);
        REQUIRE_FALSE(r.replay.empty());
        const auto rec = load_replay(out.path / r.replay);
        CHECK(rec.prompt == corpus.prompts("coordinate")[i]);
        CHECK(rec.outcome == r.outcome);
        CHECK(rec.metrics == r.metrics);
        CHECK(rec.ability == "coordinate");
    }
    // Any row can be re-executed from its replay alone.
    const auto rec = load_replay(out.path / rows[4].replay);
    const auto again = replay_episode(rec, load_builtin_scenario("coordinate"));
    CHECK(again.final_hash == rec.final_hash);
    CHECK(again.outcome == rec.outcome);
}

TEST_CASE("requests carry the configured temperature and the ability's prompt options") {
    TempDir fixtures("hive_bench_capture");
    write(fixtures.path / "default.txt", kGenericPlan);
    write(fixtures.path / "alone" / "coordinate.txt", "I would rather not.");
    Capture cap;
    SuiteOptions opt;
    opt.units = std::make_pair(30, 30);
    opt.factory = [&] { return std::make_unique<CapturingMock>(fixtures.path, cap); };
    llm::ProviderConfig cfg;
    cfg.temperature = 0.7;
    cfg.model = "fixture-model";

    // The factory's mock cannot be keyed by the runner, so every answer is the default.
    opt.abilities = {"follow_markers", "exploit_terrain"};
    auto rows = run_ability_suite(cfg, opt, PromptCorpus::load());
    REQUIRE(rows.size() == 20);
    REQUIRE(cap.requests.size() == 20);
    int with_markers = 0;
    for (const auto& q : cap.requests) {
        CHECK(q.temperature == 0.7);
        CHECK(q.model == "fixture-model");
        REQUIRE(q.messages.size() == 2);
        CHECK(q.messages[0].role == llm::Role::System);
        if (q.messages[0].content.find("Markers:\nA at (193, 85)") != std::string::npos) ++with_markers;
        CHECK(q.messages[1].content.find("Health and positions of all the units") == 0);
    }
    CHECK(with_markers == 10);
    for (const auto& r : rows) CHECK(r.temperature == 0.7);

    // Unassisted mode: alone prompts, keyed fixtures, no markers ability.
    SuiteOptions alone;
    alone.alone = true;
    alone.abilities = {"coordinate"};
    alone.units = std::make_pair(30, 30);
    alone.mock_dir = fixtures.path;
    rows = run_ability_suite(cfg, alone, PromptCorpus::load());
    REQUIRE(rows.size() == 10);
    for (const auto& r : rows) {
        CHECK(r.study == Study::Alone);
        CHECK(r.outcome == Outcome::NoPlan);
    }
    alone.abilities = {"follow_markers"};
    CHECK_THROWS_AS(run_ability_suite(cfg, alone, PromptCorpus::load()), ValidationError);
}

TEST_CASE("empty and missing answers become NoPlan rows") {
    TempDir fixtures("hive_bench_empty");
    write(fixtures.path / "default.txt", "");
    SuiteOptions opt;
    opt.abilities = {"strategize_points"};
    opt.units = std::make_pair(30, 30);
    opt.mock_dir = fixtures.path;
    auto rows = run_ability_suite({}, opt, PromptCorpus::load());
    REQUIRE(rows.size() == 10);
    for (const auto& r : rows) CHECK(r.outcome == Outcome::NoPlan);
    CHECK(histogram(rows)["invalid_or_no_plan"] == 10);

    fs::remove(fixtures.path / "default.txt");
    write(fixtures.path / "coordinate" / "2.txt", kGenericPlan);
    opt.abilities = {"coordinate"};
    rows = run_ability_suite({}, opt, PromptCorpus::load());
    REQUIRE(rows.size() == 10);
    for (const auto& r : rows) {
        if (r.prompt_index == 2) {
            CHECK(r.outcome != Outcome::NoPlan);
            CHECK(r.error.empty());
        } else {
            CHECK(r.outcome == Outcome::NoPlan);
            CHECK(r.error.find("missing") == 0);
        }
    }
}

TEST_CASE("mock suite output is byte-identical across runs") {
    TempDir fixtures("hive_bench_fx2");
    write(fixtures.path / "default.txt", kGenericPlan);
    write(fixtures.path / "follow_markers.txt",
          "BEGIN PLAN\nStep 0:\nprerequisites: []\nobjective: position\nunits: all\n- target position: (61, 0)\n"
          "- behavior: follow_map\nEND PLAN");
    TempDir a("hive_bench_a"), b("hive_bench_b");
    for (const auto* dir : {&a, &b}) {
        SuiteOptions opt;
        opt.abilities = {"coordinate", "follow_markers"};
        opt.units = std::make_pair(40, 40);
        opt.mock_dir = fixtures.path;
        opt.out_dir = dir->path;
        opt.parallelism = dir == &a ? 1 : 3;
        const auto rows = run_ability_suite({}, opt, PromptCorpus::load());
        write_rows(rows, dir->path / "episodes.jsonl");
        emit_report(rows, dir->path / "report");
    }
    const auto ta = tree_contents(a.path);
    const auto tb = tree_contents(b.path);
    CHECK(ta.size() == 20 + 1 + 5);
    CHECK(ta == tb);
}

TEST_CASE("scaling study re-instances Coordinate at each count") {
    TempDir fixtures("hive_bench_scale");
    write(fixtures.path / "default.txt", kGenericPlan);
    Capture cap;
    SuiteOptions opt;
    opt.factory = [&] { return std::make_unique<CapturingMock>(fixtures.path, cap); };
    const auto rows = run_scaling_study({}, {200, 1000}, opt, PromptCorpus::load());
    REQUIRE(rows.size() == 20);
    int small = 0;
    for (const auto& r : rows) {
        CHECK(r.study == Study::Scaling);
        CHECK(r.ability == "coordinate");
        CHECK(r.ally_units == r.enemy_units);
        small += r.ally_units == 100 ? 1 : 0;
    }
    CHECK(small == 10);
    int slices_200 = 0, slices_1000 = 0;
    for (const auto& q : cap.requests) {
        const auto& sys = q.messages[0].content;
        if (sys.find("Allies:\n\tspearmen: [0:50]\n\tarcher: [50:100]\nEnemies:\n\tspearmen: [0:100]\n") != std::string::npos) ++slices_200;
        if (sys.find("Allies:\n\tspearmen: [0:250]\n\tarcher: [250:500]\nEnemies:\n\tspearmen: [0:500]\n") != std::string::npos) ++slices_1000;
    }
    CHECK(slices_200 == 10);
    CHECK(slices_1000 == 10);
    const auto files = render_report(rows);
    REQUIRE(files.count("scaling.csv"));
    const auto& csv = files.at("scaling.csv");
    CHECK(csv.find("model,units,win,loss,tie,early_completion,invalid_or_no_plan,total\n") == 0);
    CHECK(csv.find("\nfixture,200,") != std::string::npos);
    CHECK(csv.find("\nfixture,1000,") != std::string::npos);
    CHECK_THROWS_AS(run_scaling_study({}, {201}, opt, PromptCorpus::load()), ValidationError);
}

TEST_CASE("report tables") {
    std::vector<EpisodeRow> rows;
    // Model A: 3 wins on coordinate, a tie and an early completion elsewhere.
    const std::vector<std::pair<std::string, std::vector<Outcome>>> a = {
        {"coordinate", {Outcome::Win, Outcome::Win, Outcome::Win, Outcome::Loss, Outcome::Tie, Outcome::Tie,
                        Outcome::EarlyCompletion, Outcome::InvalidPlan, Outcome::NoPlan, Outcome::Loss}},
        {"follow_markers", std::vector<Outcome>(10, Outcome::EarlyCompletion)},
        {"strategize_points", {Outcome::Win, Outcome::Tie, Outcome::Tie, Outcome::Tie, Outcome::Tie, Outcome::Tie,
                               Outcome::Tie, Outcome::Tie, Outcome::Tie, Outcome::Tie}},
    };
    for (const auto& [ability, outs] : a)
        for (std::size_t i = 0; i < outs.size(); ++i) rows.push_back(row("A", ability, outs[i], i / 10.0));
    for (int i = 0; i < 10; ++i) rows.push_back(row("B", "coordinate", i < 4 ? Outcome::Win : Outcome::Loss, 0.5));

    // Oracle: strict counts straight from the rows.
    std::map<std::pair<std::string, std::string>, int> wins, total;
    for (const auto& r : rows) {
        wins[{r.model, r.ability}] += r.outcome == Outcome::Win;
        total[{r.model, r.ability}] += 1;
    }
    const auto files = render_report(rows);
    const auto& table = files.at("table_strict.csv");
    std::vector<std::string> lines;
    std::istringstream in(table);
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 7);
    CHECK(lines[0] == "ability,A,B");
    CHECK(lines[1] == "Coordinate," + std::to_string(wins[{"A", "coordinate"}]) + "/10," +
                          std::to_string(wins[{"B", "coordinate"}]) + "/10");
    CHECK(lines[2] == "Exploit weakness,0/0,0/0");
    CHECK(lines[3] == "Follow markers,0/10,0/0");
    CHECK(lines[5] == "Strategize points,1/10,0/0");
    int a_wins = 0, a_total = 0;
    for (const auto& [k, v] : wins)
        if (k.first == "A") a_wins += v;
    for (const auto& [k, v] : total)
        if (k.first == "A") a_total += v;
    CHECK(lines[6] == "Total," + std::to_string(a_wins) + "/" + std::to_string(a_total) + ",4/10");
    CHECK(files.at("table_strict.md").find("| **Total** | **4/30** | **4/10** |") != std::string::npos);

    const auto& hist = files.at("outcomes.csv");
    CHECK(hist.find("study,model,ability,win,loss,tie,early_completion,invalid_or_no_plan,total\n") == 0);
    CHECK(hist.find("ability,A,coordinate,3,2,2,1,2,10\n") != std::string::npos);
    CHECK(hist.find("ability,A,follow_markers,0,0,0,10,0,10\n") != std::string::npos);
    CHECK(hist.find("ability,B,coordinate,4,6,0,0,0,10\n") != std::string::npos);

    const auto& metrics = files.at("metrics.csv");
    // pct values 0.0 .. 0.9: quartiles by linear interpolation.
    CHECK(metrics.find("ability,A,coordinate,pct_enemies_eliminated,10,0.0000,0.2250,0.4500,0.6750,0.9000\n") !=
          std::string::npos);
    CHECK(metrics.find("ability,A,follow_markers,min_distance_to_objective,10,0.0000,22.5000,45.0000,67.5000,90.0000\n") !=
          std::string::npos);
    CHECK_FALSE(files.count("latency.csv"));
    CHECK_FALSE(files.count("scaling.csv"));
    CHECK(files.at("summary.md").find("# Benchmark report") == 0);

    // Temperature sweep splits a model's column.
    rows.push_back(row("B", "coordinate", Outcome::Win));
    rows.back().temperature = 1.0;
    rows.back().latency_s = 2.5;
    const auto swept = render_report(rows);
    CHECK(swept.at("table_strict.csv").find("ability,A,B@0,B@1\n") == 0);
    CHECK(swept.at("latency.csv").find("ability,B@1,coordinate,1,2.5000,2.5000,2.5000,2.5000,2.5000\n") != std::string::npos);
}

TEST_CASE("quartiles") {
    const auto q = quartiles({4, 1, 3, 2});
    CHECK(q.n == 4);
    CHECK(q.min == 1);
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    CHECK(q.max == 4);
    CHECK(quartiles({}).n == 0);
    CHECK(quartiles({7}).median == 7);
}

TEST_CASE("result rows round-trip and aggregate from files") {
    TempDir dir("hive_bench_rows");
    auto r = row("m", "exploit_terrain", Outcome::Tie, 0.25);
    r.study = Study::Alone;
    r.seed = 0xFFFFFFFFFFFFFFFFull;
    r.latency_s = 1.5;
    r.replay = "replays/x.json";
    r.error = "quota: \"slow down\"";
    r.metrics.ticks_elapsed = 500;
    CHECK(row_from_json(row_to_json(r)) == r);
    write_rows({r}, dir.path / "a.jsonl");
    write_rows({row("n", "coordinate", Outcome::Win)}, dir.path / "b.jsonl");
    const auto back = read_rows(dir.path);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == r);
    CHECK(back[1].model == "n");
    CHECK(read_rows(dir.path / "a.jsonl").size() == 1);
    CHECK_THROWS_AS(read_rows(dir.path / "none.jsonl"), NotFoundError);
    CHECK_THROWS_AS(row_from_json("{\"study\": \"x\"}"), ValidationError);
}

TEST_CASE("configuration errors surface before any episode runs") {
    SuiteOptions opt;
    opt.mock_dir = "/nonexistent/fixtures";
    CHECK_THROWS_AS(run_ability_suite({}, opt, PromptCorpus::load()), ValidationError);
    opt.mock_dir = fs::path(HIVE_DATA_DIR) / "fixtures/answers";
    llm::ProviderConfig bad;
    bad.temperature = 3.0;
    CHECK_THROWS_AS(run_ability_suite(bad, opt, PromptCorpus::load()), ValidationError);
    opt.abilities = {"rush"};
    CHECK_THROWS_AS(run_ability_suite({}, opt, PromptCorpus::load()), ValidationError);
}

TEST_CASE("no credential material in persisted artifacts") {
    const std::string secret = "sk-bench-secret-9f8e7d6c5b4a";
    ::setenv("HIVE_BENCH_SECRET", secret.c_str(), 1);
    FakeVendor vendor;
    nlohmann::json reply = {{"choices", {{{"message", {{"role", "assistant"}, {"content", kGenericPlan}}}, {"finish_reason", "stop"}}}}};
    vendor.reply = reply.dump();
    TempDir out("hive_bench_secret");
    auto cfg = llm::ProviderConfig::defaults_for("openai");
    cfg.endpoint = vendor.url();
    cfg.credential_env = "HIVE_BENCH_SECRET";
    cfg.model = "gpt-test";
    SuiteOptions opt;
    opt.abilities = {"exploit_weakness"};
    opt.units = std::make_pair(30, 30);
    opt.out_dir = out.path;
    const auto rows = run_ability_suite(cfg, opt, PromptCorpus::load());
    REQUIRE(rows.size() == 10);
    CHECK(vendor.requests == 10);
    CHECK(vendor.header("Authorization") == "Bearer " + secret);
    for (const auto& r : rows) {
        CHECK(r.latency_s);
        CHECK(r.outcome != Outcome::NoPlan);
    }
    write_rows(rows, out.path / "episodes.jsonl");
    emit_report(rows, out.path / "report");
    const auto files = tree_contents(out.path);
    CHECK(files.size() == 10 + 1 + 6);
    for (const auto& [name, text] : files) {
        CAPTURE(name);
        CHECK(text.find(secret) == std::string::npos);
        CHECK(text.find("HIVE_BENCH_SECRET") == std::string::npos);
    }
}

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "hive/bench.hpp"
#include "hive/errors.hpp"
#include "hive/log.hpp"
#include "hive/server.hpp"

using namespace hive;
namespace fs = std::filesystem;

namespace {

struct ProviderArgs {
    std::string provider = "mock";
    std::string model;
    std::string endpoint;
    std::string credential_env;
    double temperature = 0.0;
    int max_tokens = 4096;
    double timeout_s = 120.0;
    std::string mock_dir;

    void add(CLI::App* app) {
        app->add_option("--provider", provider, "mock, openai or anthropic")->capture_default_str();
        app->add_option("--model", model, "Model name (vendor default when empty)");
        app->add_option("--temperature", temperature, "Sampling temperature")->capture_default_str();
        app->add_option("--endpoint", endpoint, "Base URL override");
        app->add_option("--credential-env", credential_env, "Environment variable holding the API key");
        app->add_option("--max-tokens", max_tokens)->capture_default_str();
        app->add_option("--timeout", timeout_s, "Request timeout in seconds")->capture_default_str();
        app->add_option("--mock-fixtures", mock_dir, "Answer fixtures for the mock provider");
    }

    llm::ProviderConfig config() const {
        auto c = llm::ProviderConfig::defaults_for(provider);
        if (!model.empty()) c.model = model;
        if (!endpoint.empty()) c.endpoint = endpoint;
        if (!credential_env.empty()) c.credential_env = credential_env;
        c.temperature = temperature;
        c.max_tokens = max_tokens;
        c.timeout_s = timeout_s;
        c.validate();
        return c;
    }

    fs::path fixtures() const { return mock_dir.empty() ? data_dir() / "fixtures" / "answers" : fs::path(mock_dir); }
};

void print_rows(const std::vector<bench::EpisodeRow>& rows) {
    for (const auto& r : rows) {
        std::printf("%-18s p%-2d seed %-6llu %-16s", r.ability.c_str(), r.prompt_index,
                    static_cast<unsigned long long>(r.seed), std::string(outcome_name(r.outcome)).c_str());
        if (const auto c = r.continuous()) std::printf(" %8.4f", *c);
        if (!r.error.empty()) std::printf("  (%s)", r.error.c_str());
        std::printf("\n");
    }
}

void finish(const std::vector<bench::EpisodeRow>& rows, const fs::path& out, const std::string& rows_file) {
    bench::write_rows(rows, out / rows_file);
    bench::emit_report(rows, out / "report");
    const auto files = bench::render_report(rows);
    std::cout << "\n" << files.at("table_strict.md") << "\nwrote " << (out / rows_file).string() << " and "
              << (out / "report").string() << "/\n";
}

server::HttpServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HIVE: LLM-planned large-scale battle simulation"};
    app.require_subcommand(1);

    ProviderArgs prov;
    std::vector<std::string> abilities;
    std::string scenario;
    std::uint64_t seed = 1;
    int seeds = 1;
    int prompts = 0;
    int parallel = 1;
    int allies = 0, enemies = 0;
    bool alone = false;
    bool serial = false;
    std::string out = "results";

    auto* run = app.add_subcommand("run", "Run ability tests: one episode per prompt");
    prov.add(run);
    run->add_option("--ability", abilities, "Ability test(s); all when omitted");
    run->add_option("--scenario", scenario, "Every ability test played on this scenario");
    run->add_flag("--alone", alone, "Unassisted mode: the model gets no player guidance");
    run->add_option("--seed", seed, "Episode seed")->capture_default_str();
    run->add_option("--seeds", seeds, "Seeds per prompt, from --seed upward")->capture_default_str();
    run->add_option("--prompts", prompts, "First n prompts per ability (0 = all)")->capture_default_str();
    run->add_option("--allies", allies, "Rescale allies to this count");
    run->add_option("--enemies", enemies, "Rescale enemies to this count");
    run->add_option("--parallel", parallel, "Concurrent episodes")->capture_default_str();
    run->add_flag("--serial", serial, "Serial reference kernels");
    run->add_option("--out", out, "Output directory")->capture_default_str();

    std::vector<int> counts;
    auto* scale = app.add_subcommand("scale", "Scaling study on Coordinate at several unit counts");
    prov.add(scale);
    scale->add_option("--counts", counts, "Total unit counts")->delimiter(',')->required();
    scale->add_option("--seed", seed)->capture_default_str();
    scale->add_option("--prompts", prompts, "First n prompts (0 = all)")->capture_default_str();
    scale->add_option("--parallel", parallel)->capture_default_str();
    scale->add_flag("--serial", serial);
    scale->add_option("--out", out)->capture_default_str();

    std::string file;
    auto* replay = app.add_subcommand("replay", "Re-run a replay file and compare the result");
    replay->add_option("--file", file)->required();
    replay->add_flag("--serial", serial);

    std::string in, report_out = "report";
    auto* report = app.add_subcommand("report", "Aggregate result rows into tables");
    report->add_option("--in", in, "Result file or directory of .jsonl files")->required();
    report->add_option("--out", report_out)->capture_default_str();

    std::string host = "127.0.0.1", replay_dir;
    int port = 8080, decimation = 1;
    double tps = 10.0, max_fps = 20.0;
    auto* serve = app.add_subcommand("serve", "Session server for interactive play");
    prov.add(serve);
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port)->capture_default_str();
    serve->add_option("--tps", tps, "Simulated ticks per second, 0 = unpaced")->capture_default_str();
    serve->add_option("--decimation", decimation, "Stream every n-th tick")->capture_default_str();
    serve->add_option("--max-fps", max_fps)->capture_default_str();
    serve->add_option("--replay-dir", replay_dir, "Save finished episodes here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run || *scale) {
            const auto cfg = prov.config();
            bench::SuiteOptions opt;
            opt.seed = seed;
            opt.seeds = seeds;
            opt.prompt_limit = prompts;
            opt.parallelism = parallel;
            opt.policy = serial ? ExecPolicy::Serial : ExecPolicy::Parallel;
            opt.out_dir = out;
            opt.mock_dir = prov.fixtures();
            const auto corpus = bench::PromptCorpus::load();
            std::vector<bench::EpisodeRow> rows;
            if (*run) {
                opt.alone = alone;
                opt.abilities = abilities;
                if (!scenario.empty()) {
                    load_builtin_scenario(scenario);
                    for (const auto& t : ability_tests())
                        if (t.scenario == scenario) opt.abilities.push_back(t.name);
                }
                if (allies > 0 || enemies > 0) {
                    if (allies < 1 || enemies < 1) throw ValidationError("--allies and --enemies go together");
                    opt.units = std::make_pair(allies, enemies);
                }
                rows = bench::run_ability_suite(cfg, opt, corpus);
            } else {
                rows = bench::run_scaling_study(cfg, counts, opt, corpus);
            }
            print_rows(rows);
            finish(rows, out, *run ? "episodes.jsonl" : "scaling.jsonl");
        } else if (*replay) {
            const auto rec = load_replay(file);
            const auto again = replay_episode(rec, load_builtin_scenario(rec.scenario),
                                              serial ? ExecPolicy::Serial : ExecPolicy::Parallel);
            const bool same = again.final_hash == rec.final_hash && again.outcome == rec.outcome;
            std::printf("scenario %s seed %llu units %d/%d\nrecorded %s, replayed %s, final hash %s\n",
                        rec.scenario.c_str(), static_cast<unsigned long long>(rec.seed), rec.ally_units,
                        rec.enemy_units, std::string(outcome_name(rec.outcome)).c_str(),
                        std::string(outcome_name(again.outcome)).c_str(), same ? "matches" : "DIFFERS");
        } else if (*report) {
            const auto rows = bench::read_rows(in);
            bench::emit_report(rows, report_out);
            std::cout << bench::render_report(rows).at("table_strict.md") << "wrote " << report_out << "/\n";
        } else if (*serve) {
            server::ServerConfig cfg;
            cfg.provider = prov.config();
            cfg.mock_dir = prov.fixtures();
            cfg.ticks_per_second = tps;
            cfg.decimation = decimation;
            cfg.max_fps = max_fps;
            cfg.replay_dir = replay_dir;
            server::SessionService service(cfg);
            server::HttpServer http(service);
            const int bound = http.start(host, port);
            g_server = &http;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            std::printf("listening on http://%s:%d\n", host.c_str(), bound);
            std::fflush(stdout);
            http.wait();
        }
    } catch (const ValidationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ReplayVersionError& e) {
        std::cerr << "replay error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

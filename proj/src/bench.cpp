#include "hive/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "hive/errors.hpp"
#include "hive/log.hpp"
#include "json.hpp"

namespace hive::bench {

using nlohmann::json;
namespace fs = std::filesystem;

PromptCorpus PromptCorpus::load(const fs::path& file) {
    const fs::path path = file.empty() ? data_dir() / "prompts" / "prompts.json" : file;
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open prompt corpus " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ValidationError("prompt corpus is not valid JSON: " + std::string(e.what()));
    }
    PromptCorpus c;
    for (const auto& ability : ability_order()) {
        if (!j.contains(ability)) throw ValidationError("prompt corpus has no prompts for " + ability);
        c.by_ability[ability] = j[ability].get<std::vector<std::string>>();
    }
    c.alone = j.value("alone", std::vector<std::string>{});
    return c;
}

const std::vector<std::string>& PromptCorpus::prompts(const std::string& ability) const {
    auto it = by_ability.find(ability);
    if (it == by_ability.end()) throw NotFoundError("no prompts for ability " + ability);
    return it->second;
}

const std::vector<std::string>& ability_order() {
    static const std::vector<std::string> order = {"coordinate", "exploit_weakness", "follow_markers",
                                                   "exploit_terrain", "strategize_points"};
    return order;
}

const std::vector<std::string>& alone_abilities() {
    static const std::vector<std::string> v = {"coordinate", "exploit_weakness", "exploit_terrain", "strategize_points"};
    return v;
}

std::string ability_title(const std::string& ability) {
    static const std::map<std::string, std::string> titles = {
        {"coordinate", "Coordinate"},           {"exploit_weakness", "Exploit weakness"},
        {"follow_markers", "Follow markers"},   {"exploit_terrain", "Exploit terrain"},
        {"strategize_points", "Strategize points"}};
    auto it = titles.find(ability);
    return it == titles.end() ? ability : it->second;
}

std::string_view study_name(Study s) {
    switch (s) {
        case Study::Ability: return "ability";
        case Study::Alone: return "alone";
        case Study::Scaling: return "scaling";
    }
    return "?";
}

std::optional<double> EpisodeRow::continuous() const {
    if (ability == "follow_markers" || ability == "exploit_terrain") return metrics.min_ally_distance_to_objective;
    return metrics.pct_enemies_eliminated;
}

// ---- rows ----------------------------------------------------------------

std::string row_to_json(const EpisodeRow& r) {
    json j;
    j["study"] = study_name(r.study);
    j["ability"] = r.ability;
    j["provider"] = r.provider;
    j["model"] = r.model;
    j["temperature"] = r.temperature;
    j["prompt_index"] = r.prompt_index;
    j["seed"] = r.seed;
    j["ally_units"] = r.ally_units;
    j["enemy_units"] = r.enemy_units;
    j["outcome"] = outcome_name(r.outcome);
    j["success"] = r.success();
    j["pct_enemies_eliminated"] = r.metrics.pct_enemies_eliminated;
    j["min_ally_distance_to_objective"] =
        r.metrics.min_ally_distance_to_objective ? json(*r.metrics.min_ally_distance_to_objective) : json(nullptr);
    j["ticks"] = r.metrics.ticks_elapsed;
    j["ally_survivors"] = r.metrics.ally_survivors;
    j["enemy_survivors"] = r.metrics.enemy_survivors;
    j["latency_s"] = r.latency_s ? json(*r.latency_s) : json(nullptr);
    j["replay"] = r.replay;
    j["error"] = r.error;
    return j.dump();
}

EpisodeRow row_from_json(const std::string& line) {
    try {
        const auto j = json::parse(line);
        EpisodeRow r;
        const auto study = j.at("study").get<std::string>();
        if (study == "ability") r.study = Study::Ability;
        else if (study == "alone") r.study = Study::Alone;
        else if (study == "scaling") r.study = Study::Scaling;
        else throw ValidationError("unknown study '" + study + "'");
        r.ability = j.at("ability").get<std::string>();
        r.provider = j.value("provider", "");
        r.model = j.at("model").get<std::string>();
        r.temperature = j.value("temperature", 0.0);
        r.prompt_index = j.at("prompt_index").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.ally_units = j.at("ally_units").get<int>();
        r.enemy_units = j.at("enemy_units").get<int>();
        const auto outcome = outcome_from_name(j.at("outcome").get<std::string>());
        if (!outcome) throw ValidationError("unknown outcome in row");
        r.outcome = *outcome;
        r.metrics.pct_enemies_eliminated = j.at("pct_enemies_eliminated").get<double>();
        if (!j.at("min_ally_distance_to_objective").is_null())
            r.metrics.min_ally_distance_to_objective = j["min_ally_distance_to_objective"].get<double>();
        r.metrics.ticks_elapsed = j.at("ticks").get<int>();
        r.metrics.ally_survivors = j.at("ally_survivors").get<int>();
        r.metrics.enemy_survivors = j.at("enemy_survivors").get<int>();
        if (j.contains("latency_s") && !j["latency_s"].is_null()) r.latency_s = j["latency_s"].get<double>();
        r.replay = j.value("replay", "");
        r.error = j.value("error", "");
        return r;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed result row: ") + e.what());
    }
}

void write_rows(const std::vector<EpisodeRow>& rows, const fs::path& file) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + file.string());
    for (const auto& r : rows) out << row_to_json(r) << '\n';
}

std::vector<EpisodeRow> read_rows(const fs::path& path) {
    std::vector<fs::path> files;
    if (fs::is_directory(path)) {
        for (const auto& e : fs::directory_iterator(path))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw NotFoundError("no .jsonl result files in " + path.string());
    } else {
        if (!fs::exists(path)) throw NotFoundError("cannot open " + path.string());
        files.push_back(path);
    }
    std::vector<EpisodeRow> rows;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(row_from_json(line));
    }
    return rows;
}

// ---- runner --------------------------------------------------------------

namespace {

struct Job {
    Study study;
    std::string ability;
    int prompt_index;
    std::string prompt;
    std::uint64_t seed;
    std::optional<std::pair<int, int>> units;
};

std::string sanitize(std::string s) {
    for (auto& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

std::string replay_name(const Job& job, const llm::ProviderConfig& cfg) {
    std::ostringstream name;
    name << study_name(job.study) << '_' << job.ability << '_' << sanitize(cfg.model);
    char t[16];
    std::snprintf(t, sizeof t, "%.2f", cfg.temperature);
    name << "_t" << t << "_p" << job.prompt_index << "_s" << job.seed;
    if (job.units) name << "_n" << job.units->first + job.units->second;
    return name.str() + ".json";
}

EpisodeRow run_job(const Job& job, const llm::ProviderConfig& cfg, const SuiteOptions& opt, bool timing) {
    EpisodeRow row;
    row.study = job.study;
    row.ability = job.ability;
    row.provider = cfg.provider;
    row.model = cfg.model;
    row.temperature = cfg.temperature;
    row.prompt_index = job.prompt_index;
    row.seed = job.seed;

    const auto& test = ability_test(job.ability);
    Scenario scenario = load_builtin_scenario(test.scenario);
    if (job.units) scenario = scale_scenario(scenario, job.units->first, job.units->second);
    row.ally_units = scenario.ally_count();
    row.enemy_units = scenario.enemy_count();

    const auto system = llm::build_system_prompt(scenario, test.with_markers ? scenario.markers : std::vector<Marker>{});
    const auto user = llm::build_user_message(initial_state(scenario, job.seed), job.prompt);

    auto provider = opt.factory ? opt.factory() : llm::make_provider(cfg, opt.mock_dir);
    if (auto* mock = dynamic_cast<llm::MockProvider*>(provider.get()))
        mock->select(job.study == Study::Alone ? "alone/" + job.ability : job.ability, job.prompt_index);

    llm::Transcript transcript(system);
    std::string response;
    std::optional<double> latency;
    try {
        const auto reply = llm::query_model(*provider, cfg, transcript, user);
        response = reply.text;
        if (timing) latency = reply.exchange.latency_s;
    } catch (const llm::ProviderError& e) {
        row.error = std::string(llm::provider_error_name(e.kind())) + ": " + e.what();
        log::warn(job.ability + " prompt " + std::to_string(job.prompt_index) + ": " + row.error);
    }

    EpisodeOptions eo;
    eo.seed = job.seed;
    eo.policy = opt.policy;
    auto rec = run_episode(scenario, prepare_plan(scenario, response), eo);
    rec.ability = job.ability;
    rec.provider = cfg.provider;
    rec.model = cfg.model;
    rec.temperature = cfg.temperature;
    rec.prompt = job.prompt;
    rec.model_latency_s = latency;
    if (row.error.empty() && rec.outcome != Outcome::Win && !rec.diagnostics.empty() &&
        (rec.outcome == Outcome::InvalidPlan || rec.outcome == Outcome::NoPlan))
        row.error = rec.diagnostics.front();

    row.outcome = rec.outcome;
    row.metrics = rec.metrics;
    row.latency_s = latency;
    if (!opt.out_dir.empty()) {
        row.replay = (fs::path("replays") / replay_name(job, cfg)).generic_string();
        save_replay(rec, opt.out_dir / row.replay);
    }
    return row;
}

std::vector<EpisodeRow> run_jobs(const std::vector<Job>& jobs, const llm::ProviderConfig& cfg, const SuiteOptions& opt) {
    cfg.validate();
    if (opt.seeds < 1) throw ValidationError("seeds must be at least 1");
    if (opt.parallelism < 1) throw ValidationError("parallelism must be at least 1");
    if (!opt.factory) llm::make_provider(cfg, opt.mock_dir);  // configuration errors surface before any work
    const bool timing = opt.record_latency.value_or(cfg.provider != "mock");

    std::vector<EpisodeRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) rows[i] = run_job(jobs[i], cfg, opt, timing);
    };
    const int n = std::min<int>(opt.parallelism, static_cast<int>(jobs.size()));
    if (n <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

std::vector<std::string> selected(const SuiteOptions& opt) {
    const auto& all = opt.alone ? alone_abilities() : ability_order();
    if (opt.abilities.empty()) return all;
    for (const auto& a : opt.abilities) {
        if (std::find(all.begin(), all.end(), a) == all.end())
            throw ValidationError("unknown ability '" + a + "'" + (opt.alone ? " for the unassisted mode" : ""));
    }
    std::vector<std::string> out;
    for (const auto& a : all)
        if (std::find(opt.abilities.begin(), opt.abilities.end(), a) != opt.abilities.end()) out.push_back(a);
    return out;
}

int prompt_count(const SuiteOptions& opt, const std::vector<std::string>& prompts) {
    if (opt.prompt_limit < 0) throw ValidationError("prompt limit must be >= 0");
    const int n = static_cast<int>(prompts.size());
    return opt.prompt_limit == 0 ? n : std::min(n, opt.prompt_limit);
}

}  // namespace

std::vector<EpisodeRow> run_ability_suite(const llm::ProviderConfig& config, const SuiteOptions& options,
                                          const PromptCorpus& corpus) {
    std::vector<Job> jobs;
    for (const auto& ability : selected(options)) {
        const auto& prompts = options.alone ? corpus.alone : corpus.prompts(ability);
        for (int i = 0; i < prompt_count(options, prompts); ++i)
            for (int k = 0; k < options.seeds; ++k)
                jobs.push_back({options.alone ? Study::Alone : Study::Ability, ability, i, prompts[i],
                                options.seed + static_cast<std::uint64_t>(k), options.units});
    }
    return run_jobs(jobs, config, options);
}

std::vector<EpisodeRow> run_scaling_study(const llm::ProviderConfig& config, const std::vector<int>& counts,
                                          SuiteOptions options, const PromptCorpus& corpus) {
    std::vector<Job> jobs;
    const auto& prompts = corpus.prompts("coordinate");
    for (int total : counts) {
        if (total < 4 || total % 2 != 0) throw ValidationError("unit counts must be even and at least 4, got " + std::to_string(total));
        for (int i = 0; i < prompt_count(options, prompts); ++i)
            for (int k = 0; k < options.seeds; ++k)
                jobs.push_back({Study::Scaling, "coordinate", i, prompts[i], options.seed + static_cast<std::uint64_t>(k),
                                std::make_pair(total / 2, total / 2)});
    }
    return run_jobs(jobs, config, options);
}

// ---- report --------------------------------------------------------------

std::string_view histogram_category(Outcome o) {
    switch (o) {
        case Outcome::Win: return "win";
        case Outcome::Loss: return "loss";
        case Outcome::Tie: return "tie";
        case Outcome::EarlyCompletion: return "early_completion";
        case Outcome::InvalidPlan:
        case Outcome::NoPlan: return "invalid_or_no_plan";
    }
    return "?";
}

Quartiles quartiles(std::vector<double> v) {
    Quartiles q;
    q.n = static_cast<int>(v.size());
    if (v.empty()) return q;
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double pos = p * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
    };
    q.min = v.front();
    q.q1 = at(0.25);
    q.median = at(0.5);
    q.q3 = at(0.75);
    q.max = v.back();
    return q;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string temperature_text(double t) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

/// Column label per row: the model, suffixed with the temperature when one
/// model was run at several temperatures.
std::function<std::string(const EpisodeRow&)> column_labeler(const std::vector<EpisodeRow>& rows) {
    std::map<std::string, std::set<double>> temps;
    for (const auto& r : rows) temps[r.model].insert(r.temperature);
    return [temps](const EpisodeRow& r) {
        if (temps.at(r.model).size() > 1) return r.model + "@" + temperature_text(r.temperature);
        return r.model;
    };
}

std::vector<std::string> columns_in_order(const std::vector<EpisodeRow>& rows,
                                          const std::function<std::string(const EpisodeRow&)>& label) {
    std::vector<std::string> cols;
    for (const auto& r : rows) {
        const auto c = label(r);
        if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    return cols;
}

std::string metric_name(const std::string& ability) {
    return (ability == "follow_markers" || ability == "exploit_terrain") ? "min_distance_to_objective" : "pct_enemies_eliminated";
}

}  // namespace

std::map<std::string, std::string> render_report(const std::vector<EpisodeRow>& rows) {
    std::map<std::string, std::string> files;
    const auto label = column_labeler(rows);

    std::vector<EpisodeRow> ability_rows, other_rows, scaling_rows;
    for (const auto& r : rows) {
        if (r.study == Study::Ability) ability_rows.push_back(r);
        if (r.study != Study::Scaling) other_rows.push_back(r);
        else scaling_rows.push_back(r);
    }

    // Strict successes: ability rows only, one column per model.
    {
        const auto cols = columns_in_order(ability_rows, label);
        std::map<std::pair<std::string, std::string>, std::pair<int, int>> cell;  // (ability, col) -> wins, total
        for (const auto& r : ability_rows) {
            auto& c = cell[{r.ability, label(r)}];
            c.first += r.success() ? 1 : 0;
            c.second += 1;
        }
        std::ostringstream csv, md;
        csv << "ability";
        md << "| Ability |";
        for (const auto& c : cols) {
            csv << ',' << c;
            md << ' ' << c << " |";
        }
        csv << '\n';
        md << "\n|---|";
        for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
        md << '\n';
        std::map<std::string, std::pair<int, int>> total;
        for (const auto& a : ability_order()) {
            csv << ability_title(a);
            md << "| " << ability_title(a) << " |";
            for (const auto& c : cols) {
                const auto it = cell.find({a, c});
                const auto v = it == cell.end() ? std::pair<int, int>{0, 0} : it->second;
                total[c].first += v.first;
                total[c].second += v.second;
                const auto text = std::to_string(v.first) + "/" + std::to_string(v.second);
                csv << ',' << text;
                md << ' ' << text << " |";
            }
            csv << '\n';
            md << '\n';
        }
        csv << "Total";
        md << "| **Total** |";
        for (const auto& c : cols) {
            const auto text = std::to_string(total[c].first) + "/" + std::to_string(total[c].second);
            csv << ',' << text;
            md << " **" << text << "** |";
        }
        csv << '\n';
        md << '\n';
        files["table_strict.csv"] = csv.str();
        files["table_strict.md"] = md.str();
    }

    // Outcome histogram and metric distributions per (study, model, ability).
    {
        struct Cell {
            std::map<std::string, int> counts;
            std::vector<double> metric, latency;
            int total = 0;
        };
        std::vector<std::tuple<std::string, std::string, std::string>> keys;
        std::map<std::tuple<std::string, std::string, std::string>, Cell> cells;
        for (const auto& a : ability_order()) {
            for (const auto& r : other_rows) {
                if (r.ability != a) continue;
                const auto key = std::make_tuple(std::string(study_name(r.study)), label(r), r.ability);
                if (!cells.count(key)) keys.push_back(key);
                auto& c = cells[key];
                c.counts[std::string(histogram_category(r.outcome))] += 1;
                c.total += 1;
                if (auto m = r.continuous()) c.metric.push_back(*m);
                if (r.latency_s) c.latency.push_back(*r.latency_s);
            }
        }
        std::sort(keys.begin(), keys.end(), [](const auto& x, const auto& y) {
            auto rank = [](const std::string& a) {
                const auto& o = ability_order();
                return std::find(o.begin(), o.end(), a) - o.begin();
            };
            if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) < std::get<0>(y);
            if (std::get<1>(x) != std::get<1>(y)) return std::get<1>(x) < std::get<1>(y);
            return rank(std::get<2>(x)) < rank(std::get<2>(y));
        });
        std::ostringstream hist, metrics, latency;
        hist << "study,model,ability";
        for (auto o : kHistogramOrder) hist << ',' << histogram_category(o);
        hist << ",total\n";
        metrics << "study,model,ability,metric,n,min,q1,median,q3,max\n";
        latency << "study,model,ability,n,min,q1,median,q3,max\n";
        bool any_latency = false;
        for (const auto& key : keys) {
            const auto& [study, model, ability] = key;
            const auto& c = cells[key];
            hist << study << ',' << model << ',' << ability;
            for (auto o : kHistogramOrder) {
                const auto it = c.counts.find(std::string(histogram_category(o)));
                hist << ',' << (it == c.counts.end() ? 0 : it->second);
            }
            hist << ',' << c.total << '\n';
            const auto q = quartiles(c.metric);
            metrics << study << ',' << model << ',' << ability << ',' << metric_name(ability) << ',' << q.n << ','
                    << fmt(q.min) << ',' << fmt(q.q1) << ',' << fmt(q.median) << ',' << fmt(q.q3) << ',' << fmt(q.max)
                    << '\n';
            if (!c.latency.empty()) {
                any_latency = true;
                const auto l = quartiles(c.latency);
                latency << study << ',' << model << ',' << ability << ',' << l.n << ',' << fmt(l.min) << ','
                        << fmt(l.q1) << ',' << fmt(l.median) << ',' << fmt(l.q3) << ',' << fmt(l.max) << '\n';
            }
        }
        files["outcomes.csv"] = hist.str();
        files["metrics.csv"] = metrics.str();
        if (any_latency) files["latency.csv"] = latency.str();
    }

    if (!scaling_rows.empty()) {
        std::map<std::pair<std::string, int>, std::map<std::string, int>> cells;
        for (const auto& r : scaling_rows) cells[{label(r), r.ally_units + r.enemy_units}][std::string(histogram_category(r.outcome))]++;
        std::ostringstream s;
        s << "model,units";
        for (auto o : kHistogramOrder) s << ',' << histogram_category(o);
        s << ",total\n";
        for (const auto& [key, counts] : cells) {
            s << key.first << ',' << key.second;
            int total = 0;
            for (auto o : kHistogramOrder) {
                const auto it = counts.find(std::string(histogram_category(o)));
                const int n = it == counts.end() ? 0 : it->second;
                total += n;
                s << ',' << n;
            }
            s << ',' << total << '\n';
        }
        files["scaling.csv"] = s.str();
    }

    std::ostringstream summary;
    summary << "# Benchmark report\n\n" << rows.size() << " episodes.\n\n## Strict successes\n\n"
            << files["table_strict.md"] << "\n## Outcomes\n\n```\n" << files["outcomes.csv"] << "```\n\n## Continuous metrics\n\n```\n"
            << files["metrics.csv"] << "```\n";
    if (files.count("scaling.csv")) summary << "\n## Unit scaling\n\n```\n" << files["scaling.csv"] << "```\n";
    if (files.count("latency.csv")) summary << "\n## Latency (s)\n\n```\n" << files["latency.csv"] << "```\n";
    files["summary.md"] = summary.str();
    return files;
}

void emit_report(const std::vector<EpisodeRow>& rows, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    for (const auto& [name, text] : render_report(rows)) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw ValidationError("cannot write " + (out_dir / name).string());
        out << text;
    }
}

}  // namespace hive::bench

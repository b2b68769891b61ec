#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hive/llm_bridge.hpp"

namespace hive::bench {

/// Ten prompt variations per ability test plus ten for the unassisted mode.
struct PromptCorpus {
    std::map<std::string, std::vector<std::string>> by_ability;
    std::vector<std::string> alone;

    /// Defaults to `<data_dir>/prompts/prompts.json`.
    static PromptCorpus load(const std::filesystem::path& file = {});
    const std::vector<std::string>& prompts(const std::string& ability) const;
};

/// Abilities in table order.
const std::vector<std::string>& ability_order();
std::string ability_title(const std::string& ability);
/// The four abilities used without player help (no markers test).
const std::vector<std::string>& alone_abilities();

enum class Study { Ability, Alone, Scaling };
std::string_view study_name(Study s);

struct EpisodeRow {
    Study study = Study::Ability;
    std::string ability;
    std::string provider;
    std::string model;
    double temperature = 0.0;
    int prompt_index = 0;
    std::uint64_t seed = 0;
    int ally_units = 0;
    int enemy_units = 0;
    Outcome outcome = Outcome::NoPlan;
    EpisodeMetrics metrics;
    std::optional<double> latency_s;
    std::string replay;  // relative to the output directory, empty when not saved
    std::string error;   // provider or plan failure message

    bool success() const { return outcome == Outcome::Win; }
    /// Percentage eliminated, or the best distance for the two point tests.
    std::optional<double> continuous() const;
    bool operator==(const EpisodeRow&) const = default;
};

std::string row_to_json(const EpisodeRow& row);
EpisodeRow row_from_json(const std::string& line);
void write_rows(const std::vector<EpisodeRow>& rows, const std::filesystem::path& file);
/// A .jsonl file, or every .jsonl file of a directory in name order.
std::vector<EpisodeRow> read_rows(const std::filesystem::path& path);

using ProviderFactory = std::function<std::unique_ptr<llm::Provider>()>;

struct SuiteOptions {
    std::vector<std::string> abilities;  // empty means all
    std::uint64_t seed = 1;
    /// Seeds seed .. seed+seeds-1 per prompt. More than one is a variance
    /// study extension; the published protocol runs each prompt once.
    int seeds = 1;
    /// Only the first n prompts of each list; 0 means all.
    int prompt_limit = 0;
    bool alone = false;
    /// Rescale every scenario to these team sizes.
    std::optional<std::pair<int, int>> units;
    int parallelism = 1;
    /// Replays go to `<out_dir>/replays/` when set.
    std::filesystem::path out_dir;
    std::filesystem::path mock_dir;
    /// Client wall-clock latency; off for the mock so output is reproducible.
    std::optional<bool> record_latency;
    ExecPolicy policy = ExecPolicy::Parallel;
    /// Builds one provider per episode; defaults to make_provider(config, mock_dir).
    ProviderFactory factory;
};

/// Single-shot protocol: prompt, query once, extract, validate, simulate.
/// Provider failures become NoPlan rows and the suite continues.
std::vector<EpisodeRow> run_ability_suite(const llm::ProviderConfig& config, const SuiteOptions& options,
                                          const PromptCorpus& corpus);

/// Coordinate at each total unit count (half allies, half enemies), same ten prompts.
std::vector<EpisodeRow> run_scaling_study(const llm::ProviderConfig& config, const std::vector<int>& counts,
                                          SuiteOptions options, const PromptCorpus& corpus);

inline constexpr std::array<Outcome, 5> kHistogramOrder = {Outcome::Win, Outcome::Loss, Outcome::Tie,
                                                           Outcome::EarlyCompletion, Outcome::InvalidPlan};
/// win, loss, tie, early_completion, invalid_or_no_plan
std::string_view histogram_category(Outcome o);

struct Quartiles {
    int n = 0;
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};
/// Linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);

/// Aggregate tables as text, keyed by file name: table_strict.csv/.md,
/// outcomes.csv, metrics.csv, and latency.csv / scaling.csv when relevant,
/// plus summary.md.
std::map<std::string, std::string> render_report(const std::vector<EpisodeRow>& rows);
void emit_report(const std::vector<EpisodeRow>& rows, const std::filesystem::path& out_dir);

}  // namespace hive::bench

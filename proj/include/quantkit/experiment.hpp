#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "quantkit/dataset.hpp"
#include "quantkit/quantifiers.hpp"
#include "quantkit/sampling.hpp"
#include "quantkit/selection.hpp"
#include "quantkit/ttest.hpp"

namespace quantkit {

struct PlanSpec {
    std::vector<double> grid = ProtocolPlan::default_grid();
    std::int64_t samples_per_point = 10;
    std::int64_t sample_size = 500;

    ProtocolPlan make(std::uint64_t seed) const { return {grid, samples_per_point, sample_size, seed}; }
};

struct DatasetSpec {
    std::string name;
    std::optional<std::filesystem::path> train_path;
    std::optional<std::filesystem::path> test_path;
    std::optional<SyntheticSpec> synthetic_train;
    std::optional<SyntheticSpec> synthetic_test;
};

/// Everything a run needs. Loaded from a single JSON document; see
/// docs/config.md for the schema.
struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<MethodKind> methods;
    std::vector<LearnerKind> learners;
    std::vector<LossKind> losses;
    PlanSpec validation;
    PlanSpec test{ProtocolPlan::default_grid(), 100, 500};
    std::uint64_t seed = 0;
    std::int64_t repetitions_case1 = 10;
    std::int64_t repetitions_case2 = 1;
    std::int64_t min_count = 5;
    double train_fraction = 0.6;
    double inner_train_fraction = 0.6;
    EmqSettings emq;
    HdySettings hdy;
    std::optional<std::filesystem::path> cache_dir;
    int jobs = 1;

    static ExperimentConfig from_json(const nlohmann::json& doc,
                                      const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;
    void validate() const;
    std::int64_t repetitions_for(MethodKind method) const;
};

/// Environment variable naming a directory for prepared-dataset caches.
inline constexpr const char* kCacheDirEnv = "QUANTKIT_CACHE_DIR";

struct ResultRow {
    std::string method;
    std::string learner;
    std::string optimized_for;
    std::string dataset;
    double grid_prevalence = 0.0;
    std::int64_t sample_id = 0;
    std::int64_t repetition = 0;
    double true_prevalence = 0.0;
    double estimated_prevalence = 0.0;
    double ae = 0.0;
    double rae = 0.0;

    bool operator==(const ResultRow&) const = default;
};

inline constexpr const char* kResultColumns =
    "method,learner,optimized_for,dataset,grid_prevalence,sample_id,repetition,true_prevalence,"
    "estimated_prevalence,ae,rae";

void write_rows_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_rows_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_rows_csv(const std::filesystem::path& path);
std::vector<ResultRow> read_rows_csv(std::istream& in, const std::string& source = "<stream>");

/// RFC 4180 field quoting.
std::string csv_field(const std::string& value);
std::vector<std::string> parse_csv_line(const std::string& line);

/// Loads (or reuses from `cache_dir`) the vectorised train/test sets.
PreparedDataset load_prepared_dataset(const DatasetSpec& spec, std::int64_t min_count,
                                      const std::optional<std::filesystem::path>& cache_dir);

/// Identifies one (dataset, method, learner, loss, repetition) unit of work.
struct RunKey {
    std::string dataset;
    MethodKind method;
    std::optional<LearnerKind> learner;
    std::optional<LossKind> loss;
    std::int64_t repetition;

    std::string learner_name() const { return learner ? to_string(*learner) : "-"; }
    std::string loss_name() const { return loss ? to_string(*loss) : "-"; }
    std::string stem() const;
};

/// Seeds for one (dataset, repetition). Shared by every method, learner and
/// loss so that their results are paired.
struct RepetitionSeeds {
    std::uint64_t outer_split;
    std::uint64_t inner_split;
    std::uint64_t validation;
    std::uint64_t test;
};

RepetitionSeeds repetition_seeds(std::uint64_t master, const std::string& dataset,
                                 std::int64_t repetition);

std::vector<RunKey> plan_runs(const ExperimentConfig& config);

struct RunFailure {
    std::string key;
    std::string message;
};

struct RunResult {
    std::vector<ResultRow> rows;
    std::vector<RunFailure> failures;
    std::size_t resumed = 0;

    bool ok() const { return failures.empty(); }
};

struct RunOptions {
    std::filesystem::path out_dir;
    int jobs = 1;
    std::ostream* log = nullptr;
};

/// Full protocol. Each unit of work is persisted under out_dir/parts as soon
/// as it completes; units already persisted are loaded instead of recomputed.
/// Writes raw.csv in canonical key order plus the report files.
RunResult run_protocol(const ExperimentConfig& config, const RunOptions& options);

/// Model selection only (repetition 0), one JSON report per unit.
std::vector<RunFailure> run_selection_only(const ExperimentConfig& config, const RunOptions& options);

/// Vectorises every dataset and writes it with its repetition-0 outer split.
void run_prepare(const ExperimentConfig& config, const std::filesystem::path& out_dir);

nlohmann::json selection_report_json(const SelectionReport& report);

struct SummaryRow {
    std::string dataset, method, learner, optimized_for;
    std::int64_t repetitions = 0;
    std::int64_t samples = 0;
    double mean_ae = 0.0;
    double mean_rae = 0.0;
};

/// Mean AE/RAE per (dataset, method, learner, optimized_for), averaging the
/// per-repetition means.
std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);

struct TTestRow {
    std::string method, metric, first, second;
    std::size_t pairs = 0;
    TTestVerdict verdict;
};

/// Paired tests between selection losses of the same method, pairing rows on
/// (dataset, learner, repetition, grid prevalence, sample id).
std::vector<TTestRow> loss_comparisons(const std::vector<ResultRow>& rows);

/// Writes raw.csv, summary.csv, summary.txt, ttest.csv and ttest.txt.
void report(const std::vector<ResultRow>& rows, const std::filesystem::path& out_dir);

/// Pairs two row sets on (dataset, learner, repetition, grid prevalence,
/// sample id) and tests the chosen metric ("ae" or "rae").
TTestRow compare_rows(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b,
                      const std::string& metric, bool match_learner = true);

} // namespace quantkit

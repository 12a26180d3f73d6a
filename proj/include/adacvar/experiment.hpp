#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adacvar/algorithms.hpp"
#include "adacvar/data.hpp"
#include "adacvar/learners.hpp"

namespace adacvar {

inline constexpr int kRecordSchemaVersion = 1;
/// Environment variable that overrides the config seed.
inline constexpr const char* kSeedEnvVar = "ADACVAR_SEED";

struct DatasetConfig {
    std::string name = "normal";        ///< synthetic generator, used when `path` is empty
    std::string path;                   ///< CSV file
    std::string schema;                 ///< optional schema sidecar for `path`
    std::size_t n = 2000;
    std::size_t d = 10;
    double noise = 1.0;
    double separation = 2.0;
    std::optional<std::uint64_t> seed;  ///< generator seed; defaults to the run seed
    SplitSpec split;
    ShiftSpec shift;
    bool standardize = true;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    TrainConfig train;
    std::optional<std::size_t> epochs;  ///< overrides train.steps when set
    std::optional<LossKind> loss;       ///< default: squared for regression, logistic for binary
    double scale_quantile = 0.995;
    std::string output_dir;
    bool record_steps = false;  ///< also emit one record per training step
    std::uint64_t seed = 0;
    nlohmann::json source;  ///< resolved config as given, for hashing and records
};

/// Parses a config document. Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// file < environment seed < flag overrides (a JSON object merged on top).
ExperimentConfig resolve_config(const nlohmann::json& file, const std::optional<std::string>& env_seed,
                                const nlohmann::json& overrides);

/// Hex FNV-1a hash of the canonical serialization.
std::string config_hash(const nlohmann::json& doc);

struct PreparedData {
    Splits splits;
    LossSpec spec;
    Standardization standardization;
    std::string dataset_name;
};

/// Load or generate, split, shift, standardize, and calibrate the loss scale.
PreparedData prepare_data(const ExperimentConfig& config);

/// Mean loss and CVaR (normalized and raw), plus accuracy and minimum
/// per-class precision for binary tasks.
nlohmann::json split_metrics(const Dataset& data, const ModelParams& params, const LossSpec& spec,
                             double alpha);

using RecordSink = std::function<void(const nlohmann::json&)>;

struct RunOutcome {
    nlohmann::json final_record;
    TrainResult result;
    PreparedData data;
};

/// Runs one configured experiment, emitting epoch records and the final
/// record to `sink` (and to output_dir when set). On a numeric failure a
/// failure record is emitted before the NumericError propagates.
RunOutcome run_experiment(const ExperimentConfig& config, const RecordSink& sink);

nlohmann::json model_to_json(const ModelParams& params, const LossSpec& spec, const Standardization& st,
                             const std::vector<std::string>& feature_names);

/// Metrics of a saved model on a CSV dataset at each alpha.
nlohmann::json evaluate_model(const nlohmann::json& model, const Dataset& data, const std::vector<double>& alphas);

enum class LossModel { constant, top_k, switching_top_k };

LossModel loss_model_from_string(const std::string& name);
const char* to_string(LossModel m);

struct RegretBenchSpec {
    std::size_t n = 50;
    std::size_t k = 5;
    std::vector<std::size_t> horizons{1000, 10000, 100000};
    LossModel model = LossModel::top_k;
    std::size_t seeds = 20;
    std::uint64_t first_seed = 0;
    SamplerOptions sampler;
    double p_high = 0.9;
    double p_low = 0.1;
};

struct RegretBenchRow {
    std::size_t horizon;
    double median;
    std::vector<double> per_seed;
};

struct RegretBenchResult {
    std::vector<RegretBenchRow> rows;
    std::optional<double> slope;  ///< least-squares log-log slope of the medians
};

/// Sampler-only regret of one seeded run of length T.
double sampler_regret_run(const RegretBenchSpec& spec, std::size_t horizon, std::uint64_t seed);
RegretBenchResult run_regret_bench(const RegretBenchSpec& spec);

/// Least-squares slope of log y on log x. Throws InvalidInput on nonpositive values.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct MarginalsBenchSpec {
    std::vector<std::size_t> sizes{50, 100, 200, 500};
    std::optional<std::size_t> k;  ///< fixed k, otherwise floor(alpha N)
    double alpha = 0.1;
    double log_weight_sd = 1.0;    ///< log-weights ~ N(0, sd^2)
    std::size_t seeds = 50;
    std::uint64_t first_seed = 0;
};

struct MarginalsBenchRow {
    std::size_t n;
    std::size_t k;
    double median_tv;
    double max_tv;
};

inline constexpr std::size_t kMaxExactBenchSize = 2000;

std::vector<MarginalsBenchRow> run_marginals_bench(const MarginalsBenchSpec& spec);

/// JSON front-ends for the benches and the generator; ConfigError names the field.
RegretBenchSpec parse_regret_bench_spec(const nlohmann::json& doc);
MarginalsBenchSpec parse_marginals_bench_spec(const nlohmann::json& doc);
SyntheticSpec parse_synthetic_spec(const nlohmann::json& doc);
nlohmann::json to_json(const RegretBenchResult& result);
nlohmann::json to_json(const std::vector<MarginalsBenchRow>& rows);

struct SummaryOptions {
    bool include_failed = false;  ///< score numeric-failure runs on their last epoch metrics
};

struct Summary {
    nlohmann::json table;  ///< per dataset, metric, algorithm: mean, sd, normalized, paired seeds
    std::string tidy_csv;  ///< dataset,algorithm,metric,seed,value
};

/// Groups run records by dataset and algorithm. Input order does not matter.
Summary summarize(const std::vector<nlohmann::json>& records, const SummaryOptions& options = {});
/// Reads every JSONL file, sorted by path.
std::vector<nlohmann::json> read_records(std::vector<std::string> paths);
/// POSIX glob expansion, sorted; no matches yields an empty list.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace adacvar

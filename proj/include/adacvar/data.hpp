#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adacvar/rng.hpp"

namespace adacvar {

enum class TaskKind { regression, binary, multiclass };

const char* to_string(TaskKind kind);

/// Row-major feature matrix with targets. Binary labels are -1/+1, multiclass
/// labels 0..C-1.
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> features;
    std::vector<double> targets;
    std::vector<std::string> feature_names;
    std::vector<bool> continuous;  ///< false for one-hot indicator columns
    TaskKind task = TaskKind::regression;

    std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
    bool is_classification() const { return task != TaskKind::regression; }
    /// Copy with rows `indices` (in the given order).
    Dataset subset(std::span<const std::size_t> indices) const;
    /// Throws InvalidInput on shape mismatch, non-finite entries or zero rows.
    void validate() const;
};

enum class SyntheticKind { normal, pareto, sinc, two_gaussians };

SyntheticKind synthetic_from_string(const std::string& name);
const char* to_string(SyntheticKind kind);

struct SyntheticSpec {
    SyntheticKind kind = SyntheticKind::normal;
    std::size_t n = 1000;
    std::size_t d = 10;        ///< ignored by sinc (always 1-d)
    double noise = 1.0;        ///< noise scale (std for Gaussian, multiplier for Pareto)
    double separation = 2.0;   ///< distance between class means (two-gaussians)
    std::uint64_t seed = 0;
};

/// Pareto noise shape; the noise is location-shifted to mean zero.
inline constexpr double kParetoShape = 2.5;

/// Zero-mean Pareto draw: x_m U^{-1/a} - a x_m / (a - 1) with x_m = 1.
double pareto_noise(Rng& rng);

/// Throws InvalidInput when n < 10 or parameters are out of range.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// Optional sidecar overriding CSV interpretation.
struct CsvSchema {
    std::optional<std::string> target;          ///< default: last column
    std::vector<std::string> categorical;       ///< forced one-hot columns
    std::optional<std::string> positive_class;  ///< binary label mapped to +1
    std::optional<TaskKind> task;               ///< default: inferred from the target
};

/// Reads a schema sidecar JSON ({"target", "categorical", "positive_class", "task"}).
CsvSchema load_schema(const std::string& path);

/// Parses a header + comma-separated numeric/categorical file. Columns that
/// fail to parse as numbers anywhere are one-hot encoded (values sorted).
Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
Dataset parse_csv(const std::string& text, const CsvSchema& schema = {});

/// Writes a dataset with a header and a trailing "target" column.
void write_csv(const Dataset& data, const std::string& path);

struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;  ///< 1 for zero-variance and one-hot columns
};

/// Fits per-column mean / population std on `train` (continuous columns only)
/// and applies it in place to `train` and every dataset in `others`.
Standardization standardize(Dataset& train, std::span<Dataset* const> others = {});

struct SplitSpec {
    double train = 0.5;
    double val = 0.3;
    double test = 0.2;
    std::uint64_t seed = 0;
};

struct Splits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Seeded shuffle, then partition by rounded fractions. Throws InvalidInput
/// when fractions do not sum to 1 or a part would be empty.
Splits split(const Dataset& data, const SplitSpec& spec);

enum class ShiftKind { none, binary_imbalance_invert, power_law };
enum class ShiftTarget { train, test, both };
enum class Rebalance { none, upsample, downsample };

struct ShiftSpec {
    ShiftKind kind = ShiftKind::none;
    double ratio = 0.1;  ///< share of the former majority after inversion, in (0, 0.5]
    double beta = 1.0;   ///< power-law base; class c keeps size ~ c^{log beta}
    ShiftTarget target = ShiftTarget::train;
    Rebalance rebalance = Rebalance::none;
};

/// Class-frequency shift followed by the optional rebalance. Rows are only
/// ever dropped, or duplicated by upsampling. Throws InvalidInput on
/// regression data or an invalid spec.
Dataset apply_shift(const Dataset& data, const ShiftSpec& spec, Rng& rng);

/// Per-class counts keyed by label (labels in ascending order).
std::vector<std::pair<double, std::size_t>> class_counts(const Dataset& data);

}  // namespace adacvar

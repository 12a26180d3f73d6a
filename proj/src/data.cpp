#include "adacvar/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adacvar/error.hpp"

namespace adacvar {

const char* to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::regression: return "regression";
        case TaskKind::binary: return "binary";
        case TaskKind::multiclass: return "multiclass";
    }
    return "unknown";
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.rows = indices.size();
    out.cols = cols;
    out.feature_names = feature_names;
    out.continuous = continuous;
    out.task = task;
    out.features.reserve(indices.size() * cols);
    out.targets.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= rows) throw InvalidInput("row index out of range in subset");
        const auto r = row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.targets.push_back(targets[i]);
    }
    return out;
}

void Dataset::validate() const {
    if (rows == 0) throw InvalidInput("dataset has no rows");
    if (features.size() != rows * cols || targets.size() != rows)
        throw InvalidInput("dataset shape mismatch");
    if (feature_names.size() != cols || continuous.size() != cols)
        throw InvalidInput("dataset column metadata mismatch");
    for (double v : features)
        if (!std::isfinite(v)) throw InvalidInput("dataset contains non-finite features");
    for (double v : targets)
        if (!std::isfinite(v)) throw InvalidInput("dataset contains non-finite targets");
}

SyntheticKind synthetic_from_string(const std::string& name) {
    if (name == "normal") return SyntheticKind::normal;
    if (name == "pareto") return SyntheticKind::pareto;
    if (name == "sinc") return SyntheticKind::sinc;
    if (name == "two-gaussians") return SyntheticKind::two_gaussians;
    throw InvalidInput("unknown synthetic dataset '" + name + "'");
}

const char* to_string(SyntheticKind kind) {
    switch (kind) {
        case SyntheticKind::normal: return "normal";
        case SyntheticKind::pareto: return "pareto";
        case SyntheticKind::sinc: return "sinc";
        case SyntheticKind::two_gaussians: return "two-gaussians";
    }
    return "unknown";
}

double pareto_noise(Rng& rng) {
    const double u = 1.0 - rng.uniform();  // (0, 1]
    return std::pow(u, -1.0 / kParetoShape) - kParetoShape / (kParetoShape - 1.0);
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 10) throw InvalidInput("synthetic datasets need n >= 10");
    if (!(spec.noise >= 0.0) || !std::isfinite(spec.noise))
        throw InvalidInput("noise scale must be finite and nonnegative");
    const std::size_t d = spec.kind == SyntheticKind::sinc ? 1 : spec.d;
    if (d == 0) throw InvalidInput("synthetic datasets need d >= 1");

    Rng coef_rng = Rng::substream(spec.seed, "coefficients");
    Rng rng = Rng::substream(spec.seed, "samples");

    Dataset out;
    out.rows = spec.n;
    out.cols = d;
    out.features.resize(spec.n * d);
    out.targets.resize(spec.n);
    out.continuous.assign(d, true);
    for (std::size_t j = 0; j < d; ++j) out.feature_names.push_back("x" + std::to_string(j));

    switch (spec.kind) {
        case SyntheticKind::normal:
        case SyntheticKind::pareto: {
            std::vector<double> theta(d);
            for (double& v : theta) v = coef_rng.normal();
            for (std::size_t i = 0; i < spec.n; ++i) {
                double y = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double x = rng.normal();
                    out.features[i * d + j] = x;
                    y += theta[j] * x;
                }
                const double eps = spec.kind == SyntheticKind::normal ? rng.normal() : pareto_noise(rng);
                out.targets[i] = y + spec.noise * eps;
            }
            break;
        }
        case SyntheticKind::sinc: {
            constexpr double pi = 3.14159265358979323846;
            for (std::size_t i = 0; i < spec.n; ++i) {
                const double x = -5.0 + 10.0 * rng.uniform();
                const double s = x == 0.0 ? 1.0 : std::sin(pi * x) / (pi * x);
                out.features[i] = x;
                out.targets[i] = s + spec.noise * rng.normal();
            }
            break;
        }
        case SyntheticKind::two_gaussians: {
            if (!(spec.separation >= 0.0)) throw InvalidInput("class separation must be nonnegative");
            out.task = TaskKind::binary;
            // Means at +-(separation / 2) along the diagonal direction.
            const double offset = 0.5 * spec.separation / std::sqrt(static_cast<double>(d));
            for (std::size_t i = 0; i < spec.n; ++i) {
                const double label = rng.uniform() < 0.5 ? -1.0 : 1.0;
                for (std::size_t j = 0; j < d; ++j) out.features[i * d + j] = label * offset + rng.normal();
                out.targets[i] = label;
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(std::string_view(line).substr(start)));
            break;
        }
        out.push_back(trim(std::string_view(line).substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

bool parse_number(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    char* end = nullptr;
    out = std::strtod(cell.c_str(), &end);
    return end == cell.c_str() + cell.size() && std::isfinite(out);
}

}  // namespace

CsvSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema '" + path + "'");
    CsvSchema schema;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.contains("target")) schema.target = j.at("target").get<std::string>();
        if (j.contains("categorical")) schema.categorical = j.at("categorical").get<std::vector<std::string>>();
        if (j.contains("positive_class")) {
            const auto& p = j.at("positive_class");
            schema.positive_class = p.is_string() ? p.get<std::string>() : p.dump();
        }
        if (j.contains("task")) {
            const auto t = j.at("task").get<std::string>();
            if (t == "regression")
                schema.task = TaskKind::regression;
            else if (t == "binary" || t == "classification")
                schema.task = TaskKind::binary;
            else if (t == "multiclass")
                schema.task = TaskKind::multiclass;
            else
                throw ParseError(ParseFailure::bad_schema, 0, 0, "unknown task '" + t + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(ParseFailure::bad_schema, 0, 0, std::string("schema: ") + e.what());
    }
    return schema;
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
    std::vector<std::string> lines;
    {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            lines.push_back(line);
        }
        while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    }
    if (lines.empty()) throw ParseError(ParseFailure::empty_file, 0, 0, "file is empty");

    const std::vector<std::string> header = split_fields(lines[0]);
    const std::size_t ncols = header.size();
    if (lines.size() == 1) throw ParseError(ParseFailure::empty_dataset, 1, 0, "header without data rows");

    std::vector<std::vector<std::string>> cells;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        auto fields = split_fields(lines[r]);
        if (fields.size() != ncols)
            throw ParseError(ParseFailure::ragged_row, r + 1, std::min(fields.size(), ncols) + 1,
                             "expected " + std::to_string(ncols) + " fields, found " +
                                 std::to_string(fields.size()));
        for (std::size_t c = 0; c < ncols; ++c)
            if (fields[c].empty())
                throw ParseError(ParseFailure::bad_cell, r + 1, c + 1, "empty cell");
        cells.push_back(std::move(fields));
    }

    std::size_t target_col = ncols - 1;
    if (schema.target) {
        const auto it = std::find(header.begin(), header.end(), *schema.target);
        if (it == header.end())
            throw ParseError(ParseFailure::bad_schema, 1, 0, "target column '" + *schema.target + "' not found");
        target_col = static_cast<std::size_t>(it - header.begin());
    }
    for (const auto& name : schema.categorical)
        if (std::find(header.begin(), header.end(), name) == header.end())
            throw ParseError(ParseFailure::bad_schema, 1, 0, "categorical column '" + name + "' not found");

    // Column typing.
    std::vector<bool> numeric(ncols, true);
    std::vector<std::vector<double>> values(ncols, std::vector<double>(cells.size(), 0.0));
    for (std::size_t c = 0; c < ncols; ++c) {
        if (std::find(schema.categorical.begin(), schema.categorical.end(), header[c]) !=
            schema.categorical.end()) {
            numeric[c] = false;
            continue;
        }
        for (std::size_t r = 0; r < cells.size(); ++r) {
            if (!parse_number(cells[r][c], values[c][r])) {
                numeric[c] = false;
                break;
            }
        }
    }

    Dataset out;
    out.rows = cells.size();

    // Target.
    std::set<std::string> target_levels;
    for (const auto& row : cells) target_levels.insert(row[target_col]);
    TaskKind task;
    if (schema.task) {
        task = *schema.task;
    } else if (numeric[target_col]) {
        task = target_levels.size() <= 2 ? TaskKind::binary : TaskKind::regression;
    } else {
        task = target_levels.size() <= 2 ? TaskKind::binary : TaskKind::multiclass;
    }
    out.task = task;
    out.targets.resize(out.rows);
    if (task == TaskKind::regression) {
        if (!numeric[target_col]) {
            for (std::size_t r = 0; r < cells.size(); ++r) {
                double v;
                if (!parse_number(cells[r][target_col], v))
                    throw ParseError(ParseFailure::bad_cell, r + 2, target_col + 1,
                                     "regression target '" + cells[r][target_col] + "' is not a number");
            }
        }
        out.targets = values[target_col];
    } else if (task == TaskKind::binary) {
        if (target_levels.size() != 2 && !(target_levels.size() == 1 && schema.positive_class))
            throw ParseError(ParseFailure::bad_cell, 2, target_col + 1,
                             "binary target needs exactly two distinct labels");
        std::string positive;
        if (schema.positive_class) {
            positive = *schema.positive_class;
        } else if (numeric[target_col]) {
            // Larger numeric label is the positive class.
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t r = 0; r < cells.size(); ++r)
                if (values[target_col][r] > best) {
                    best = values[target_col][r];
                    positive = cells[r][target_col];
                }
        } else {
            positive = *target_levels.rbegin();
        }
        for (std::size_t r = 0; r < cells.size(); ++r) {
            bool is_pos = cells[r][target_col] == positive;
            if (!is_pos && numeric[target_col]) {
                double p;
                if (parse_number(positive, p)) is_pos = values[target_col][r] == p;
            }
            out.targets[r] = is_pos ? 1.0 : -1.0;
        }
    } else {
        std::map<std::string, double> index;
        for (const auto& level : target_levels) index.emplace(level, static_cast<double>(index.size()));
        for (std::size_t r = 0; r < cells.size(); ++r) out.targets[r] = index.at(cells[r][target_col]);
    }

    // Features, one-hot expanding categorical columns.
    std::vector<std::vector<double>> columns;
    for (std::size_t c = 0; c < ncols; ++c) {
        if (c == target_col) continue;
        if (numeric[c]) {
            columns.push_back(values[c]);
            out.feature_names.push_back(header[c]);
            out.continuous.push_back(true);
            continue;
        }
        std::set<std::string> levels;
        for (const auto& row : cells) levels.insert(row[c]);
        for (const auto& level : levels) {
            std::vector<double> col(cells.size(), 0.0);
            for (std::size_t r = 0; r < cells.size(); ++r) col[r] = cells[r][c] == level ? 1.0 : 0.0;
            columns.push_back(std::move(col));
            out.feature_names.push_back(header[c] + "=" + level);
            out.continuous.push_back(false);
        }
    }
    out.cols = columns.size();
    out.features.resize(out.rows * out.cols);
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out.features[r * out.cols + c] = columns[c][r];
    return out;
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_csv(buf.str(), schema);
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    for (const auto& name : data.feature_names) out << name << ',';
    out << "target\n";
    char buf[32];
    for (std::size_t i = 0; i < data.rows; ++i) {
        for (double v : data.row(i)) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", data.targets[i]);
        out << buf << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Preprocessing

Standardization standardize(Dataset& train, std::span<Dataset* const> others) {
    if (train.rows == 0) throw InvalidInput("cannot standardize with an empty training set");
    const std::size_t d = train.cols;
    Standardization st{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    const double n = static_cast<double>(train.rows);
    for (std::size_t j = 0; j < d; ++j) {
        if (!train.continuous[j]) continue;
        double mean = 0.0;
        for (std::size_t i = 0; i < train.rows; ++i) mean += train.features[i * d + j];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < train.rows; ++i) {
            const double c = train.features[i * d + j] - mean;
            var += c * c;
        }
        var /= n;
        st.mean[j] = mean;
        const double sd = std::sqrt(var);
        st.scale[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0;
    }
    const auto apply = [&](Dataset& ds) {
        if (ds.cols != d) throw InvalidInput("standardize: column count mismatch");
        for (std::size_t i = 0; i < ds.rows; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (train.continuous[j])
                    ds.features[i * d + j] = (ds.features[i * d + j] - st.mean[j]) / st.scale[j];
    };
    apply(train);
    for (Dataset* ds : others) apply(*ds);
    return st;
}

Splits split(const Dataset& data, const SplitSpec& spec) {
    if (spec.train < 0.0 || spec.val < 0.0 || spec.test < 0.0 ||
        std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
        throw InvalidInput("split fractions must be nonnegative and sum to 1");
    const std::size_t n = data.rows;
    const auto n_train = static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw InvalidInput("split of " + std::to_string(n) + " rows leaves an empty part");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = Rng::substream(spec.seed, "split");
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

    const std::span<const std::size_t> all(order);
    return {data.subset(all.subspan(0, n_train)), data.subset(all.subspan(n_train, n_val)),
            data.subset(all.subspan(n_train + n_val))};
}

std::vector<std::pair<double, std::size_t>> class_counts(const Dataset& data) {
    std::map<double, std::size_t> counts;
    for (double y : data.targets) ++counts[y];
    return {counts.begin(), counts.end()};
}

namespace {

// `m` distinct draws from `pool` (order of `pool` preserved in the result).
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t m, Rng& rng) {
    m = std::min(m, pool.size());
    for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::map<double, std::vector<std::size_t>> rows_by_class(const Dataset& data) {
    std::map<double, std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < data.rows; ++i) out[data.targets[i]].push_back(i);
    return out;
}

}  // namespace

Dataset apply_shift(const Dataset& data, const ShiftSpec& spec, Rng& rng) {
    if (spec.kind == ShiftKind::none && spec.rebalance == Rebalance::none) return data;
    if (!data.is_classification()) throw InvalidInput("class-frequency shifts need a classification task");

    auto by_class = rows_by_class(data);
    std::vector<std::size_t> keep;

    switch (spec.kind) {
        case ShiftKind::none:
            for (std::size_t i = 0; i < data.rows; ++i) keep.push_back(i);
            break;
        case ShiftKind::binary_imbalance_invert: {
            if (!(spec.ratio > 0.0 && spec.ratio <= 0.5))
                throw InvalidInput("imbalance ratio must lie in (0, 0.5]");
            if (by_class.size() != 2) throw InvalidInput("imbalance inversion needs exactly two classes");
            auto neg = by_class.begin()->second;
            auto pos = by_class.rbegin()->second;
            // Ties treat the positive class as the majority.
            std::vector<std::size_t>& majority = pos.size() >= neg.size() ? pos : neg;
            std::vector<std::size_t>& minority = pos.size() >= neg.size() ? neg : pos;
            const double target = spec.ratio * static_cast<double>(minority.size()) / (1.0 - spec.ratio);
            const auto m = static_cast<std::size_t>(std::llround(target));
            keep = minority;
            const auto kept = choose(majority, m, rng);
            keep.insert(keep.end(), kept.begin(), kept.end());
            break;
        }
        case ShiftKind::power_law: {
            if (!(spec.beta > 0.0)) throw InvalidInput("power-law beta must be positive");
            std::vector<std::pair<double, std::vector<std::size_t>>> classes(by_class.begin(), by_class.end());
            std::stable_sort(classes.begin(), classes.end(),
                             [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
            const double expo = std::log(spec.beta);
            std::vector<double> factor(classes.size());
            std::size_t ref = 0;
            for (std::size_t c = 0; c < classes.size(); ++c) {
                factor[c] = std::pow(static_cast<double>(c + 1), expo);
                if (factor[c] > factor[ref]) ref = c;
            }
            const double ref_size = static_cast<double>(classes[ref].second.size());
            for (std::size_t c = 0; c < classes.size(); ++c) {
                const auto want =
                    static_cast<std::size_t>(std::llround(ref_size * factor[c] / factor[ref]));
                const auto kept = choose(classes[c].second, std::max<std::size_t>(want, 1), rng);
                keep.insert(keep.end(), kept.begin(), kept.end());
            }
            break;
        }
    }
    std::sort(keep.begin(), keep.end());
    Dataset shifted = data.subset(keep);

    if (spec.rebalance == Rebalance::none) return shifted;

    auto groups = rows_by_class(shifted);
    std::size_t lo = shifted.rows, hi = 0;
    for (const auto& [label, rows] : groups) {
        lo = std::min(lo, rows.size());
        hi = std::max(hi, rows.size());
    }
    std::vector<std::size_t> rows;
    for (const auto& [label, members] : groups) {
        if (spec.rebalance == Rebalance::upsample) {
            rows.insert(rows.end(), members.begin(), members.end());
            for (std::size_t extra = members.size(); extra < hi; ++extra)
                rows.push_back(members[rng.index(members.size())]);
        } else {
            const auto kept = choose(members, lo, rng);
            rows.insert(rows.end(), kept.begin(), kept.end());
        }
    }
    return shifted.subset(rows);
}

}  // namespace adacvar

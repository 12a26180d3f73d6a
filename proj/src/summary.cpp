#include <glob.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "adacvar/error.hpp"
#include "adacvar/experiment.hpp"

namespace adacvar {

using nlohmann::json;

namespace {

struct Key {
    std::string dataset;
    std::string metric;
    bool operator<(const Key& o) const { return std::tie(dataset, metric) < std::tie(o.dataset, o.metric); }
};

// algorithm -> seed -> value
using Cells = std::map<std::string, std::map<std::uint64_t, double>>;

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void collect(const json& rec, std::map<Key, Cells>& table, std::set<std::tuple<std::string, std::string, std::uint64_t>>& runs) {
    const std::string dataset = rec.at("dataset").get<std::string>();
    const std::string algorithm = rec.at("algorithm").get<std::string>();
    const std::uint64_t seed = rec.at("seed").get<std::uint64_t>();
    if (!runs.insert({dataset, algorithm, seed}).second)
        throw InvalidInput("duplicate run for dataset '" + dataset + "', algorithm '" + algorithm + "', seed " +
                           std::to_string(seed));
    const json& metrics = rec.at("metrics");
    if (!metrics.is_object()) return;
    for (const auto& [split, values] : metrics.items()) {
        if (!values.is_object()) continue;
        for (const auto& [name, v] : values.items()) {
            if (name == "n" || !v.is_number()) continue;
            table[{dataset, split + "." + name}][algorithm][seed] = v.get<double>();
        }
    }
}

}  // namespace

Summary summarize(const std::vector<json>& records, const SummaryOptions& options) {
    std::map<Key, Cells> table;
    std::set<std::tuple<std::string, std::string, std::uint64_t>> runs;
    std::size_t failed = 0;
    for (const json& rec : records) {
        if (!rec.is_object() || !rec.contains("type")) throw InvalidInput("record without a type");
        const std::string type = rec.at("type").get<std::string>();
        if (type == "failure") {
            ++failed;
            if (options.include_failed && rec.contains("metrics") && !rec.at("metrics").is_null())
                collect(rec, table, runs);
        } else if (type == "final") {
            collect(rec, table, runs);
        }
    }

    Summary out;
    json datasets = json::object();
    std::ostringstream csv;
    csv << "dataset,algorithm,metric,seed,value\n";
    for (const auto& [key, cells] : table) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        std::map<std::string, std::pair<double, double>> stats;
        std::set<std::uint64_t> seeds;
        for (const auto& [algorithm, by_seed] : cells) {
            double mean = 0.0;
            for (const auto& [seed, v] : by_seed) {
                mean += v;
                seeds.insert(seed);
            }
            mean /= static_cast<double>(by_seed.size());
            double ss = 0.0;
            for (const auto& [seed, v] : by_seed) ss += (v - mean) * (v - mean);
            const double sd = by_seed.size() > 1 ? std::sqrt(ss / static_cast<double>(by_seed.size() - 1)) : 0.0;
            stats[algorithm] = {mean, sd};
            lo = std::min(lo, mean);
            hi = std::max(hi, mean);
        }

        json algorithms = json::object();
        for (const auto& [algorithm, ms] : stats) {
            const auto [mean, sd] = ms;
            algorithms[algorithm] = {{"n", cells.at(algorithm).size()},
                                     {"mean", mean},
                                     {"sd", sd},
                                     {"normalized", hi > lo ? (mean - lo) / (hi - lo) : 0.0},
                                     {"normalized_sd", hi != 0.0 ? sd / std::abs(hi) : 0.0}};
        }
        json columns = json::object();
        for (const auto& [algorithm, by_seed] : cells) {
            json col = json::array();
            for (std::uint64_t s : seeds) {
                const auto it = by_seed.find(s);
                col.push_back(it == by_seed.end() ? json(nullptr) : json(it->second));
                if (it != by_seed.end())
                    csv << key.dataset << ',' << algorithm << ',' << key.metric << ',' << s << ','
                        << format_number(it->second) << '\n';
            }
            columns[algorithm] = std::move(col);
        }
        datasets[key.dataset][key.metric] = {{"algorithms", std::move(algorithms)},
                                             {"paired", {{"seeds", seeds}, {"columns", std::move(columns)}}}};
    }
    out.table = {{"schema_version", kRecordSchemaVersion},
                 {"failed_runs", failed},
                 {"include_failed", options.include_failed},
                 {"datasets", std::move(datasets)}};
    out.tidy_csv = csv.str();
    return out;
}

std::vector<json> read_records(std::vector<std::string> paths) {
    std::sort(paths.begin(), paths.end());
    std::vector<json> out;
    for (const auto& path : paths) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open " + path);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                out.push_back(json::parse(line));
            } catch (const json::parse_error& e) {
                throw ParseError(ParseFailure::bad_cell, lineno, 0, path + ": " + e.what());
            }
        }
    }
    return out;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
    std::vector<std::string> out;
    if (rc == 0)
        for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    ::globfree(&g);
    if (rc != 0 && rc != GLOB_NOMATCH) throw IoError("glob failed for pattern " + pattern);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace adacvar

// Command-line front-end. Talks to the library only through the C API.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adacvar/adacvar.h"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

int exit_code(adacvar_status s) {
    switch (s) {
        case ADACVAR_OK: return kExitOk;
        case ADACVAR_ERR_CONFIG: return kExitConfig;
        case ADACVAR_ERR_NUMERIC: return kExitNumeric;
        default: return kExitFailure;
    }
}

int report(adacvar_status s) {
    if (s != ADACVAR_OK)
        std::cerr << "adacvar: " << adacvar_status_string(s) << ": " << adacvar_last_error() << '\n';
    return exit_code(s);
}

std::optional<std::string> read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool write_file(const std::string& path, const char* text) {
    std::ofstream out(path);
    out << text;
    return static_cast<bool>(out);
}

/// Takes ownership of a library string and returns a copy.
std::string take(char* s) {
    std::string out = s ? s : "";
    adacvar_string_free(s);
    return out;
}

struct TrainArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> algorithm;
    std::optional<double> alpha;
    std::optional<std::size_t> steps;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch_size;
    std::optional<double> lr;
    std::optional<std::string> output_dir;
    std::optional<std::string> selection;
    bool instrument = false;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    const auto text = read_file(a.config);
    if (!text) {
        std::cerr << "adacvar: cannot read config " << a.config << '\n';
        return kExitConfig;
    }
    json overrides = json::object();
    if (a.seed) overrides["seed"] = *a.seed;
    if (a.algorithm) overrides["algorithm"] = *a.algorithm;
    if (a.alpha) overrides["alpha"] = *a.alpha;
    if (a.steps) {
        overrides["steps"] = *a.steps;
        overrides["epochs"] = nullptr;
    }
    if (a.epochs) {
        overrides["epochs"] = *a.epochs;
        overrides["steps"] = nullptr;
    }
    if (a.batch_size) overrides["batch_size"] = *a.batch_size;
    if (a.lr) overrides["lr"] = *a.lr;
    if (a.output_dir) overrides["output_dir"] = *a.output_dir;
    if (a.selection) overrides["iterate_selection"] = *a.selection;
    if (a.instrument) overrides["instrument_full_losses"] = true;
    const std::string overrides_text = overrides.dump();
    const char* env_seed = std::getenv("ADACVAR_SEED");

    adacvar_record_fn print = nullptr;
    if (!a.quiet) print = [](const char* line, void*) { std::cout << line << '\n'; };
    char* final_record = nullptr;
    const adacvar_status s = adacvar_train(text->c_str(), env_seed, overrides_text.c_str(), print, nullptr,
                                           &final_record);
    const std::string final_text = take(final_record);
    if (s == ADACVAR_OK && a.quiet) std::cout << final_text << '\n';
    std::cout.flush();
    return report(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive-sampling CVaR optimization experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(adacvar_version()));
    int code = kExitOk;

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train one configured run; prints JSONL records");
    t->add_option("config", train.config, "Config JSON file")->required();
    t->add_option("--seed", train.seed, "Override the run seed");
    t->add_option("--algorithm", train.algorithm, "ada-cvar | trunc-cvar | soft-cvar | mean");
    t->add_option("--alpha", train.alpha, "Risk level in (0, 1]");
    auto* steps_opt = t->add_option("--steps", train.steps, "Number of training steps");
    t->add_option("--epochs", train.epochs, "Number of epochs")->excludes(steps_opt);
    t->add_option("--batch-size", train.batch_size, "Mini-batch size");
    t->add_option("--lr", train.lr, "Learner step size");
    t->add_option("--output-dir", train.output_dir, "Directory for the JSONL stream and model file");
    t->add_option("--iterate-selection", train.selection, "average | uniform-random | last");
    t->add_flag("--instrument", train.instrument, "Record full loss vectors every step");
    t->add_flag("-q,--quiet", train.quiet, "Print only the final record");
    t->callback([&] { code = run_train(train); });

    std::string model_path, data_path, schema_path;
    std::vector<double> alphas{0.01, 0.05, 0.1, 1.0};
    auto* e = app.add_subcommand("evaluate", "Evaluate a saved model on a CSV dataset");
    e->add_option("model", model_path, "Model JSON written by train")->required();
    e->add_option("data", data_path, "CSV dataset")->required();
    e->add_option("--schema", schema_path, "Schema sidecar JSON");
    e->add_option("--alpha", alphas, "Risk levels")->expected(1, -1);
    e->callback([&] {
        char* out = nullptr;
        const adacvar_status s = adacvar_evaluate(model_path.c_str(), data_path.c_str(), schema_path.c_str(),
                                                  alphas.data(), alphas.size(), &out);
        const std::string text = take(out);
        if (s == ADACVAR_OK) std::cout << json::parse(text).dump(2) << '\n';
        code = report(s);
    });

    std::size_t r_n = 50, r_k = 5, r_seeds = 20;
    std::uint64_t r_first = 0;
    std::vector<std::size_t> r_horizons{1000, 10000, 100000};
    std::string r_model = "topk", r_schedule = "fixed-horizon";
    double r_gamma = 0.01, r_eta0 = 1.0;
    bool r_json = false;
    auto* r = app.add_subcommand("regret-bench", "Sampler-only regret over a horizon grid");
    r->add_option("--n", r_n, "Number of items");
    r->add_option("--k", r_k, "Tail size");
    r->add_option("--horizons", r_horizons, "Horizon grid")->expected(1, -1);
    r->add_option("--model", r_model, "constant | topk | switching-topk");
    r->add_option("--seeds", r_seeds, "Number of seeds");
    r->add_option("--first-seed", r_first, "First seed");
    r->add_option("--gamma", r_gamma, "Uniform mixing weight");
    r->add_option("--schedule", r_schedule, "constant | fixed-horizon | inverse-sqrt | adaptive");
    r->add_option("--eta0", r_eta0, "Base sampler step size");
    r->add_flag("--json", r_json, "Print JSON instead of a table");
    r->callback([&] {
        const json spec = {{"n", r_n}, {"k", r_k}, {"horizons", r_horizons}, {"model", r_model},
                           {"seeds", r_seeds}, {"first_seed", r_first}, {"gamma", r_gamma},
                           {"schedule", r_schedule}, {"eta0", r_eta0}};
        char* out = nullptr;
        const adacvar_status s = adacvar_regret_bench(spec.dump().c_str(), &out);
        const std::string text = take(out);
        if (s == ADACVAR_OK) {
            const json res = json::parse(text);
            if (r_json) {
                std::cout << res.dump(2) << '\n';
            } else {
                std::printf("%10s  %14s  %12s\n", "T", "median SR_T", "SR_T / T");
                for (const auto& row : res["rows"]) {
                    const double h = row["horizon"].get<double>();
                    const double m = row["median_regret"].get<double>();
                    std::printf("%10.0f  %14.6g  %12.6g\n", h, m, m / h);
                }
                if (res["slope"].is_null())
                    std::printf("log-log slope: n/a\n");
                else
                    std::printf("log-log slope: %.4f\n", res["slope"].get<double>());
            }
        }
        code = report(s);
    });

    std::vector<std::size_t> m_sizes{50, 100, 200, 500};
    std::optional<std::size_t> m_k;
    double m_alpha = 0.1, m_sd = 1.0;
    std::size_t m_seeds = 50;
    std::uint64_t m_first = 0;
    bool m_json = false;
    auto* m = app.add_subcommand("marginals-bench", "Exact versus matched-DPP marginals");
    m->add_option("--sizes", m_sizes, "Ground-set sizes")->expected(1, -1);
    m->add_option("--k", m_k, "Fixed tail size (default floor(alpha N))");
    m->add_option("--alpha", m_alpha, "Risk level used when --k is absent");
    m->add_option("--log-weight-sd", m_sd, "Std of the Gaussian log-weights");
    m->add_option("--seeds", m_seeds, "Weight draws per size");
    m->add_option("--first-seed", m_first, "First seed");
    m->add_flag("--json", m_json, "Print JSON instead of a table");
    m->callback([&] {
        json spec = {{"sizes", m_sizes}, {"alpha", m_alpha}, {"log_weight_sd", m_sd},
                     {"seeds", m_seeds}, {"first_seed", m_first}};
        if (m_k) spec["k"] = *m_k;
        char* out = nullptr;
        const adacvar_status s = adacvar_marginals_bench(spec.dump().c_str(), &out);
        const std::string text = take(out);
        if (s == ADACVAR_OK) {
            const json res = json::parse(text);
            if (m_json) {
                std::cout << res.dump(2) << '\n';
            } else {
                std::printf("%8s  %6s  %12s  %12s\n", "N", "k", "median TV", "max TV");
                for (const auto& row : res["rows"])
                    std::printf("%8zu  %6zu  %12.4e  %12.4e\n", row["n"].get<std::size_t>(),
                                row["k"].get<std::size_t>(), row["median_tv"].get<double>(),
                                row["max_tv"].get<double>());
            }
        }
        code = report(s);
    });

    std::string g_name = "normal", g_out;
    std::size_t g_n = 2000, g_d = 10;
    double g_noise = 1.0, g_sep = 2.0;
    std::uint64_t g_seed = 0;
    auto* g = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV");
    g->add_option("--name", g_name, "normal | pareto | sinc | two-gaussians");
    g->add_option("--n", g_n, "Number of rows");
    g->add_option("--d", g_d, "Number of features");
    g->add_option("--noise", g_noise, "Noise scale");
    g->add_option("--separation", g_sep, "Class-mean distance (two-gaussians)");
    g->add_option("--seed", g_seed, "Generator seed");
    g->add_option("-o,--out", g_out, "Output CSV path")->required();
    g->callback([&] {
        const json spec = {{"name", g_name}, {"n", g_n}, {"d", g_d}, {"noise", g_noise},
                           {"separation", g_sep}, {"seed", g_seed}};
        code = report(adacvar_gen_data(spec.dump().c_str(), g_out.c_str()));
    });

    std::vector<std::string> patterns;
    std::string s_out, s_csv;
    bool include_failed = false;
    auto* su = app.add_subcommand("summarize", "Aggregate final records by dataset and algorithm");
    su->add_option("patterns", patterns, "JSONL files or glob patterns")->required()->expected(1, -1);
    su->add_option("-o,--out", s_out, "Write the summary JSON here instead of stdout");
    su->add_option("--tidy-csv", s_csv, "Also write dataset,algorithm,metric,seed,value rows");
    su->add_flag("--include-failed", include_failed, "Score numeric-failure runs on their last epoch");
    su->callback([&] {
        std::vector<const char*> ptrs;
        for (const auto& p : patterns) ptrs.push_back(p.c_str());
        const std::string options = json{{"include_failed", include_failed}}.dump();
        char* summary = nullptr;
        char* tidy = nullptr;
        const adacvar_status s = adacvar_summarize(ptrs.data(), ptrs.size(), options.c_str(), &summary,
                                                   s_csv.empty() ? nullptr : &tidy);
        const std::string summary_text = take(summary);
        const std::string tidy_text = take(tidy);
        if (s == ADACVAR_OK) {
            if (s_out.empty()) {
                std::cout << summary_text;
            } else if (!write_file(s_out, summary_text.c_str())) {
                std::cerr << "adacvar: cannot write " << s_out << '\n';
                code = kExitFailure;
                return;
            }
            if (!s_csv.empty() && !write_file(s_csv, tidy_text.c_str())) {
                std::cerr << "adacvar: cannot write " << s_csv << '\n';
                code = kExitFailure;
                return;
            }
        }
        code = report(s);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForVersion& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        return kExitConfig;
    }
    return code;
}

#include "adacvar/adacvar.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adacvar/error.hpp"
#include "adacvar/experiment.hpp"
#include "adacvar/kdpp.hpp"
#include "adacvar/risk.hpp"
#include "adacvar/sampler.hpp"
#include "adacvar/sum_tree.hpp"

using nlohmann::json;

struct adacvar_sampler {
    adacvar::Sampler impl;
};

struct adacvar_sumtree {
    adacvar::SumTree impl;
};

namespace {

thread_local std::string last_error;

adacvar_status code_of(adacvar::ErrorCode code) {
    return static_cast<adacvar_status>(static_cast<int>(code));
}

template <class F>
adacvar_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return ADACVAR_OK;
    } catch (const adacvar::Error& e) {
        last_error = e.what();
        return code_of(e.code());
    } catch (const json::exception& e) {
        last_error = std::string("json: ") + e.what();
        return ADACVAR_ERR_CONFIG;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return ADACVAR_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return ADACVAR_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return ADACVAR_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw adacvar::InvalidInput(what);
}

char* copy_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json parse_json(const char* text, const char* what) {
    require(text != nullptr, what);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw adacvar::ConfigError("/", std::string(what) + " is not valid JSON: " + e.what());
    }
}

std::vector<double> losses_from(const double* losses, std::size_t n) {
    require(losses != nullptr && n > 0, "losses must be a nonempty array");
    return {losses, losses + n};
}

adacvar::SamplerOptions sampler_options(const adacvar_sampler_options* o) {
    adacvar::SamplerOptions so;
    if (!o) return so;
    switch (o->schedule) {
        case ADACVAR_SCHEDULE_CONSTANT: so.schedule.kind = adacvar::ScheduleKind::constant; break;
        case ADACVAR_SCHEDULE_FIXED_HORIZON: so.schedule.kind = adacvar::ScheduleKind::fixed_horizon; break;
        case ADACVAR_SCHEDULE_INVERSE_SQRT: so.schedule.kind = adacvar::ScheduleKind::inverse_sqrt; break;
        case ADACVAR_SCHEDULE_ADAPTIVE: so.schedule.kind = adacvar::ScheduleKind::adaptive; break;
        default: throw adacvar::InvalidInput("unknown schedule");
    }
    so.schedule.eta0 = o->eta0;
    if (o->horizon) so.schedule.horizon = o->horizon;
    so.gamma = o->gamma;
    so.max_exponent = o->max_exponent;
    so.exact_max_n = o->exact_max_n;
    return so;
}

}  // namespace

extern "C" {

const char* adacvar_version(void) { return ADACVAR_VERSION; }

const char* adacvar_status_string(adacvar_status status) {
    switch (status) {
        case ADACVAR_OK: return "ok";
        case ADACVAR_ERR_INVALID_INPUT: return "invalid input";
        case ADACVAR_ERR_INFEASIBLE: return "infeasible constraint";
        case ADACVAR_ERR_EMPTY_DISTRIBUTION: return "empty distribution";
        case ADACVAR_ERR_CONFIG: return "configuration error";
        case ADACVAR_ERR_NUMERIC: return "numeric failure";
        case ADACVAR_ERR_PARSE: return "parse error";
        case ADACVAR_ERR_UNSUPPORTED: return "unsupported";
        case ADACVAR_ERR_IO: return "i/o error";
        case ADACVAR_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* adacvar_last_error(void) { return last_error.c_str(); }

void adacvar_string_free(char* s) { std::free(s); }

adacvar_status adacvar_tail_size(double alpha, size_t n, size_t* k) {
    return guarded([&] {
        require(k != nullptr, "null output");
        *k = adacvar::tail_size(alpha, n);
    });
}

adacvar_status adacvar_cvar(const double* losses, size_t n, double alpha, double* out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        const adacvar::LossVector l(losses_from(losses, n));
        *out = adacvar::empirical_cvar(l, adacvar::RiskLevel::for_size(alpha, n));
    });
}

adacvar_status adacvar_var(const double* losses, size_t n, double alpha, double* out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        const adacvar::LossVector l(losses_from(losses, n));
        *out = adacvar::empirical_var(l, adacvar::RiskLevel::for_size(alpha, n));
    });
}

adacvar_status adacvar_rockafellar(const double* losses, size_t n, double alpha, double ell, double* out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        const adacvar::LossVector l(losses_from(losses, n));
        *out = adacvar::rockafellar_objective(l, ell, adacvar::RiskLevel::for_size(alpha, n));
    });
}

adacvar_status adacvar_exact_marginals(const double* log_w, size_t n, size_t k, double* out) {
    return guarded([&] {
        require(log_w != nullptr && out != nullptr && n > 0, "null or empty array");
        const auto m = adacvar::exact_marginals(adacvar::LogWeightVector({log_w, log_w + n}), k);
        std::copy(m.p.begin(), m.p.end(), out);
    });
}

adacvar_status adacvar_approx_marginals(const double* log_w, size_t n, size_t k, double* out, double* nu) {
    return guarded([&] {
        require(log_w != nullptr && out != nullptr && n > 0, "null or empty array");
        const adacvar::LogWeightVector w({log_w, log_w + n});
        const auto m = adacvar::approx_marginals(w, k);
        std::copy(m.p.begin(), m.p.end(), out);
        if (nu) *nu = adacvar::solve_nu(w, k).nu;
    });
}

void adacvar_sampler_options_default(adacvar_sampler_options* options) {
    if (!options) return;
    const adacvar::SamplerOptions so;
    options->schedule = ADACVAR_SCHEDULE_FIXED_HORIZON;
    options->eta0 = so.schedule.eta0;
    options->horizon = 0;
    options->gamma = so.gamma;
    options->max_exponent = so.max_exponent;
    options->exact_max_n = so.exact_max_n;
}

adacvar_status adacvar_sampler_create(size_t n, size_t k, const adacvar_sampler_options* options,
                                      adacvar_sampler** out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        *out = nullptr;
        require(n > 0 && k >= 1 && k <= n, "sampler needs 1 <= k <= n");
        const auto level = adacvar::RiskLevel::for_size(static_cast<double>(k) / static_cast<double>(n), n);
        if (level.k() != k) throw adacvar::InvalidInput("k is not representable as floor(alpha n)");
        *out = new adacvar_sampler{adacvar::Sampler(n, level, sampler_options(options))};
    });
}

void adacvar_sampler_destroy(adacvar_sampler* sampler) { delete sampler; }

adacvar_status adacvar_sampler_distribution(adacvar_sampler* sampler, double* q, size_t n) {
    return guarded([&] {
        require(sampler != nullptr && q != nullptr, "null argument");
        require(n == sampler->impl.size(), "output length does not match the sampler");
        const auto& d = sampler->impl.distribution().q;
        std::copy(d.begin(), d.end(), q);
    });
}

adacvar_status adacvar_sampler_draw(adacvar_sampler* sampler, double u, size_t* index) {
    return guarded([&] {
        require(sampler != nullptr && index != nullptr, "null argument");
        require(u >= 0.0 && u < 1.0, "u must lie in [0, 1)");
        *index = sampler->impl.draw(u);
    });
}

adacvar_status adacvar_sampler_update(adacvar_sampler* sampler, const size_t* indices, const double* losses,
                                      const double* q_at, size_t count) {
    return guarded([&] {
        require(sampler != nullptr, "null sampler");
        require(count == 0 || (indices && losses && q_at), "null arrays");
        std::vector<adacvar::LossEstimate> batch;
        batch.reserve(count);
        for (std::size_t j = 0; j < count; ++j) batch.push_back({indices[j], losses[j], q_at[j]});
        sampler->impl.update(batch);
    });
}

adacvar_status adacvar_sampler_log_weights(const adacvar_sampler* sampler, double* out, size_t n) {
    return guarded([&] {
        require(sampler != nullptr && out != nullptr, "null argument");
        require(n == sampler->impl.size(), "output length does not match the sampler");
        const auto lw = sampler->impl.weights().log_w();
        std::copy(lw.begin(), lw.end(), out);
    });
}

adacvar_status adacvar_sampler_stats(const adacvar_sampler* sampler, size_t* step, size_t* clip_events) {
    return guarded([&] {
        require(sampler != nullptr, "null sampler");
        if (step) *step = sampler->impl.t();
        if (clip_events) *clip_events = sampler->impl.clip_events();
    });
}

adacvar_status adacvar_sumtree_create(const double* weights, size_t n, adacvar_sumtree** out) {
    return guarded([&] {
        require(out != nullptr, "null output");
        *out = nullptr;
        require(weights != nullptr && n > 0, "weights must be a nonempty array");
        *out = new adacvar_sumtree{adacvar::SumTree({weights, n})};
    });
}

void adacvar_sumtree_destroy(adacvar_sumtree* tree) { delete tree; }

adacvar_status adacvar_sumtree_update(adacvar_sumtree* tree, size_t index, double weight) {
    return guarded([&] {
        require(tree != nullptr, "null tree");
        tree->impl.update(index, weight);
    });
}

adacvar_status adacvar_sumtree_sample(const adacvar_sumtree* tree, double u, size_t* index) {
    return guarded([&] {
        require(tree != nullptr && index != nullptr, "null argument");
        require(u >= 0.0 && u < 1.0, "u must lie in [0, 1)");
        *index = tree->impl.sample(u);
    });
}

adacvar_status adacvar_sumtree_total(const adacvar_sumtree* tree, double* total) {
    return guarded([&] {
        require(tree != nullptr && total != nullptr, "null argument");
        *total = tree->impl.total();
    });
}

adacvar_status adacvar_train(const char* config_json, const char* env_seed, const char* overrides_json,
                             adacvar_record_fn on_record, void* user, char** final_json) {
    return guarded([&] {
        if (final_json) *final_json = nullptr;
        const json file = parse_json(config_json, "config");
        const json overrides = overrides_json ? parse_json(overrides_json, "overrides") : json(nullptr);
        const std::optional<std::string> env = env_seed ? std::optional<std::string>(env_seed) : std::nullopt;
        const adacvar::ExperimentConfig cfg = adacvar::resolve_config(file, env, overrides);
        adacvar::RecordSink sink;
        if (on_record)
            sink = [&](const json& rec) {
                const std::string line = rec.dump();
                on_record(line.c_str(), user);
            };
        const auto outcome = adacvar::run_experiment(cfg, sink);
        if (final_json) *final_json = copy_string(outcome.final_record.dump());
    });
}

adacvar_status adacvar_evaluate(const char* model_path, const char* data_path, const char* schema_path,
                                const double* alphas, size_t n_alphas, char** out_json) {
    return guarded([&] {
        require(model_path && data_path && out_json, "null argument");
        *out_json = nullptr;
        require(alphas != nullptr && n_alphas > 0, "at least one alpha is needed");
        std::ifstream in(model_path);
        if (!in) throw adacvar::IoError(std::string("cannot open ") + model_path);
        json model;
        try {
            model = json::parse(in);
        } catch (const json::parse_error& e) {
            throw adacvar::InvalidInput(std::string("model file is not valid JSON: ") + e.what());
        }
        const adacvar::CsvSchema schema =
            schema_path && *schema_path ? adacvar::load_schema(schema_path) : adacvar::CsvSchema{};
        const adacvar::Dataset data = adacvar::load_csv(data_path, schema);
        const json m = adacvar::evaluate_model(model, data, {alphas, alphas + n_alphas});
        *out_json = copy_string(m.dump());
    });
}

adacvar_status adacvar_regret_bench(const char* spec_json, char** out_json) {
    return guarded([&] {
        require(out_json != nullptr, "null output");
        *out_json = nullptr;
        const auto spec = adacvar::parse_regret_bench_spec(parse_json(spec_json, "spec"));
        *out_json = copy_string(adacvar::to_json(adacvar::run_regret_bench(spec)).dump());
    });
}

adacvar_status adacvar_marginals_bench(const char* spec_json, char** out_json) {
    return guarded([&] {
        require(out_json != nullptr, "null output");
        *out_json = nullptr;
        const auto spec = adacvar::parse_marginals_bench_spec(parse_json(spec_json, "spec"));
        *out_json = copy_string(adacvar::to_json(adacvar::run_marginals_bench(spec)).dump());
    });
}

adacvar_status adacvar_gen_data(const char* spec_json, const char* csv_path) {
    return guarded([&] {
        require(csv_path != nullptr, "null path");
        const auto spec = adacvar::parse_synthetic_spec(parse_json(spec_json, "spec"));
        adacvar::write_csv(adacvar::gen_synthetic(spec), csv_path);
    });
}

adacvar_status adacvar_summarize(const char* const* patterns, size_t n_patterns, const char* options_json,
                                 char** summary_json, char** tidy_csv) {
    return guarded([&] {
        require(summary_json != nullptr, "null output");
        *summary_json = nullptr;
        if (tidy_csv) *tidy_csv = nullptr;
        require(patterns != nullptr || n_patterns == 0, "null pattern list");
        adacvar::SummaryOptions options;
        if (options_json) {
            const json o = parse_json(options_json, "options");
            options.include_failed = o.value("include_failed", false);
        }
        std::vector<std::string> paths;
        for (std::size_t i = 0; i < n_patterns; ++i) {
            require(patterns[i] != nullptr, "null pattern");
            for (auto& p : adacvar::expand_glob(patterns[i])) paths.push_back(std::move(p));
        }
        if (paths.empty()) throw adacvar::InvalidInput("no record files matched");
        std::sort(paths.begin(), paths.end());
        paths.erase(std::unique(paths.begin(), paths.end()), paths.end());
        const auto summary = adacvar::summarize(adacvar::read_records(paths), options);
        std::string table = summary.table.dump(2);
        table += '\n';
        *summary_json = copy_string(table);
        if (tidy_csv) *tidy_csv = copy_string(summary.tidy_csv);
    });
}

}  // extern "C"

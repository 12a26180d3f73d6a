#include "adacvar/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "adacvar/error.hpp"
#include "adacvar/kdpp.hpp"
#include "adacvar/risk.hpp"
#include "adacvar/sampler.hpp"

namespace adacvar {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config field readers. Every failure names the JSON path of the field.

class Fields {
public:
    Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_.empty() ? "/" : path_, "expected an object");
    }

    std::string at(const std::string& key) const { return path_ + "/" + key; }
    bool has(const std::string& key) {
        seen_.insert(key);
        return obj_.contains(key) && !obj_.at(key).is_null();
    }
    const json& raw(const std::string& key) { return obj_.at(key); }

    void number(const std::string& key, double& out) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_number()) throw ConfigError(at(key), "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out)) throw ConfigError(at(key), "must be finite");
    }
    void number(const std::string& key, std::optional<double>& out) {
        if (!has(key)) return;
        double v = 0.0;
        number(key, v);
        out = v;
    }
    void count(const std::string& key, std::size_t& out) {
        if (!has(key)) return;
        out = static_cast<std::size_t>(unsigned_value(key));
    }
    void count(const std::string& key, std::optional<std::size_t>& out) {
        if (!has(key)) return;
        out = static_cast<std::size_t>(unsigned_value(key));
    }
    void seed(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        out = unsigned_value(key);
    }
    void flag(const std::string& key, bool& out) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_boolean()) throw ConfigError(at(key), "expected true or false");
        out = v.get<bool>();
    }
    void text(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const json& v = obj_.at(key);
        if (!v.is_string()) throw ConfigError(at(key), "expected a string");
        out = v.get<std::string>();
    }
    template <class T, class F>
    void choice(const std::string& key, T& out, F parse) {
        if (!has(key)) return;
        std::string s;
        text(key, s);
        try {
            out = parse(s);
        } catch (const InvalidInput& e) {
            throw ConfigError(at(key), e.what());
        }
    }

    /// Rejects keys that were never asked for (typos, unsupported options).
    void finish() const {
        for (const auto& [key, value] : obj_.items())
            if (!seen_.count(key)) throw ConfigError(at(key), "unknown key");
    }

private:
    std::uint64_t unsigned_value(const std::string& key) const {
        const json& v = obj_.at(key);
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        if (v.is_number_integer()) {
            if (v.get<std::int64_t>() < 0) throw ConfigError(at(key), "must be nonnegative");
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        throw ConfigError(at(key), "expected a nonnegative integer");
    }

    const json& obj_;
    std::string path_;
    std::set<std::string> seen_;
};

ShiftKind shift_kind_from_string(const std::string& s) {
    if (s == "none") return ShiftKind::none;
    if (s == "binary-imbalance-invert") return ShiftKind::binary_imbalance_invert;
    if (s == "power-law") return ShiftKind::power_law;
    throw InvalidInput("unknown shift kind '" + s + "'");
}

ShiftTarget shift_target_from_string(const std::string& s) {
    if (s == "train") return ShiftTarget::train;
    if (s == "test") return ShiftTarget::test;
    if (s == "both") return ShiftTarget::both;
    throw InvalidInput("unknown shift target '" + s + "'");
}

Rebalance rebalance_from_string(const std::string& s) {
    if (s == "none") return Rebalance::none;
    if (s == "upsample") return Rebalance::upsample;
    if (s == "downsample") return Rebalance::downsample;
    throw InvalidInput("unknown rebalance mode '" + s + "'");
}

GameOrdering ordering_from_string(const std::string& s) {
    if (s == "sampler-first") return GameOrdering::sampler_first;
    if (s == "learner-first") return GameOrdering::learner_first;
    throw InvalidInput("unknown ordering '" + s + "'");
}

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "squared") return LossKind::squared;
    if (s == "logistic") return LossKind::logistic;
    throw InvalidInput("unknown loss '" + s + "'");
}

void parse_dataset(const json& doc, DatasetConfig& ds) {
    Fields f(doc, "/dataset");
    f.text("name", ds.name);
    f.text("path", ds.path);
    f.text("schema", ds.schema);
    f.count("n", ds.n);
    f.count("d", ds.d);
    f.number("noise", ds.noise);
    f.number("separation", ds.separation);
    if (f.has("seed")) {
        std::uint64_t s = 0;
        f.seed("seed", s);
        ds.seed = s;
    }
    f.flag("standardize", ds.standardize);
    if (ds.path.empty()) {
        try {
            synthetic_from_string(ds.name);
        } catch (const InvalidInput& e) {
            throw ConfigError("/dataset/name", e.what());
        }
        if (ds.n < 10) throw ConfigError("/dataset/n", "synthetic datasets need n >= 10");
    }
    if (f.has("split")) {
        Fields s(f.raw("split"), "/dataset/split");
        s.number("train", ds.split.train);
        s.number("val", ds.split.val);
        s.number("test", ds.split.test);
        s.finish();
        const double sum = ds.split.train + ds.split.val + ds.split.test;
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("/dataset/split", "fractions must sum to 1");
        if (!(ds.split.train > 0.0 && ds.split.val >= 0.0 && ds.split.test > 0.0))
            throw ConfigError("/dataset/split", "train and test fractions must be positive");
    }
    if (f.has("shift")) {
        Fields s(f.raw("shift"), "/dataset/shift");
        s.choice("kind", ds.shift.kind, shift_kind_from_string);
        s.number("ratio", ds.shift.ratio);
        s.number("beta", ds.shift.beta);
        s.choice("target", ds.shift.target, shift_target_from_string);
        s.choice("rebalance", ds.shift.rebalance, rebalance_from_string);
        s.finish();
        if (!(ds.shift.ratio > 0.0 && ds.shift.ratio <= 0.5))
            throw ConfigError("/dataset/shift/ratio", "must lie in (0, 0.5]");
        if (!(ds.shift.beta > 0.0)) throw ConfigError("/dataset/shift/beta", "must be positive");
    }
    f.finish();
}

void parse_optimizer(Fields& f, OptimizerState& opt) {
    if (!f.has("optimizer")) return;
    const json& v = f.raw("optimizer");
    const auto parse_kind = [](const std::string& s) {
        return optimizer_from_string(s);
    };
    if (v.is_string()) {
        f.choice("optimizer", opt.kind, parse_kind);
        return;
    }
    Fields o(v, "/optimizer");
    o.choice("kind", opt.kind, parse_kind);
    o.number("momentum", opt.momentum);
    std::optional<double> radius;
    o.number("radius", radius);
    if (radius) {
        if (!(*radius > 0.0)) throw ConfigError("/optimizer/radius", "must be positive");
        opt.radius = radius;
    }
    o.finish();
}

void parse_sampler(Fields& f, SamplerOptions& so) {
    if (!f.has("sampler")) return;
    Fields s(f.raw("sampler"), "/sampler");
    s.choice("schedule", so.schedule.kind, schedule_from_string);
    s.number("eta0", so.schedule.eta0);
    s.count("horizon", so.schedule.horizon);
    s.number("gamma", so.gamma);
    s.number("max_exponent", so.max_exponent);
    s.count("exact_max_n", so.exact_max_n);
    s.finish();
    if (!(so.gamma >= 0.0 && so.gamma < 1.0)) throw ConfigError("/sampler/gamma", "must lie in [0, 1)");
    if (!(so.schedule.eta0 > 0.0)) throw ConfigError("/sampler/eta0", "must be positive");
    if (!(so.max_exponent > 0.0)) throw ConfigError("/sampler/max_exponent", "must be positive");
}

std::uint64_t parse_env_seed(const std::string& text) {
    if (text.empty() || text.size() > 20 ||
        !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; }))
        throw ConfigError(std::string("$") + kSeedEnvVar, "expected a nonnegative integer");
    try {
        return std::stoull(text);
    } catch (const std::exception&) {
        throw ConfigError(std::string("$") + kSeedEnvVar, "out of range");
    }
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    ExperimentConfig cfg;
    cfg.source = doc;
    Fields f(doc, "");
    TrainConfig& tc = cfg.train;

    if (!f.has("algorithm")) throw ConfigError("/algorithm", "required");
    f.choice("algorithm", tc.algorithm, algorithm_from_string);
    if (f.has("dataset")) parse_dataset(f.raw("dataset"), cfg.dataset);
    f.number("alpha", tc.alpha);
    if (!(tc.alpha > 0.0 && tc.alpha <= 1.0)) throw ConfigError("/alpha", "must lie in (0, 1]");
    f.count("batch_size", tc.batch_size);
    if (tc.batch_size == 0) throw ConfigError("/batch_size", "must be at least 1");
    const bool has_steps = f.has("steps");
    f.count("steps", tc.steps);
    f.count("epochs", cfg.epochs);
    if (has_steps && cfg.epochs) throw ConfigError("/epochs", "give either steps or epochs, not both");
    f.count("steps_per_epoch", tc.steps_per_epoch);
    f.number("lr", tc.optimizer.lr);
    if (!(tc.optimizer.lr >= 0.0)) throw ConfigError("/lr", "must be nonnegative");
    parse_optimizer(f, tc.optimizer);
    if (f.has("lr_decay_epochs")) {
        const json& v = f.raw("lr_decay_epochs");
        if (!v.is_array()) throw ConfigError("/lr_decay_epochs", "expected an array");
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0)
                throw ConfigError("/lr_decay_epochs/" + std::to_string(i), "expected a nonnegative integer");
            tc.lr_decay_epochs.push_back(v[i].get<std::size_t>());
        }
    }
    f.number("lr_ell", tc.lr_ell);
    f.number("ell_init", tc.ell_init);
    f.flag("clamp_ell", tc.clamp_ell);
    parse_sampler(f, tc.sampler);
    f.number("soft_tau", tc.soft_tau);
    if (tc.algorithm == Algorithm::soft_cvar && !(tc.soft_tau > 0.0))
        throw ConfigError("/soft_tau", "must be positive for soft-cvar");
    f.choice("soft_surrogate", tc.soft_surrogate, soft_surrogate_from_string);
    f.choice("ordering", tc.ordering, ordering_from_string);
    f.choice("iterate_selection", tc.selection, selection_from_string);
    f.flag("instrument_full_losses", tc.instrument_full_losses);
    f.flag("early_stopping", tc.early_stopping);
    if (f.has("loss")) {
        LossKind kind = LossKind::squared;
        f.choice("loss", kind, loss_kind_from_string);
        cfg.loss = kind;
    }
    f.number("scale_quantile", cfg.scale_quantile);
    if (!(cfg.scale_quantile > 0.0 && cfg.scale_quantile <= 1.0))
        throw ConfigError("/scale_quantile", "must lie in (0, 1]");
    f.seed("seed", cfg.seed);
    f.text("output_dir", cfg.output_dir);
    f.flag("record_steps", cfg.record_steps);
    f.finish();
    tc.seed = cfg.seed;
    return cfg;
}

ExperimentConfig resolve_config(const json& file, const std::optional<std::string>& env_seed,
                                const json& overrides) {
    if (!file.is_object()) throw ConfigError("/", "config must be a JSON object");
    json doc = file;
    if (env_seed) doc["seed"] = parse_env_seed(*env_seed);
    if (!overrides.is_null()) {
        if (!overrides.is_object()) throw ConfigError("/", "overrides must be a JSON object");
        doc.merge_patch(overrides);
    }
    return parse_config(doc);
}

std::string config_hash(const json& doc) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : doc.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Data preparation and metrics

PreparedData prepare_data(const ExperimentConfig& cfg) {
    const DatasetConfig& dc = cfg.dataset;
    PreparedData out;
    Dataset full;
    if (!dc.path.empty()) {
        const CsvSchema schema = dc.schema.empty() ? CsvSchema{} : load_schema(dc.schema);
        full = load_csv(dc.path, schema);
        out.dataset_name = std::filesystem::path(dc.path).stem().string();
    } else {
        SyntheticSpec spec;
        spec.kind = synthetic_from_string(dc.name);
        spec.n = dc.n;
        spec.d = dc.d;
        spec.noise = dc.noise;
        spec.separation = dc.separation;
        spec.seed = dc.seed.value_or(cfg.seed);
        full = gen_synthetic(spec);
        out.dataset_name = dc.name;
    }
    full.validate();

    SplitSpec ss = dc.split;
    ss.seed = cfg.seed;
    out.splits = split(full, ss);

    if (dc.shift.kind != ShiftKind::none || dc.shift.rebalance != Rebalance::none) {
        Rng rng = Rng::substream(cfg.seed, "shift");
        if (dc.shift.target != ShiftTarget::test) out.splits.train = apply_shift(out.splits.train, dc.shift, rng);
        if (dc.shift.target != ShiftTarget::train) out.splits.test = apply_shift(out.splits.test, dc.shift, rng);
    }

    if (dc.standardize) {
        Dataset* others[] = {&out.splits.val, &out.splits.test};
        out.standardization = standardize(out.splits.train, others);
    } else {
        out.standardization.mean.assign(full.cols, 0.0);
        out.standardization.scale.assign(full.cols, 1.0);
    }

    const TaskKind task = out.splits.train.task;
    if (task == TaskKind::multiclass) throw Unsupported("multiclass targets need a multiclass model");
    out.spec.kind = cfg.loss.value_or(task == TaskKind::binary ? LossKind::logistic : LossKind::squared);
    if (out.spec.kind == LossKind::logistic && task != TaskKind::binary)
        throw ConfigError("/loss", "logistic loss needs a binary target");
    out.spec.scale = calibrate_scale(out.splits.train, out.spec.kind, ModelParams::zeros(full.cols),
                                     cfg.scale_quantile);
    return out;
}

json split_metrics(const Dataset& data, const ModelParams& params, const LossSpec& spec, double alpha) {
    const std::vector<double> normalized = full_losses(data, params, spec);
    const std::vector<double> raw = raw_losses(data, params, spec.kind);
    const std::size_t k = std::max<std::size_t>(1, tail_size(alpha, data.rows));
    double mean = 0.0, raw_mean = 0.0;
    for (std::size_t i = 0; i < data.rows; ++i) {
        mean += normalized[i];
        raw_mean += raw[i];
    }
    json m;
    m["n"] = data.rows;
    m["mean_loss"] = mean / static_cast<double>(data.rows);
    m["cvar"] = tail_average(normalized, k);
    m["raw_mean_loss"] = raw_mean / static_cast<double>(data.rows);
    m["raw_cvar"] = tail_average(raw, k);
    if (data.task == TaskKind::binary) {
        std::size_t correct = 0;
        std::map<double, std::size_t> predicted, hits;
        for (std::size_t i = 0; i < data.rows; ++i) {
            const double label = predict(params, data.row(i)) >= 0.0 ? 1.0 : -1.0;
            ++predicted[label];
            if (label == data.targets[i]) {
                ++correct;
                ++hits[label];
            }
        }
        // A class that is never predicted has precision 0.
        double min_precision = 1.0;
        for (double c : {-1.0, 1.0}) {
            const double p = predicted[c] ? static_cast<double>(hits[c]) / static_cast<double>(predicted[c]) : 0.0;
            min_precision = std::min(min_precision, p);
        }
        m["accuracy"] = static_cast<double>(correct) / static_cast<double>(data.rows);
        m["min_class_precision"] = min_precision;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

json ell_summary(const RunTrace& trace, Algorithm algorithm) {
    if (algorithm != Algorithm::trunc_cvar && algorithm != Algorithm::soft_cvar) return nullptr;
    if (trace.steps.empty()) return nullptr;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
    for (const auto& s : trace.steps) {
        lo = std::min(lo, s.ell);
        hi = std::max(hi, s.ell);
        sum += s.ell;
    }
    return {{"initial", trace.steps.front().ell},
            {"final", trace.steps.back().ell},
            {"min", lo},
            {"max", hi},
            {"mean", sum / static_cast<double>(trace.steps.size())}};
}

class RecordWriter {
public:
    RecordWriter(const RecordSink& sink, const std::string& path) : sink_(sink) {
        if (path.empty()) return;
        file_.open(path, std::ios::out | std::ios::trunc);
        if (!file_) throw IoError("cannot open " + path + " for writing");
    }

    void operator()(const json& record) {
        if (sink_) sink_(record);
        if (file_.is_open()) {
            file_ << record.dump() << '\n';
            file_.flush();
            if (!file_) throw IoError("failed writing a run record");
        }
    }

private:
    const RecordSink& sink_;
    std::ofstream file_;
};

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg, const RecordSink& sink) {
    const auto started = std::chrono::steady_clock::now();
    RunOutcome out;
    out.data = prepare_data(cfg);
    const Dataset& train_set = out.data.splits.train;
    const LossSpec& spec = out.data.spec;

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    if (tc.algorithm != Algorithm::mean && tail_size(tc.alpha, train_set.rows) == 0)
        throw ConfigError("/alpha", "tail size floor(alpha N) is zero for N = " + std::to_string(train_set.rows));
    const std::size_t per_epoch =
        tc.steps_per_epoch ? tc.steps_per_epoch : (train_set.rows + tc.batch_size - 1) / tc.batch_size;
    tc.steps_per_epoch = per_epoch;
    if (cfg.epochs) tc.steps = *cfg.epochs * per_epoch;

    const json base = {{"schema_version", kRecordSchemaVersion},
                       {"config_hash", config_hash(cfg.source)},
                       {"seed", cfg.seed},
                       {"algorithm", to_string(tc.algorithm)},
                       {"dataset", out.data.dataset_name},
                       {"alpha", tc.alpha}};

    std::string stem;
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        stem = (std::filesystem::path(cfg.output_dir) /
                (out.data.dataset_name + "_" + to_string(tc.algorithm) + "_seed" + std::to_string(cfg.seed)))
                   .string();
    }
    RecordWriter emit(sink, stem.empty() ? std::string() : stem + ".jsonl");

    json last_metrics = nullptr;
    const auto metrics_at = [&](const ModelParams& p) {
        return json{{"train", split_metrics(train_set, p, spec, tc.alpha)},
                    {"val", out.data.splits.val.rows ? split_metrics(out.data.splits.val, p, spec, tc.alpha)
                                                     : json(nullptr)},
                    {"test", split_metrics(out.data.splits.test, p, spec, tc.alpha)}};
    };
    tc.epoch_hook = [&](std::size_t epoch, std::size_t step, const ModelParams& p) {
        json m = metrics_at(p);
        json rec = base;
        rec["type"] = "epoch";
        rec["epoch"] = epoch;
        rec["step"] = step;
        rec["metrics"] = m;
        emit(rec);
        EpochRecord er;
        er.metrics["train_mean_loss"] = m["train"]["mean_loss"].get<double>();
        er.metrics["train_cvar"] = m["train"]["cvar"].get<double>();
        if (!m["val"].is_null()) {
            er.metrics["val_mean_loss"] = m["val"]["mean_loss"].get<double>();
            er.metrics["val_cvar"] = m["val"]["cvar"].get<double>();
        }
        last_metrics = std::move(m);
        return er;
    };

    try {
        out.result = train(train_set, spec, tc, ModelParams::zeros(train_set.cols));
    } catch (const NumericError& e) {
        json rec = base;
        rec["type"] = "failure";
        rec["status"] = "numeric_failure";
        rec["step"] = e.step();
        rec["message"] = e.what();
        rec["metrics"] = last_metrics;
        emit(rec);
        throw;
    }

    if (cfg.record_steps) {
        for (const auto& s : out.result.trace.steps) {
            json rec = base;
            rec["type"] = "step";
            rec["step"] = s.step;
            rec["indices"] = s.indices;
            rec["q"] = s.q_at;
            rec["losses"] = s.losses;
            rec["ell"] = s.ell;
            rec["clip_events"] = s.clip_events;
            emit(rec);
        }
    }

    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json rec = base;
    rec["type"] = "final";
    rec["status"] = "ok";
    rec["steps"] = tc.steps;
    rec["batch_size"] = tc.batch_size;
    rec["iterate_selection"] = to_string(tc.selection);
    rec["metrics"] = metrics_at(out.result.params);
    rec["wall_clock_s"] = elapsed;
    rec["clip_events"] = out.result.trace.clip_events;
    rec["zero_grad_steps"] = out.result.trace.zero_grad_steps;
    rec["scale"] = spec.scale;
    rec["ell_summary"] = ell_summary(out.result.trace, tc.algorithm);
    emit(rec);
    out.final_record = rec;

    if (!stem.empty()) {
        std::ofstream model(stem + ".model.json");
        model << model_to_json(out.result.params, spec, out.data.standardization, train_set.feature_names).dump(2)
              << '\n';
        if (!model) throw IoError("failed writing " + stem + ".model.json");
    }
    return out;
}

json model_to_json(const ModelParams& params, const LossSpec& spec, const Standardization& st,
                   const std::vector<std::string>& feature_names) {
    return {{"schema_version", kRecordSchemaVersion},
            {"model", "linear"},
            {"loss", to_string(spec.kind)},
            {"scale", spec.scale},
            {"theta", params.theta},
            {"bias", params.bias},
            {"feature_names", feature_names},
            {"standardization", {{"mean", st.mean}, {"scale", st.scale}}}};
}

json evaluate_model(const json& model, const Dataset& raw_data, const std::vector<double>& alphas) {
    ModelParams params;
    LossSpec spec;
    Standardization st;
    try {
        params.theta = model.at("theta").get<std::vector<double>>();
        params.bias = model.at("bias").get<double>();
        const std::string loss = model.at("loss").get<std::string>();
        spec.kind = loss == "logistic" ? LossKind::logistic : LossKind::squared;
        spec.scale = model.at("scale").get<double>();
        st.mean = model.at("standardization").at("mean").get<std::vector<double>>();
        st.scale = model.at("standardization").at("scale").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed model file: ") + e.what());
    }
    if (raw_data.cols != params.dim() || st.mean.size() != params.dim() || st.scale.size() != params.dim())
        throw InvalidInput("model and dataset have different feature counts");
    if (alphas.empty()) throw InvalidInput("no alpha levels given");

    Dataset data = raw_data;
    for (std::size_t i = 0; i < data.rows; ++i)
        for (std::size_t j = 0; j < data.cols; ++j)
            data.features[i * data.cols + j] = (data.features[i * data.cols + j] - st.mean[j]) / st.scale[j];

    const std::vector<double> normalized = full_losses(data, params, spec);
    const std::vector<double> raw = raw_losses(data, params, spec.kind);
    json m = split_metrics(data, params, spec, 1.0);
    m.erase("cvar");
    m.erase("raw_cvar");
    json levels = json::array();
    for (double a : alphas) {
        const RiskLevel level = RiskLevel::for_size(a, data.rows);
        levels.push_back({{"alpha", a}, {"cvar", tail_average(normalized, level.k())},
                          {"raw_cvar", tail_average(raw, level.k())}});
    }
    m["cvar"] = levels;
    return m;
}

// ---------------------------------------------------------------------------
// Benchmarks

LossModel loss_model_from_string(const std::string& name) {
    if (name == "constant") return LossModel::constant;
    if (name == "topk" || name == "top-k") return LossModel::top_k;
    if (name == "switching-topk" || name == "switching-top-k") return LossModel::switching_top_k;
    throw InvalidInput("unknown loss model '" + name + "'");
}

const char* to_string(LossModel m) {
    switch (m) {
        case LossModel::constant: return "constant";
        case LossModel::top_k: return "topk";
        case LossModel::switching_top_k: return "switching-topk";
    }
    return "unknown";
}

namespace {

double median(std::vector<double> v) {
    if (v.empty()) throw InvalidInput("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
    return p;
}

}  // namespace

double sampler_regret_run(const RegretBenchSpec& spec, std::size_t horizon, std::uint64_t seed) {
    if (spec.k == 0 || spec.k > spec.n) throw InvalidInput("regret bench needs 1 <= k <= N");
    const RiskLevel level = RiskLevel::for_size(static_cast<double>(spec.k) / static_cast<double>(spec.n), spec.n);
    if (level.k() != spec.k) throw InvalidInput("tail size does not reproduce k");
    if (horizon == 0) return 0.0;

    SamplerOptions so = spec.sampler;
    if (so.schedule.kind == ScheduleKind::fixed_horizon) so.schedule.horizon = horizon;
    Sampler sampler(spec.n, level, so);
    RegretAccumulator acc(spec.n, spec.k);
    Rng draws = Rng::substream(seed, "draws");
    Rng samples = Rng::substream(seed, "samples");
    Rng coef = Rng::substream(seed, "coefficients");

    const std::vector<std::size_t> perm = permutation(spec.n, coef);
    std::vector<char> first(spec.n, 0), second(spec.n, 0);
    for (std::size_t j = 0; j < spec.k; ++j) {
        first[perm[j]] = 1;
        second[perm[(spec.n - spec.k + j) % spec.n]] = 1;
    }

    std::vector<double> losses(spec.n, 0.5);
    for (std::size_t t = 0; t < horizon; ++t) {
        if (spec.model != LossModel::constant) {
            const bool late = spec.model == LossModel::switching_top_k && 2 * t >= horizon;
            const std::vector<char>& hot = late ? second : first;
            for (std::size_t i = 0; i < spec.n; ++i)
                losses[i] = samples.uniform() < (hot[i] ? spec.p_high : spec.p_low) ? 1.0 : 0.0;
        }
        const std::vector<double>& q = sampler.distribution().q;
        acc.add(losses, q);
        const std::size_t i = sampler.draw(draws.uniform());
        sampler.update(LossEstimate{i, losses[i], q[i]});
    }
    return acc.regret();
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("slope needs at least two aligned points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw InvalidInput("log-log slope needs positive values");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw InvalidInput("slope needs distinct x values");
    return sxy / sxx;
}

RegretBenchResult run_regret_bench(const RegretBenchSpec& spec) {
    if (spec.seeds == 0) throw InvalidInput("regret bench needs at least one seed");
    RegretBenchResult out;
    for (std::size_t horizon : spec.horizons) {
        if (horizon == 0) continue;
        RegretBenchRow row{horizon, 0.0, {}};
        for (std::size_t s = 0; s < spec.seeds; ++s)
            row.per_seed.push_back(sampler_regret_run(spec, horizon, spec.first_seed + s));
        row.median = median(row.per_seed);
        out.rows.push_back(std::move(row));
    }
    std::vector<double> xs, ys;
    for (const auto& r : out.rows) {
        if (r.median <= 0.0) continue;
        xs.push_back(static_cast<double>(r.horizon));
        ys.push_back(r.median);
    }
    if (xs.size() >= 2 && xs.size() == out.rows.size()) out.slope = loglog_slope(xs, ys);
    return out;
}

std::vector<MarginalsBenchRow> run_marginals_bench(const MarginalsBenchSpec& spec) {
    if (spec.seeds == 0) throw InvalidInput("marginals bench needs at least one seed");
    std::vector<MarginalsBenchRow> out;
    for (std::size_t n : spec.sizes) {
        if (n > kMaxExactBenchSize)
            throw InvalidInput("exact marginals are only benchmarked up to N = " + std::to_string(kMaxExactBenchSize));
        const std::size_t k = spec.k.value_or(tail_size(spec.alpha, n));
        if (k == 0 || k > n) throw InvalidInput("marginals bench needs 1 <= k <= N (N = " + std::to_string(n) + ")");
        std::vector<double> tvs;
        for (std::size_t s = 0; s < spec.seeds; ++s) {
            Rng rng = Rng::substream(spec.first_seed + s, "samples");
            std::vector<double> lw(n);
            for (double& v : lw) v = spec.log_weight_sd * rng.normal();
            const LogWeightVector w(lw);
            if (k == n) {
                tvs.push_back(0.0);
                continue;
            }
            tvs.push_back(tv_distance(exact_marginals(w, k), approx_marginals(w, k)));
        }
        out.push_back({n, k, median(tvs), *std::max_element(tvs.begin(), tvs.end())});
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON front-ends

namespace {

std::vector<std::size_t> count_list(Fields& f, const std::string& key) {
    const json& v = f.raw(key);
    if (!v.is_array()) throw ConfigError(f.at(key), "expected an array");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number_integer() || v[i].get<std::int64_t>() < 0)
            throw ConfigError(f.at(key) + "/" + std::to_string(i), "expected a nonnegative integer");
        out.push_back(v[i].get<std::size_t>());
    }
    return out;
}

}  // namespace

RegretBenchSpec parse_regret_bench_spec(const json& doc) {
    RegretBenchSpec spec;
    spec.sampler.schedule.kind = ScheduleKind::fixed_horizon;
    Fields f(doc, "");
    f.count("n", spec.n);
    f.count("k", spec.k);
    if (f.has("horizons")) spec.horizons = count_list(f, "horizons");
    f.choice("model", spec.model, loss_model_from_string);
    f.count("seeds", spec.seeds);
    f.seed("first_seed", spec.first_seed);
    f.choice("schedule", spec.sampler.schedule.kind, schedule_from_string);
    f.number("eta0", spec.sampler.schedule.eta0);
    f.number("gamma", spec.sampler.gamma);
    f.number("p_high", spec.p_high);
    f.number("p_low", spec.p_low);
    f.finish();
    if (spec.k == 0 || spec.k > spec.n) throw ConfigError("/k", "must satisfy 1 <= k <= n");
    if (spec.seeds == 0) throw ConfigError("/seeds", "must be at least 1");
    if (!(spec.sampler.gamma >= 0.0 && spec.sampler.gamma < 1.0)) throw ConfigError("/gamma", "must lie in [0, 1)");
    for (const char* key : {"p_high", "p_low"}) {
        const double p = std::string(key) == "p_high" ? spec.p_high : spec.p_low;
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string("/") + key, "must lie in [0, 1]");
    }
    return spec;
}

MarginalsBenchSpec parse_marginals_bench_spec(const json& doc) {
    MarginalsBenchSpec spec;
    Fields f(doc, "");
    if (f.has("sizes")) spec.sizes = count_list(f, "sizes");
    f.count("k", spec.k);
    f.number("alpha", spec.alpha);
    f.number("log_weight_sd", spec.log_weight_sd);
    f.count("seeds", spec.seeds);
    f.seed("first_seed", spec.first_seed);
    f.finish();
    if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw ConfigError("/alpha", "must lie in (0, 1]");
    if (spec.seeds == 0) throw ConfigError("/seeds", "must be at least 1");
    return spec;
}

SyntheticSpec parse_synthetic_spec(const json& doc) {
    SyntheticSpec spec;
    Fields f(doc, "");
    f.choice("name", spec.kind, synthetic_from_string);
    f.count("n", spec.n);
    f.count("d", spec.d);
    f.number("noise", spec.noise);
    f.number("separation", spec.separation);
    f.seed("seed", spec.seed);
    f.finish();
    return spec;
}

json to_json(const RegretBenchResult& result) {
    json rows = json::array();
    for (const auto& r : result.rows)
        rows.push_back({{"horizon", r.horizon}, {"median_regret", r.median}, {"per_seed", r.per_seed}});
    return {{"rows", rows}, {"slope", result.slope ? json(*result.slope) : json(nullptr)}};
}

json to_json(const std::vector<MarginalsBenchRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"n", r.n}, {"k", r.k}, {"median_tv", r.median_tv}, {"max_tv", r.max_tv}});
    return {{"rows", out}};
}

}  // namespace adacvar

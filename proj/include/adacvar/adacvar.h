/*
 * C interface to the adacvar library.
 *
 * Every function returns an adacvar_status. On failure the message of the
 * most recent error on the calling thread is available from
 * adacvar_last_error(). Strings returned through char** out-parameters are
 * owned by the caller and released with adacvar_string_free().
 */
#ifndef ADACVAR_ADACVAR_H
#define ADACVAR_ADACVAR_H

#include <stddef.h>
#include <stdint.h>

#if defined(ADACVAR_BUILDING_LIBRARY)
#define ADACVAR_API __attribute__((visibility("default")))
#else
#define ADACVAR_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum adacvar_status {
    ADACVAR_OK = 0,
    ADACVAR_ERR_INVALID_INPUT = 1,
    ADACVAR_ERR_INFEASIBLE = 2,
    ADACVAR_ERR_EMPTY_DISTRIBUTION = 3,
    ADACVAR_ERR_CONFIG = 4,
    ADACVAR_ERR_NUMERIC = 5,
    ADACVAR_ERR_PARSE = 6,
    ADACVAR_ERR_UNSUPPORTED = 7,
    ADACVAR_ERR_IO = 8,
    ADACVAR_ERR_INTERNAL = 9
} adacvar_status;

ADACVAR_API const char* adacvar_version(void);
ADACVAR_API const char* adacvar_status_string(adacvar_status status);
/* Message of the last failure on this thread; empty after a success. */
ADACVAR_API const char* adacvar_last_error(void);
ADACVAR_API void adacvar_string_free(char* s);

/* ---- Risk measures on plain arrays ------------------------------------ */

/* k = floor(alpha * n). */
ADACVAR_API adacvar_status adacvar_tail_size(double alpha, size_t n, size_t* k);
/* Losses must lie in [0, 1]. */
ADACVAR_API adacvar_status adacvar_cvar(const double* losses, size_t n, double alpha, double* out);
ADACVAR_API adacvar_status adacvar_var(const double* losses, size_t n, double alpha, double* out);
ADACVAR_API adacvar_status adacvar_rockafellar(const double* losses, size_t n, double alpha, double ell,
                                               double* out);

/* ---- Diagonal k-DPP marginals ----------------------------------------- */

/* `log_w` holds n natural-log weights (-INFINITY for a zero weight); `out` receives n marginals. */
ADACVAR_API adacvar_status adacvar_exact_marginals(const double* log_w, size_t n, size_t k, double* out);
/* `nu` may be NULL. */
ADACVAR_API adacvar_status adacvar_approx_marginals(const double* log_w, size_t n, size_t k, double* out,
                                                    double* nu);

/* ---- Sampler ---------------------------------------------------------- */

typedef struct adacvar_sampler adacvar_sampler;

typedef enum adacvar_schedule {
    ADACVAR_SCHEDULE_CONSTANT = 0,
    ADACVAR_SCHEDULE_FIXED_HORIZON = 1,
    ADACVAR_SCHEDULE_INVERSE_SQRT = 2,
    ADACVAR_SCHEDULE_ADAPTIVE = 3
} adacvar_schedule;

typedef struct adacvar_sampler_options {
    adacvar_schedule schedule;
    double eta0;
    size_t horizon; /* 0: unset */
    double gamma;
    double max_exponent;
    size_t exact_max_n;
} adacvar_sampler_options;

ADACVAR_API void adacvar_sampler_options_default(adacvar_sampler_options* options);
/* `options` may be NULL for the defaults. */
ADACVAR_API adacvar_status adacvar_sampler_create(size_t n, size_t k, const adacvar_sampler_options* options,
                                                  adacvar_sampler** out);
ADACVAR_API void adacvar_sampler_destroy(adacvar_sampler* sampler);
/* Copies q_t into `q` (length n). */
ADACVAR_API adacvar_status adacvar_sampler_distribution(adacvar_sampler* sampler, double* q, size_t n);
ADACVAR_API adacvar_status adacvar_sampler_draw(adacvar_sampler* sampler, double u, size_t* index);
/* One update step from `count` importance-weighted observations. */
ADACVAR_API adacvar_status adacvar_sampler_update(adacvar_sampler* sampler, const size_t* indices,
                                                  const double* losses, const double* q_at, size_t count);
ADACVAR_API adacvar_status adacvar_sampler_log_weights(const adacvar_sampler* sampler, double* out, size_t n);
ADACVAR_API adacvar_status adacvar_sampler_stats(const adacvar_sampler* sampler, size_t* step,
                                                 size_t* clip_events);

/* ---- Sum tree --------------------------------------------------------- */

typedef struct adacvar_sumtree adacvar_sumtree;

ADACVAR_API adacvar_status adacvar_sumtree_create(const double* weights, size_t n, adacvar_sumtree** out);
ADACVAR_API void adacvar_sumtree_destroy(adacvar_sumtree* tree);
ADACVAR_API adacvar_status adacvar_sumtree_update(adacvar_sumtree* tree, size_t index, double weight);
ADACVAR_API adacvar_status adacvar_sumtree_sample(const adacvar_sumtree* tree, double u, size_t* index);
ADACVAR_API adacvar_status adacvar_sumtree_total(const adacvar_sumtree* tree, double* total);

/* ---- Experiments (JSON in, JSON out) ---------------------------------- */

/* Receives each run record as one line of JSON. */
typedef void (*adacvar_record_fn)(const char* record_json, void* user);

/*
 * Runs a training experiment. `env_seed` (may be NULL) overrides the config
 * seed; `overrides_json` (may be NULL) is merged on top. The final record is
 * returned through `final_json` (may be NULL).
 */
ADACVAR_API adacvar_status adacvar_train(const char* config_json, const char* env_seed,
                                         const char* overrides_json, adacvar_record_fn on_record, void* user,
                                         char** final_json);
ADACVAR_API adacvar_status adacvar_evaluate(const char* model_path, const char* data_path, const char* schema_path,
                                            const double* alphas, size_t n_alphas, char** out_json);
ADACVAR_API adacvar_status adacvar_regret_bench(const char* spec_json, char** out_json);
ADACVAR_API adacvar_status adacvar_marginals_bench(const char* spec_json, char** out_json);
ADACVAR_API adacvar_status adacvar_gen_data(const char* spec_json, const char* csv_path);
/* `tidy_csv` may be NULL. `options_json` may be NULL. */
ADACVAR_API adacvar_status adacvar_summarize(const char* const* patterns, size_t n_patterns,
                                             const char* options_json, char** summary_json, char** tidy_csv);

#ifdef __cplusplus
}
#endif

#endif /* ADACVAR_ADACVAR_H */

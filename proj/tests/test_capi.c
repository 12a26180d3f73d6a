#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "adacvar/adacvar.h"

static int failures = 0;

#define EXPECT(cond)                                                        \
    do {                                                                    \
        if (!(cond)) {                                                      \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                     \
        }                                                                   \
    } while (0)

static void count_records(const char* record, void* user) {
    (void)record;
    ++*(int*)user;
}

static void risk(void) {
    const double losses[4] = {0.1, 0.4, 0.9, 0.2};
    size_t k = 0;
    double v = 0;
    EXPECT(adacvar_tail_size(0.5, 4, &k) == ADACVAR_OK && k == 2);
    EXPECT(adacvar_cvar(losses, 4, 0.5, &v) == ADACVAR_OK && fabs(v - 0.65) < 1e-15);
    EXPECT(adacvar_var(losses, 4, 0.5, &v) == ADACVAR_OK && v == 0.4);
    EXPECT(adacvar_rockafellar(losses, 4, 0.5, 0.4, &v) == ADACVAR_OK && fabs(v - 0.65) < 1e-15);

    EXPECT(adacvar_cvar(losses, 4, 0.1, &v) == ADACVAR_ERR_INVALID_INPUT);
    EXPECT(strlen(adacvar_last_error()) > 0);
    EXPECT(adacvar_cvar(NULL, 4, 0.5, &v) == ADACVAR_ERR_INVALID_INPUT);
    EXPECT(adacvar_tail_size(0.5, 4, &k) == ADACVAR_OK);
    EXPECT(strlen(adacvar_last_error()) == 0);
}

static void marginals(void) {
    const double lw[3] = {0.0, log(2.0), log(3.0)};
    double p[3], q[3], nu = 0;
    EXPECT(adacvar_exact_marginals(lw, 3, 2, p) == ADACVAR_OK);
    EXPECT(fabs(p[0] - 5.0 / 11) < 1e-14 && fabs(p[2] - 9.0 / 11) < 1e-14);
    EXPECT(adacvar_approx_marginals(lw, 3, 2, q, &nu) == ADACVAR_OK);
    EXPECT(fabs(q[0] + q[1] + q[2] - 2.0) < 1e-12);
    EXPECT(adacvar_approx_marginals(lw, 3, 3, q, NULL) == ADACVAR_ERR_INFEASIBLE);
    EXPECT(adacvar_exact_marginals(lw, 3, 4, p) == ADACVAR_ERR_INVALID_INPUT);
}

static void sampler(void) {
    adacvar_sampler_options o;
    adacvar_sampler_options_default(&o);
    o.schedule = ADACVAR_SCHEDULE_CONSTANT;
    o.eta0 = 0.1;
    adacvar_sampler* s = NULL;
    EXPECT(adacvar_sampler_create(4, 2, &o, &s) == ADACVAR_OK && s != NULL);
    double q[4];
    EXPECT(adacvar_sampler_distribution(s, q, 4) == ADACVAR_OK && fabs(q[0] - 0.25) < 1e-14);
    size_t i = 99;
    EXPECT(adacvar_sampler_draw(s, 0.9, &i) == ADACVAR_OK && i == 3);
    const size_t idx[1] = {1};
    const double loss[1] = {0.5}, qa[1] = {0.25};
    EXPECT(adacvar_sampler_update(s, idx, loss, qa, 1) == ADACVAR_OK);
    double lw[4];
    EXPECT(adacvar_sampler_log_weights(s, lw, 4) == ADACVAR_OK && fabs(lw[1] - 0.2) < 1e-15 && lw[0] == 0.0);
    size_t step = 0, clips = 9;
    EXPECT(adacvar_sampler_stats(s, &step, &clips) == ADACVAR_OK && step == 2 && clips == 0);
    EXPECT(adacvar_sampler_distribution(s, q, 3) == ADACVAR_ERR_INVALID_INPUT);
    EXPECT(adacvar_sampler_draw(s, 1.0, &i) == ADACVAR_ERR_INVALID_INPUT);
    adacvar_sampler_destroy(s);
    adacvar_sampler_destroy(NULL);

    o.gamma = 1.0;
    s = NULL;
    EXPECT(adacvar_sampler_create(4, 2, &o, &s) == ADACVAR_ERR_CONFIG && s == NULL);
    EXPECT(adacvar_sampler_create(4, 5, NULL, &s) == ADACVAR_ERR_INVALID_INPUT);
}

static void sumtree(void) {
    const double w[4] = {1, 0, 2, 1};
    adacvar_sumtree* t = NULL;
    EXPECT(adacvar_sumtree_create(w, 4, &t) == ADACVAR_OK);
    double total = 0;
    size_t i = 9;
    EXPECT(adacvar_sumtree_total(t, &total) == ADACVAR_OK && total == 4.0);
    EXPECT(adacvar_sumtree_sample(t, 0.3, &i) == ADACVAR_OK && i == 2);
    EXPECT(adacvar_sumtree_update(t, 2, 0.0) == ADACVAR_OK);
    EXPECT(adacvar_sumtree_sample(t, 0.6, &i) == ADACVAR_OK && i == 3);
    EXPECT(adacvar_sumtree_update(t, 0, 0.0) == ADACVAR_OK);
    EXPECT(adacvar_sumtree_update(t, 3, 0.0) == ADACVAR_OK);
    EXPECT(adacvar_sumtree_sample(t, 0.5, &i) == ADACVAR_ERR_EMPTY_DISTRIBUTION);
    EXPECT(adacvar_sumtree_update(t, 7, 1.0) == ADACVAR_ERR_INVALID_INPUT);
    adacvar_sumtree_destroy(t);
}

static void experiments(void) {
    const char* cfg =
        "{\"algorithm\":\"ada-cvar\",\"dataset\":{\"name\":\"normal\",\"n\":200,\"d\":3},"
        "\"alpha\":0.2,\"batch_size\":8,\"epochs\":2,\"lr\":0.05,\"seed\":3}";
    int records = 0;
    char* final_json = NULL;
    EXPECT(adacvar_train(cfg, "5", "{\"lr\":0.02}", count_records, &records, &final_json) == ADACVAR_OK);
    EXPECT(records == 3);
    EXPECT(final_json != NULL && strstr(final_json, "\"seed\":5") != NULL);
    adacvar_string_free(final_json);

    EXPECT(adacvar_train(cfg, NULL, "{\"alpha\":0}", NULL, NULL, NULL) == ADACVAR_ERR_CONFIG);
    EXPECT(strstr(adacvar_last_error(), "/alpha") != NULL);
    EXPECT(adacvar_train("{not json", NULL, NULL, NULL, NULL, NULL) == ADACVAR_ERR_CONFIG);
    EXPECT(adacvar_train(cfg, NULL, "{\"algorithm\":\"trunc-cvar\",\"lr_ell\":1e308,\"ell_init\":-1e308}", NULL,
                         NULL, NULL) == ADACVAR_ERR_NUMERIC);

    char* out = NULL;
    EXPECT(adacvar_marginals_bench("{\"sizes\":[20],\"seeds\":2}", &out) == ADACVAR_OK && out != NULL);
    adacvar_string_free(out);
    out = NULL;
    EXPECT(adacvar_regret_bench("{\"n\":10,\"k\":2,\"horizons\":[100],\"seeds\":2}", &out) == ADACVAR_OK);
    EXPECT(out != NULL && strstr(out, "rows") != NULL);
    adacvar_string_free(out);
    EXPECT(adacvar_regret_bench("{\"n\":10,\"k\":2,\"bogus\":1}", &out) == ADACVAR_ERR_CONFIG);
    const double alpha = 0.1;
    EXPECT(adacvar_evaluate("/nonexistent/model.json", "/nonexistent/data.csv", NULL, &alpha, 1, &out) ==
           ADACVAR_ERR_IO);
    EXPECT(adacvar_evaluate("/nonexistent/model.json", "/nonexistent/data.csv", NULL, NULL, 0, &out) ==
           ADACVAR_ERR_INVALID_INPUT);
}

int main(void) {
    EXPECT(strlen(adacvar_version()) > 0);
    EXPECT(strcmp(adacvar_status_string(ADACVAR_OK), adacvar_status_string(ADACVAR_ERR_CONFIG)) != 0);
    risk();
    marginals();
    sampler();
    sumtree();
    experiments();
    if (failures) {
        fprintf(stderr, "%d check(s) failed\n", failures);
        return 1;
    }
    puts("all C API checks passed");
    return 0;
}

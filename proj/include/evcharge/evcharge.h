/* SPDX-License-Identifier: Apache-2.0 */
/* C interface to the evcharge library. Every function returns an evc_status; on failure
 * evc_last_error() describes the problem for the calling thread. Handles are opaque and owned
 * by the caller, who releases them with the matching *_free function. Strings returned through
 * `char**` are released with evc_string_free. */
#ifndef EVCHARGE_H
#define EVCHARGE_H

#include <stddef.h>
#include <stdint.h>

#if defined(EVC_BUILDING_LIBRARY)
#define EVC_API __attribute__((visibility("default")))
#else
#define EVC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum evc_status {
    EVC_OK = 0,
    EVC_ERR_INVALID_INPUT = 1, /* config, data or argument rejected */
    EVC_ERR_DOMAIN = 2,        /* numeric precondition violated */
    EVC_ERR_INFEASIBLE = 3,
    EVC_ERR_SOLVER = 4,
    EVC_ERR_INVARIANT = 5,
    EVC_ERR_IO = 6,
    EVC_ERR_INTERNAL = 7
} evc_status;

typedef struct evc_config evc_config;
typedef struct evc_run evc_run;

typedef struct evc_summary {
    double demand_charge;
    double tou;
    double revenue;
    double cost;
    double profit;
    double mean_peak_kw;
    double simulation_rmse_kw; /* -1 when no forecast was scored */
    double training_rmse_kw;   /* -1 unless the run used a trained forecaster */
    int cycles;
    int arrivals;
    int rejected;
    int invariant_violations;
    int forecast_clip_violations;
} evc_summary;

EVC_API const char* evc_version(void);
/* Message for the last failed call on this thread; empty after a success. */
EVC_API const char* evc_last_error(void);
EVC_API const char* evc_status_name(evc_status s);
EVC_API void evc_string_free(char* s);

/* ---- configuration ---- */
EVC_API evc_status evc_config_default(evc_config** out);
EVC_API evc_status evc_config_load(const char* path, evc_config** out);
EVC_API evc_status evc_config_parse(const char* yaml_text, evc_config** out);
EVC_API void evc_config_free(evc_config* cfg);
/* Dotted key and YAML value, e.g. ("controller.mode", "mpc") or ("run.months", "[6, 7]"). */
EVC_API evc_status evc_config_set(evc_config* cfg, const char* key, const char* value);
/* Keeps the first `n` configured months. */
EVC_API evc_status evc_config_limit_months(evc_config* cfg, int n);
EVC_API evc_status evc_config_dump(const evc_config* cfg, char** yaml_out);
/* Output directory from the config (paths.out), resolved. */
EVC_API evc_status evc_config_out_dir(const evc_config* cfg, char** path_out);
EVC_API evc_status evc_config_apply_logging(const evc_config* cfg);

/* ---- workflows ---- */
EVC_API evc_status evc_simulate(const evc_config* cfg, evc_run** out);
EVC_API void evc_run_free(evc_run* run);
EVC_API evc_status evc_run_summary(const evc_run* run, evc_summary* out);
EVC_API evc_status evc_run_label(const evc_run* run, char** label_out);
/* summary.json, cycles.csv, audit.csv, load_trace.csv */
EVC_API evc_status evc_run_write(const evc_run* run, const evc_config* cfg, const char* dir);

/* Trains the linear forecaster on baseline runs and writes the model file. */
EVC_API evc_status evc_train_forecaster(const evc_config* cfg, const char* model_path, double* training_rmse_out);
/* MPC runs per available forecaster; the RMSE table goes to `table_out`. Runs are written
 * under `out_dir`/<forecaster> when `out_dir` is not NULL. */
EVC_API evc_status evc_eval_forecasters(const evc_config* cfg, const char* out_dir, char** table_out);
/* Synthetic sessions for the configured months as CSV. */
EVC_API evc_status evc_generate_data(const evc_config* cfg, const char* csv_path, size_t* n_sessions_out);
/* Comparison tables from saved run directories. */
EVC_API evc_status evc_report(const char* const* run_dirs, size_t n_dirs, char** cost_table_out,
                              char** rmse_table_out);

#ifdef __cplusplus
}
#endif

#endif

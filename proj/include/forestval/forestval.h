/*
 * (C) Copyright 2026 forestval developers
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */
#ifndef FORESTVAL_H
#define FORESTVAL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define FV_API __declspec(dllexport)
#else
#define FV_API __attribute__((visibility("default")))
#endif

/* Status codes; 1..3 double as CLI exit statuses. */
typedef enum fv_status {
  FV_OK = 0,
  FV_ERR_USAGE = 1,
  FV_ERR_DATA = 2,
  FV_ERR_NUMERICAL = 3,
  FV_ERR_INTERNAL = 4
} fv_status;

typedef struct fv_config fv_config;
typedef struct fv_stack fv_stack;
typedef struct fv_results fv_results;

/* Message of the last failed call on this thread; "" if none. */
FV_API const char* fv_last_error(void);
FV_API const char* fv_version(void);

/* Configuration */
FV_API fv_status fv_config_default(fv_config** out);
FV_API fv_status fv_config_load(const char* path, fv_config** out);
FV_API void fv_config_free(fv_config* cfg);
FV_API fv_status fv_config_apply_scale(fv_config* cfg, double scale);
FV_API fv_status fv_config_set_seed(fv_config* cfg, uint64_t seed);
FV_API fv_status fv_config_set_threads(fv_config* cfg, int threads);
/* Replaces the amenity flow by the configured carbon amenity. */
FV_API fv_status fv_config_use_carbon(fv_config* cfg);
/* Collapses the kappa and mu segments of the box to the reference point. */
FV_API fv_status fv_config_use_intensity_only(fv_config* cfg);
/* "paper" or "grace-consistent". */
FV_API fv_status fv_config_set_convention(fv_config* cfg, const char* name);
FV_API fv_status fv_config_set_stopping_paths(fv_config* cfg, size_t paths);
FV_API fv_status fv_config_hash(const fv_config* cfg, uint64_t* out);
FV_API fv_status fv_config_save(const fv_config* cfg, const char* path);
FV_API fv_status fv_config_grid(const fv_config* cfg, double* horizon, int* steps);
/* Copies up to `capacity` configured boundary ages; *count gets the total. */
FV_API fv_status fv_config_boundary_times(const fv_config* cfg, double* times, size_t capacity,
                                          size_t* count);

/* Futures estimation: reads the panel CSV, writes the estimate table. */
typedef struct fv_estimation_summary {
  double loglik;
  double gradient_norm;
  int iterations;
  int converged; /* 0 when the optimizer stopped early; the table is still written */
  int hessian_ok;
} fv_estimation_summary;

FV_API fv_status fv_estimate_futures(const fv_config* cfg, const char* panel_csv, int fix_mu,
                                     const char* out_csv, fv_estimation_summary* summary);

typedef struct fv_intensity_summary {
  double lambda;
  double se;
  double ci_lo;
  double ci_hi;
  int64_t events;
  double years;
  int zero_events;
} fv_intensity_summary;

FV_API fv_status fv_estimate_intensity(const fv_config* cfg, const char* counts_csv,
                                       const char* out_csv, fv_intensity_summary* summary);

/* Backward solver. scenario: "conservative", "none" or "optimistic". */
FV_API fv_status fv_solve(const fv_config* cfg, const char* scenario, fv_stack** out);
FV_API void fv_stack_free(fv_stack* stack);
FV_API fv_status fv_stack_save(const fv_stack* stack, const char* path);
/* Fails with FV_ERR_DATA if the file was written under a different config. */
FV_API fv_status fv_stack_load(const fv_config* cfg, const char* path, fv_stack** out);
FV_API fv_status fv_stack_value(const fv_stack* stack, int time_index, double delta, double price,
                                double* value);
FV_API fv_status fv_stack_is_stop(const fv_stack* stack, int time_index, double delta,
                                  double price, int* stop);
/* One boundary CSV per time, named boundary_<t>_<scenario>.csv in out_dir. */
FV_API fv_status fv_stack_write_boundaries(const fv_config* cfg, const fv_stack* stack,
                                           const char* scenario, const double* times,
                                           size_t n_times, const char* out_dir);

/* Full pipeline. scenarios: comma-separated names or "all". */
FV_API fv_status fv_run_scenarios(const fv_config* cfg, const char* scenarios, fv_results** out);
FV_API void fv_results_free(fv_results* res);
FV_API size_t fv_results_count(const fv_results* res);

typedef struct fv_scenario_summary {
  char scenario[16];
  double mean_tau;
  double std_tau;
  size_t stopping_paths;
  double mean;
  double std;
  double ci_lo;
  double ci_hi;
  double div; /* NaN unless "none" was run */
  int runs;
  size_t paths_per_run;
  uint64_t mean_fallbacks;
  uint64_t ridge_fits;
  uint64_t floor_events;
} fv_scenario_summary;

FV_API fv_status fv_results_get(const fv_results* res, size_t index, fv_scenario_summary* out);
/* stopping_times.csv, valuation.csv, report.csv, harvest_summary.csv and the
   boundary files. */
FV_API fv_status fv_results_write(const fv_results* res, const char* out_dir);

/* Writes n_paths market-measure paths, every `stride`-th grid node. */
FV_API fv_status fv_simulate(const fv_config* cfg, size_t n_paths, int stride,
                             const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* FORESTVAL_H */

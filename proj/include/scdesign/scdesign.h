#ifndef SCDESIGN_H
#define SCDESIGN_H

/* C interface to the synthetic control design library.
 *
 * Every fallible call returns an scd_status; on failure a description of the
 * most recent error on the calling thread is available from scd_last_error().
 * Objects are opaque and released with the matching *_free function, which
 * accepts NULL. Unit and period indices are 0-based.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(SCD_BUILDING_LIBRARY)
#define SCD_API __attribute__((visibility("default")))
#else
#define SCD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scd_status {
    SCD_OK = 0,
    SCD_ERR_MALFORMED_FILE = 1,
    SCD_ERR_DUPLICATE_UNIT = 2,
    SCD_ERR_NONPOSITIVE_WEIGHT = 3,
    SCD_ERR_MISSING_PRE_PERIOD_VALUE = 4,
    SCD_ERR_EMPTY_FITTING_SET = 5,
    SCD_ERR_INVALID_FITTING_COUNT = 6,
    SCD_ERR_INVALID_ARGUMENT = 7,
    SCD_ERR_DIMENSION_MISMATCH = 8,
    SCD_ERR_ENUMERATION_CAP_EXCEEDED = 9,
    SCD_ERR_INFEASIBLE_BUDGET = 10,
    SCD_ERR_EMPTY_DONOR_POOL = 11,
    SCD_ERR_INFEASIBLE_DESIGN = 12,
    SCD_ERR_EMPTY_CLUSTER_AFTER_CONVERGENCE = 13,
    SCD_ERR_MISSING_OUTCOME = 14,
    SCD_ERR_MISSING_UNIT_LEVEL_WEIGHTS = 15,
    SCD_ERR_FORM_MISMATCH = 16,
    SCD_ERR_SINGULAR_REGRESSION = 17,
    SCD_ERR_LENGTH_MISMATCH = 18,
    SCD_ERR_NO_BLANK_PERIODS = 19,
    SCD_ERR_COMBINATION_CAP_EXCEEDED = 20,
    SCD_ERR_SAMPLE_LARGER_THAN_POPULATION = 21,
    SCD_ERR_CONFIG = 22,
    SCD_ERR_MISSING_UPSTREAM_ARTIFACT = 23,
    SCD_ERR_IO = 24,
    SCD_ERR_INTERNAL = 25
} scd_status;

SCD_API const char* scd_version(void);
SCD_API const char* scd_status_name(scd_status status);
SCD_API const char* scd_last_error(void);

/* Panels */

typedef struct scd_panel scd_panel;

/* Long-form `unit,period,value` outcomes and wide `unit,<covariates...>`
 * covariates; `weights` (`unit,f`) may be NULL for equal weights. */
SCD_API scd_status scd_panel_load(const char* outcomes, const char* covariates, const char* weights, int T0,
                                  scd_panel** out);
SCD_API void scd_panel_free(scd_panel* panel);
SCD_API int scd_panel_units(const scd_panel* panel);
SCD_API int scd_panel_periods(const scd_panel* panel);
SCD_API int scd_panel_pre_periods(const scd_panel* panel);
SCD_API const char* scd_panel_unit_id(const scd_panel* panel, int unit);
SCD_API scd_status scd_panel_outcome(const scd_panel* panel, int unit, int period, double* out);

/* Predictors */

typedef struct scd_predictors scd_predictors;

/* `fitting` lists the fitting periods; when NULL the first `T_E` periods are used. */
SCD_API scd_status scd_predictors_build(const scd_panel* panel, const int* fitting, int n_fitting, int T_E,
                                        int scaling, scd_predictors** out);
SCD_API void scd_predictors_free(scd_predictors* pred);
SCD_API int scd_predictors_rows(const scd_predictors* pred);

SCD_API scd_status scd_qcqp_write_json(const scd_predictors* pred, const char* path);

/* Designs */

typedef enum scd_design_kind {
    SCD_DESIGN_UNCONSTRAINED = 0,
    SCD_DESIGN_CONSTRAINED = 1,
    SCD_DESIGN_PENALIZED = 2,
    SCD_DESIGN_UNIT_LEVEL = 3,
    SCD_DESIGN_CLUSTERED = 4
} scd_design_kind;

SCD_API scd_status scd_design_kind_parse(const char* name, scd_design_kind* out);

/* Integer members equal to 0 and real members equal to NaN are unset. */
typedef struct scd_design_spec {
    scd_design_kind kind;
    int m_lo;
    int m_hi;
    double xi;
    double lambda1;
    double lambda2;
    int n_clusters;
    const double* budget_cost; /* NULL for no budget, else one cost per unit */
    double budget_bound;
    uint64_t enumeration_cap;
    uint64_t cluster_seed;
    int cluster_restarts;
    double tolerance;
} scd_design_spec;

SCD_API void scd_design_spec_init(scd_design_spec* spec);

typedef struct scd_design scd_design;

SCD_API scd_status scd_design_solve(const scd_predictors* pred, const scd_design_spec* spec, scd_design** out);
SCD_API void scd_design_free(scd_design* design);
SCD_API int scd_design_units(const scd_design* design);
SCD_API int scd_design_treated_count(const scd_design* design);
/* Copies up to `capacity` treated unit indices; returns the number copied. */
SCD_API int scd_design_treated(const scd_design* design, int* out, int capacity);
/* w and v must each hold scd_design_units() values; either may be NULL. */
SCD_API scd_status scd_design_weights(const scd_design* design, double* w, double* v);
SCD_API double scd_design_objective(const scd_design* design);
SCD_API int scd_design_has_unit_level(const scd_design* design);
SCD_API scd_status scd_design_write_json(const scd_design* design, const scd_panel* panel, const char* path);
SCD_API scd_status scd_design_read_json(const char* path, const scd_panel* panel, scd_design** out);
/* Fixed-width weight table. Writes at most `capacity` bytes including the
 * terminator; `needed` (optional) receives the full size including it. */
SCD_API scd_status scd_design_format_table(const scd_design* design, const scd_panel* panel, char* buffer,
                                           size_t capacity, size_t* needed);

/* Observed panel once the design's treated units receive the intervention,
 * with post-period outcomes taken from a `unit,period,y_n,y_i` file. */
SCD_API scd_status scd_panel_realize(const scd_panel* panel, const char* potential, const scd_design* design,
                                     scd_panel** out);

/* Estimates */

typedef enum scd_estimator {
    SCD_ESTIMATOR_ATE = 0,
    SCD_ESTIMATOR_ATT = 1,
    SCD_ESTIMATOR_BIAS_CORRECTED = 2
} scd_estimator;

typedef struct scd_estimate scd_estimate;

/* `ridge` and `intercept` apply to the bias-corrected estimator only. */
SCD_API scd_status scd_estimate_compute(const scd_panel* panel, const scd_design* design, const scd_predictors* pred,
                                        scd_estimator estimator, double ridge, int intercept, scd_estimate** out);
SCD_API void scd_estimate_free(scd_estimate* est);
SCD_API int scd_estimate_experimental_count(const scd_estimate* est);
SCD_API int scd_estimate_blank_count(const scd_estimate* est);
/* Either output may be NULL. */
SCD_API scd_status scd_estimate_values(const scd_estimate* est, double* tau_hat, double* placebo);
/* `truth` (a `period,tau` file) may be NULL; when given, the file also carries the MAE. */
SCD_API scd_status scd_estimate_write_json(const scd_estimate* est, const scd_panel* panel, const char* truth,
                                           const char* path);
/* `panel` may be NULL when only the estimate values are needed. */
SCD_API scd_status scd_estimate_read_json(const char* path, const scd_panel* panel, scd_estimate** out);

/* Inference */

typedef struct scd_inference_options {
    const char* statistic; /* mean_abs, lp(<p>), one_sided_pos, one_sided_neg */
    int sampled;
    uint64_t samples;
    uint64_t seed;
    uint64_t exact_cap;
} scd_inference_options;

SCD_API void scd_inference_options_init(scd_inference_options* options);

typedef struct scd_inference scd_inference;

SCD_API scd_status scd_infer(const scd_estimate* est, const scd_inference_options* options, scd_inference** out);
SCD_API void scd_inference_free(scd_inference* inf);
SCD_API scd_status scd_inference_p_value(const scd_inference* inf, uint64_t* numerator, uint64_t* denominator,
                                         double* value);
SCD_API scd_status scd_inference_write_json(const scd_inference* inf, const char* path);

/* Simulation */

typedef struct scd_factor_model {
    int J, T, T0, T_E, r, F;
    double sigma2;
    double delta_range[2];
    double upsilon_range[2];
    double loading_range[2];
    double unit_range[2];
    int null_mode;
    uint64_t seed;
} scd_factor_model;

SCD_API void scd_factor_model_init(scd_factor_model* model);

typedef struct scd_simulation scd_simulation;

SCD_API scd_status scd_simulate(const scd_factor_model* model, scd_simulation** out);
SCD_API void scd_simulation_free(scd_simulation* sim);
/* outcomes.csv, covariates.csv, weights.csv, potential.csv, truth.csv */
SCD_API scd_status scd_simulation_write(const scd_simulation* sim, const char* dir);
SCD_API scd_status scd_simulation_panel(const scd_simulation* sim, scd_panel** out);
/* True effect for period t (all T periods). */
SCD_API scd_status scd_simulation_effect(const scd_simulation* sim, int period, double* out);

typedef struct scd_calibration scd_calibration;

/* Monte Carlo replications of simulate -> design -> estimate -> test. With
 * n_sigma2 > 0 one batch runs per listed noise variance. threads = 0 uses all
 * cores. */
SCD_API scd_status scd_replicate(const scd_factor_model* model, const scd_design_spec* spec, uint64_t n_reps,
                                 const double* alphas, int n_alphas, const char* statistic, int threads,
                                 const double* sigma2, int n_sigma2, scd_calibration** out);
SCD_API void scd_calibration_free(scd_calibration* cal);
SCD_API int scd_calibration_batches(const scd_calibration* cal);
SCD_API scd_status scd_calibration_rejection_rate(const scd_calibration* cal, int batch, int alpha, double* out);
SCD_API scd_status scd_calibration_median_p_value(const scd_calibration* cal, int batch, double* out);
SCD_API scd_status scd_calibration_failures(const scd_calibration* cal, int batch, uint64_t* out);
SCD_API scd_status scd_calibration_write_json(const scd_calibration* cal, const char* path);
SCD_API scd_status scd_calibration_write_csv(const scd_calibration* cal, const char* path);

/* Reports */

/* paths.csv, gap.csv and summary.json in `dir`; estimate and inference files
 * are optional (NULL). */
SCD_API scd_status scd_report_write(const scd_panel* panel, const scd_design* design, const char* estimate,
                                    const char* inference, const char* dir);

#ifdef __cplusplus
}
#endif

#endif

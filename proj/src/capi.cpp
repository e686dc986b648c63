#include "scdesign/scdesign.h"

#include "scdesign/designs.hpp"
#include "scdesign/error.hpp"
#include "scdesign/estimators.hpp"
#include "scdesign/inference.hpp"
#include "scdesign/panel.hpp"
#include "scdesign/serialize.hpp"
#include "scdesign/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <new>
#include <string>

using namespace scdesign;

struct scd_panel {
    PanelData data;
};
struct scd_predictors {
    PredictorSet data;
};
struct scd_design {
    DesignSolution data;
};
struct scd_estimate {
    EffectEstimate data;
};
struct scd_inference {
    InferenceResult data;
};
struct scd_simulation {
    SimulatedPanel data;
};
struct scd_calibration {
    std::vector<NoiseSweepRow> rows;
    bool sweep = false;
};

static_assert(static_cast<int>(ErrorCode::MalformedFile) == SCD_ERR_MALFORMED_FILE);
static_assert(static_cast<int>(ErrorCode::InvalidArgument) == SCD_ERR_INVALID_ARGUMENT);
static_assert(static_cast<int>(ErrorCode::EmptyDonorPool) == SCD_ERR_EMPTY_DONOR_POOL);
static_assert(static_cast<int>(ErrorCode::MissingOutcome) == SCD_ERR_MISSING_OUTCOME);
static_assert(static_cast<int>(ErrorCode::NoBlankPeriods) == SCD_ERR_NO_BLANK_PERIODS);
static_assert(static_cast<int>(ErrorCode::ConfigError) == SCD_ERR_CONFIG);
static_assert(static_cast<int>(ErrorCode::Internal) == SCD_ERR_INTERNAL);
static_assert(static_cast<int>(DesignKind::Clustered) == SCD_DESIGN_CLUSTERED);

namespace {

thread_local std::string last_error;

template <class F>
scd_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return SCD_OK;
    } catch (const Error& e) {
        last_error = e.what();
        return static_cast<scd_status>(e.code());
    } catch (const std::bad_alloc&) {
        last_error = "Internal: out of memory";
    } catch (const std::exception& e) {
        last_error = std::string("Internal: ") + e.what();
    } catch (...) {
        last_error = "Internal: unknown exception";
    }
    return SCD_ERR_INTERNAL;
}

void need(const void* p, const char* what) {
    if (p == nullptr) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must not be NULL");
}


DesignSpec to_spec(const scd_design_spec& s, int J) {
    DesignSpec spec;
    if (s.kind < SCD_DESIGN_UNCONSTRAINED || s.kind > SCD_DESIGN_CLUSTERED) {
        throw Error(ErrorCode::InvalidArgument, "unknown design kind");
    }
    spec.kind = static_cast<DesignKind>(s.kind);
    if (s.m_lo != 0) spec.m_lo = s.m_lo;
    if (s.m_hi != 0) spec.m_hi = s.m_hi;
    if (!std::isnan(s.xi)) spec.xi = s.xi;
    if (!std::isnan(s.lambda1)) spec.lambda1 = s.lambda1;
    if (!std::isnan(s.lambda2)) spec.lambda2 = s.lambda2;
    if (s.n_clusters != 0) spec.n_clusters = s.n_clusters;
    if (s.budget_cost != nullptr) {
        spec.budget = Budget{Eigen::Map<const Vector>(s.budget_cost, J), s.budget_bound};
    }
    spec.enumeration_cap = s.enumeration_cap;
    spec.cluster_seed = s.cluster_seed;
    spec.cluster_restarts = s.cluster_restarts;
    spec.tolerance = s.tolerance;
    return spec;
}

FactorModelConfig to_config(const scd_factor_model& m) {
    FactorModelConfig cfg;
    cfg.J = m.J;
    cfg.T = m.T;
    cfg.T0 = m.T0;
    cfg.T_E = m.T_E;
    cfg.r = m.r;
    cfg.F = m.F;
    cfg.sigma2 = m.sigma2;
    cfg.delta_range = {m.delta_range[0], m.delta_range[1]};
    cfg.upsilon_range = {m.upsilon_range[0], m.upsilon_range[1]};
    cfg.loading_range = {m.loading_range[0], m.loading_range[1]};
    cfg.unit_range = {m.unit_range[0], m.unit_range[1]};
    cfg.null_mode = m.null_mode != 0;
    cfg.seed = m.seed;
    return cfg;
}

Statistic statistic_from(const char* name) {
    if (name == nullptr) return Statistic{};
    const auto stat = parse_statistic(name);
    if (!stat) throw Error(ErrorCode::InvalidArgument, std::string("unknown statistic '") + name + "'");
    return *stat;
}

const NoiseSweepRow& batch_at(const scd_calibration* cal, int batch) {
    need(cal, "calibration");
    if (batch < 0 || batch >= static_cast<int>(cal->rows.size())) {
        throw Error(ErrorCode::InvalidArgument, "batch index out of range");
    }
    return cal->rows[batch];
}

}  // namespace

extern "C" {

SCD_API const char* scd_version(void) { return "0.1.0"; }

SCD_API const char* scd_status_name(scd_status status) {
    if (status == SCD_OK) return "Ok";
    if (status < SCD_ERR_MALFORMED_FILE || status > SCD_ERR_INTERNAL) return "Unknown";
    return to_string(static_cast<ErrorCode>(status));
}

SCD_API const char* scd_last_error(void) { return last_error.c_str(); }

SCD_API scd_status scd_panel_load(const char* outcomes, const char* covariates, const char* weights, int T0,
                                  scd_panel** out) {
    return guarded([&] {
        need(outcomes, "outcomes path");
        need(covariates, "covariates path");
        need(out, "out");
        *out = nullptr;
        std::optional<Vector> f;
        if (weights != nullptr) {
            // Unit order is only known once the outcome file has been read.
            PanelData probe = load_panel(outcomes, covariates, std::nullopt, T0);
            f = load_weights(weights, probe.unit_ids());
            *out = new scd_panel{PanelData(probe.Y(), probe.Z(), f, T0, probe.unit_ids(), probe.period_ids())};
        } else {
            *out = new scd_panel{load_panel(outcomes, covariates, std::nullopt, T0)};
        }
    });
}

SCD_API void scd_panel_free(scd_panel* panel) { delete panel; }
SCD_API int scd_panel_units(const scd_panel* panel) { return panel ? panel->data.J() : 0; }
SCD_API int scd_panel_periods(const scd_panel* panel) { return panel ? panel->data.T() : 0; }
SCD_API int scd_panel_pre_periods(const scd_panel* panel) { return panel ? panel->data.T0() : 0; }

SCD_API const char* scd_panel_unit_id(const scd_panel* panel, int unit) {
    if (panel == nullptr || unit < 0 || unit >= panel->data.J()) return nullptr;
    return panel->data.unit_ids()[unit].c_str();
}

SCD_API scd_status scd_panel_outcome(const scd_panel* panel, int unit, int period, double* out) {
    return guarded([&] {
        need(panel, "panel");
        need(out, "out");
        if (unit < 0 || unit >= panel->data.J() || period < 0 || period >= panel->data.T()) {
            throw Error(ErrorCode::InvalidArgument, "unit or period out of range");
        }
        *out = panel->data.Y()(unit, period);
    });
}

SCD_API scd_status scd_predictors_build(const scd_panel* panel, const int* fitting, int n_fitting, int T_E,
                                        int scaling, scd_predictors** out) {
    return guarded([&] {
        need(panel, "panel");
        need(out, "out");
        *out = nullptr;
        const PeriodPartition part = fitting != nullptr
                                         ? make_partition(panel->data, std::vector<int>(fitting, fitting + n_fitting))
                                         : default_partition(panel->data, T_E);
        *out = new scd_predictors{build_predictors(panel->data, part, scaling != 0)};
    });
}

SCD_API void scd_predictors_free(scd_predictors* pred) { delete pred; }
SCD_API int scd_predictors_rows(const scd_predictors* pred) { return pred ? pred->data.M() : 0; }

SCD_API scd_status scd_qcqp_write_json(const scd_predictors* pred, const char* path) {
    return guarded([&] {
        need(pred, "predictors");
        need(path, "path");
        io::write_text(path, io::dump(io::qcqp_to_json(export_qcqp(pred->data), pred->data)));
    });
}

SCD_API scd_status scd_design_kind_parse(const char* name, scd_design_kind* out) {
    return guarded([&] {
        need(name, "name");
        need(out, "out");
        const auto kind = parse_design_kind(name);
        if (!kind) throw Error(ErrorCode::InvalidArgument, std::string("unknown design kind '") + name + "'");
        *out = static_cast<scd_design_kind>(*kind);
    });
}

SCD_API void scd_design_spec_init(scd_design_spec* spec) {
    if (spec == nullptr) return;
    const DesignSpec defaults;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    *spec = scd_design_spec{SCD_DESIGN_UNCONSTRAINED,
                            0,
                            0,
                            nan,
                            nan,
                            nan,
                            0,
                            nullptr,
                            0.0,
                            defaults.enumeration_cap,
                            defaults.cluster_seed,
                            defaults.cluster_restarts,
                            defaults.tolerance};
}

SCD_API scd_status scd_design_solve(const scd_predictors* pred, const scd_design_spec* spec, scd_design** out) {
    return guarded([&] {
        need(pred, "predictors");
        need(spec, "spec");
        need(out, "out");
        *out = nullptr;
        *out = new scd_design{solve_design(pred->data, to_spec(*spec, pred->data.J()))};
    });
}

SCD_API void scd_design_free(scd_design* design) { delete design; }
SCD_API int scd_design_units(const scd_design* design) { return design ? static_cast<int>(design->data.w.size()) : 0; }

SCD_API int scd_design_treated_count(const scd_design* design) {
    return design ? static_cast<int>(design->data.treated.size()) : 0;
}

SCD_API int scd_design_treated(const scd_design* design, int* out, int capacity) {
    if (design == nullptr || out == nullptr) return 0;
    const int n = std::min(capacity, static_cast<int>(design->data.treated.size()));
    for (int i = 0; i < n; ++i) out[i] = design->data.treated[i];
    return n;
}

SCD_API scd_status scd_design_weights(const scd_design* design, double* w, double* v) {
    return guarded([&] {
        need(design, "design");
        for (int j = 0; j < design->data.w.size(); ++j) {
            if (w) w[j] = design->data.w(j);
            if (v) v[j] = design->data.v(j);
        }
    });
}

SCD_API double scd_design_objective(const scd_design* design) {
    return design ? design->data.objective : std::numeric_limits<double>::quiet_NaN();
}

SCD_API int scd_design_has_unit_level(const scd_design* design) {
    return design && design->data.v_unit.has_value() ? 1 : 0;
}

SCD_API scd_status scd_design_write_json(const scd_design* design, const scd_panel* panel, const char* path) {
    return guarded([&] {
        need(design, "design");
        need(panel, "panel");
        need(path, "path");
        io::write_text(path, io::dump(io::design_to_json(design->data, panel->data.unit_ids())));
    });
}

SCD_API scd_status scd_design_read_json(const char* path, const scd_panel* panel, scd_design** out) {
    return guarded([&] {
        need(path, "path");
        need(panel, "panel");
        need(out, "out");
        *out = nullptr;
        *out = new scd_design{io::design_from_json(io::read_json(path), panel->data.unit_ids())};
    });
}

SCD_API scd_status scd_design_format_table(const scd_design* design, const scd_panel* panel, char* buffer,
                                           size_t capacity, size_t* needed) {
    return guarded([&] {
        need(design, "design");
        need(panel, "panel");
        const std::string table = io::design_table(design->data, panel->data.unit_ids());
        if (needed) *needed = table.size() + 1;
        if (buffer != nullptr && capacity > 0) {
            const size_t n = std::min(capacity - 1, table.size());
            std::memcpy(buffer, table.data(), n);
            buffer[n] = '\0';
        }
    });
}

SCD_API scd_status scd_panel_realize(const scd_panel* panel, const char* potential, const scd_design* design,
                                     scd_panel** out) {
    return guarded([&] {
        need(panel, "panel");
        need(potential, "potential path");
        need(design, "design");
        need(out, "out");
        *out = nullptr;
        *out = new scd_panel{io::realize_from_potential(panel->data, potential, design->data.treated)};
    });
}

SCD_API scd_status scd_estimate_compute(const scd_panel* panel, const scd_design* design, const scd_predictors* pred,
                                        scd_estimator estimator, double ridge, int intercept, scd_estimate** out) {
    return guarded([&] {
        need(panel, "panel");
        need(design, "design");
        need(pred, "predictors");
        need(out, "out");
        *out = nullptr;
        const PeriodPartition& part = pred->data.partition;
        switch (estimator) {
            case SCD_ESTIMATOR_ATE:
                *out = new scd_estimate{estimate_ate(panel->data, design->data, part)};
                break;
            case SCD_ESTIMATOR_ATT:
                *out = new scd_estimate{estimate_att(panel->data, design->data, part)};
                break;
            case SCD_ESTIMATOR_BIAS_CORRECTED:
                *out = new scd_estimate{
                    estimate_bias_corrected(panel->data, design->data, pred->data, {ridge, intercept != 0})};
                break;
            default:
                throw Error(ErrorCode::InvalidArgument, "unknown estimator");
        }
    });
}

SCD_API void scd_estimate_free(scd_estimate* est) { delete est; }
SCD_API int scd_estimate_experimental_count(const scd_estimate* est) {
    return est ? static_cast<int>(est->data.per_period.size()) : 0;
}
SCD_API int scd_estimate_blank_count(const scd_estimate* est) {
    return est ? static_cast<int>(est->data.placebo.size()) : 0;
}

SCD_API scd_status scd_estimate_values(const scd_estimate* est, double* tau_hat, double* placebo) {
    return guarded([&] {
        need(est, "estimate");
        for (int i = 0; tau_hat && i < est->data.per_period.size(); ++i) tau_hat[i] = est->data.per_period(i);
        for (int i = 0; placebo && i < est->data.placebo.size(); ++i) placebo[i] = est->data.placebo(i);
    });
}

SCD_API scd_status scd_estimate_write_json(const scd_estimate* est, const scd_panel* panel, const char* truth,
                                           const char* path) {
    return guarded([&] {
        need(est, "estimate");
        need(panel, "panel");
        need(path, "path");
        std::optional<Vector> tau;
        if (truth != nullptr) tau = io::read_truth(truth, panel->data.period_ids(), est->data.experimental_periods);
        io::write_text(path, io::dump(io::estimate_to_json(est->data, panel->data.period_ids(), tau)));
    });
}

SCD_API scd_status scd_estimate_read_json(const char* path, const scd_panel* panel, scd_estimate** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        const std::vector<std::string> none;
        *out = new scd_estimate{io::estimate_from_json(io::read_json(path), panel ? panel->data.period_ids() : none)};
    });
}

SCD_API void scd_inference_options_init(scd_inference_options* options) {
    if (options == nullptr) return;
    const InferenceOptions defaults;
    *options = scd_inference_options{"mean_abs", 0, 0, 0, defaults.exact_cap};
}

SCD_API scd_status scd_infer(const scd_estimate* est, const scd_inference_options* options, scd_inference** out) {
    return guarded([&] {
        need(est, "estimate");
        need(options, "options");
        need(out, "out");
        *out = nullptr;
        InferenceOptions opt;
        opt.statistic = statistic_from(options->statistic);
        opt.sampled = options->sampled != 0;
        opt.samples = options->samples;
        opt.seed = options->seed;
        opt.exact_cap = options->exact_cap;
        *out = new scd_inference{p_value(build_residuals(est->data), opt)};
    });
}

SCD_API void scd_inference_free(scd_inference* inf) { delete inf; }

SCD_API scd_status scd_inference_p_value(const scd_inference* inf, uint64_t* numerator, uint64_t* denominator,
                                         double* value) {
    return guarded([&] {
        need(inf, "inference");
        if (numerator) *numerator = inf->data.numerator;
        if (denominator) *denominator = inf->data.denominator;
        if (value) *value = inf->data.p_value;
    });
}

SCD_API scd_status scd_inference_write_json(const scd_inference* inf, const char* path) {
    return guarded([&] {
        need(inf, "inference");
        need(path, "path");
        io::write_text(path, io::dump(io::inference_to_json(inf->data)));
    });
}

SCD_API void scd_factor_model_init(scd_factor_model* model) {
    if (model == nullptr) return;
    const FactorModelConfig d;
    *model = scd_factor_model{d.J,
                              d.T,
                              d.T0,
                              d.T_E,
                              d.r,
                              d.F,
                              d.sigma2,
                              {d.delta_range.lo, d.delta_range.hi},
                              {d.upsilon_range.lo, d.upsilon_range.hi},
                              {d.loading_range.lo, d.loading_range.hi},
                              {d.unit_range.lo, d.unit_range.hi},
                              d.null_mode ? 1 : 0,
                              d.seed};
}

SCD_API scd_status scd_simulate(const scd_factor_model* model, scd_simulation** out) {
    return guarded([&] {
        need(model, "model");
        need(out, "out");
        *out = nullptr;
        *out = new scd_simulation{generate_panel(to_config(*model))};
    });
}

SCD_API void scd_simulation_free(scd_simulation* sim) { delete sim; }

SCD_API scd_status scd_simulation_write(const scd_simulation* sim, const char* dir) {
    return guarded([&] {
        need(sim, "simulation");
        need(dir, "dir");
        io::write_simulation(sim->data, dir);
    });
}

SCD_API scd_status scd_simulation_panel(const scd_simulation* sim, scd_panel** out) {
    return guarded([&] {
        need(sim, "simulation");
        need(out, "out");
        *out = nullptr;
        *out = new scd_panel{sim->data.panel};
    });
}

SCD_API scd_status scd_simulation_effect(const scd_simulation* sim, int period, double* out) {
    return guarded([&] {
        need(sim, "simulation");
        need(out, "out");
        if (period < 0 || period >= sim->data.tau.size()) throw Error(ErrorCode::InvalidArgument, "period out of range");
        *out = sim->data.tau(period);
    });
}

SCD_API scd_status scd_replicate(const scd_factor_model* model, const scd_design_spec* spec, uint64_t n_reps,
                                 const double* alphas, int n_alphas, const char* statistic, int threads,
                                 const double* sigma2, int n_sigma2, scd_calibration** out) {
    return guarded([&] {
        need(model, "model");
        need(spec, "spec");
        need(out, "out");
        *out = nullptr;
        if (n_alphas > 0) need(alphas, "alphas");
        if (n_sigma2 > 0) need(sigma2, "sigma2");
        const FactorModelConfig cfg = to_config(*model);
        const DesignSpec dspec = to_spec(*spec, cfg.J);
        const std::vector<double> alpha_list(alphas, alphas + std::max(0, n_alphas));
        ReplicationOptions options;
        options.statistic = statistic_from(statistic);
        options.threads = threads;
        auto cal = std::make_unique<scd_calibration>();
        if (n_sigma2 > 0) {
            cal->rows = noise_sweep(cfg, dspec, std::vector<double>(sigma2, sigma2 + n_sigma2), n_reps, alpha_list,
                                    options);
            cal->sweep = true;
        } else {
            cal->rows.push_back({cfg.sigma2, run_replications(cfg, dspec, n_reps, alpha_list, options)});
        }
        *out = cal.release();
    });
}

SCD_API void scd_calibration_free(scd_calibration* cal) { delete cal; }
SCD_API int scd_calibration_batches(const scd_calibration* cal) { return cal ? static_cast<int>(cal->rows.size()) : 0; }

SCD_API scd_status scd_calibration_rejection_rate(const scd_calibration* cal, int batch, int alpha, double* out) {
    return guarded([&] {
        const auto& row = batch_at(cal, batch);
        need(out, "out");
        if (alpha < 0 || alpha >= static_cast<int>(row.report.rejection_rate.size())) {
            throw Error(ErrorCode::InvalidArgument, "alpha index out of range");
        }
        *out = row.report.rejection_rate[alpha];
    });
}

SCD_API scd_status scd_calibration_median_p_value(const scd_calibration* cal, int batch, double* out) {
    return guarded([&] {
        const auto& row = batch_at(cal, batch);
        need(out, "out");
        *out = row.report.median_p_value;
    });
}

SCD_API scd_status scd_calibration_failures(const scd_calibration* cal, int batch, uint64_t* out) {
    return guarded([&] {
        const auto& row = batch_at(cal, batch);
        need(out, "out");
        *out = row.report.failures;
    });
}

SCD_API scd_status scd_calibration_write_json(const scd_calibration* cal, const char* path) {
    return guarded([&] {
        need(cal, "calibration");
        need(path, "path");
        const io::Json doc = cal->sweep ? io::sweep_to_json(cal->rows) : io::calibration_to_json(cal->rows.at(0).report);
        io::write_text(path, io::dump(doc));
    });
}

SCD_API scd_status scd_calibration_write_csv(const scd_calibration* cal, const char* path) {
    return guarded([&] {
        need(cal, "calibration");
        need(path, "path");
        std::string text;
        for (std::size_t b = 0; b < cal->rows.size(); ++b) {
            std::string part = io::replications_csv(cal->rows[b].report);
            if (b > 0) part.erase(0, part.find('\n') + 1);
            text += part;
        }
        io::write_text(path, text);
    });
}

SCD_API scd_status scd_report_write(const scd_panel* panel, const scd_design* design, const char* estimate,
                                    const char* inference, const char* dir) {
    return guarded([&] {
        need(panel, "panel");
        need(design, "design");
        need(dir, "dir");
        std::optional<io::Json> est, inf;
        if (estimate != nullptr) est = io::read_json(estimate);
        if (inference != nullptr) inf = io::read_json(inference);
        io::write_report(panel->data, design->data, est, inf, dir);
    });
}

}  // extern "C"

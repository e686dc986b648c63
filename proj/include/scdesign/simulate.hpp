#pragma once

#include "scdesign/designs.hpp"
#include "scdesign/inference.hpp"
#include "scdesign/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scdesign {

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

/// Linear factor model
///   Y^N_jt = delta_t + theta_t'Z_j + lambda_t'mu_j + eps_jt
///   Y^I_jt = upsilon_t + gamma_t'Z_j + eta_t'mu_j + xi_jt
/// In null mode Y^I reuses delta, theta and lambda (only the noise differs).
///
/// Draw order from one Rng(seed): delta (T, then sorted), upsilon (T, then
/// sorted), Z (J x r row-major), mu (J x F row-major), then per period
/// theta_t (r), gamma_t (r), lambda_t (F), eta_t (F), then eps (J x T
/// row-major), then xi (J x T row-major).
struct FactorModelConfig {
    int J = 15;
    int T = 30;
    int T0 = 25;
    int T_E = 20;
    int r = 7;
    int F = 11;
    double sigma2 = 1.0;
    Range delta_range{0.0, 20.0};
    Range upsilon_range{0.0, 20.0};
    Range loading_range{0.0, 10.0};
    Range unit_range{0.0, 1.0};
    bool null_mode = false;
    std::uint64_t seed = 0;
};

void validate(const FactorModelConfig& cfg);

struct SimulatedPanel {
    FactorModelConfig config;
    PanelData panel;  // post-period outcomes unobserved (NaN)
    PeriodPartition partition;
    Matrix Y_N;       // J x T
    Matrix Y_I;       // J x T
    Vector tau;       // T, f-weighted Y^I - Y^N
    Vector delta, upsilon;
    Matrix Z, mu;                         // J x r, J x F
    Matrix theta, gamma, lambda, eta;     // T x r, T x r, T x F, T x F
    Matrix eps, xi;                       // J x T
};

SimulatedPanel generate_panel(const FactorModelConfig& cfg);

/// Observed panel once `treated` receive the intervention: Y^N before T0 and for
/// untreated units, Y^I after T0 for treated units.
PanelData realize(const SimulatedPanel& sim, const std::vector<int>& treated);

/// True effects over the experimental periods.
Vector true_effects(const SimulatedPanel& sim);

struct ReplicationOptions {
    Statistic statistic;
    int threads = 0;  // 0 uses the hardware concurrency
    bool keep_records = true;
};

struct ReplicationRecord {
    std::uint64_t index = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double p_value = 0.0;
    double mae = 0.0;
    double pre_fit_rmse = 0.0;  // synthetic treated minus synthetic control over fitting periods
    double objective = 0.0;
    int n_treated = 0;
    Vector tau_hat;
    Vector tau;
};

struct CalibrationReport {
    FactorModelConfig config;
    std::uint64_t n_reps = 0;
    std::uint64_t failures = 0;
    std::vector<double> alphas;
    std::vector<double> rejection_rate;  // aligned with alphas, over successful replications
    double mean_mae = 0.0;
    double mean_pre_fit_rmse = 0.0;
    double median_p_value = 0.0;
    double mean_p_value = 0.0;
    std::vector<ReplicationRecord> records;
};

/// Replication i uses seed Rng::substream_seed(cfg.seed, i). Per-replication
/// failures are recorded and counted rather than thrown.
CalibrationReport run_replications(const FactorModelConfig& cfg, const DesignSpec& spec, std::uint64_t n_reps,
                                   const std::vector<double>& alphas, const ReplicationOptions& options = {});

ReplicationRecord run_single(const FactorModelConfig& cfg, const DesignSpec& spec, const Statistic& statistic);

struct NoiseSweepRow {
    double sigma2 = 0.0;
    CalibrationReport report;
};

/// run_replications for each noise variance, with the same master seed.
std::vector<NoiseSweepRow> noise_sweep(const FactorModelConfig& cfg, const DesignSpec& spec,
                                       const std::vector<double>& sigma2_list, std::uint64_t n_reps,
                                       const std::vector<double>& alphas, const ReplicationOptions& options = {});

}  // namespace scdesign

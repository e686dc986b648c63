#include "scdesign/simulate.hpp"

#include "scdesign/error.hpp"
#include "scdesign/estimators.hpp"
#include "scdesign/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace scdesign {

void validate(const FactorModelConfig& cfg) {
    auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidArgument, msg); };
    if (cfg.J < 2) fail("J must be at least 2");
    if (cfg.F < 1) fail("F must be at least 1");
    if (cfg.r < 0) fail("r must be nonnegative");
    if (!(1 <= cfg.T_E && cfg.T_E <= cfg.T0 && cfg.T0 < cfg.T)) fail("periods must satisfy 1 <= T_E <= T0 < T");
    if (!(cfg.sigma2 > 0.0) || !std::isfinite(cfg.sigma2)) fail("sigma2 must be positive");
    for (const Range& range : {cfg.delta_range, cfg.upsilon_range, cfg.loading_range, cfg.unit_range}) {
        if (!std::isfinite(range.lo) || !std::isfinite(range.hi) || range.hi < range.lo) fail("invalid uniform range");
    }
}

SimulatedPanel generate_panel(const FactorModelConfig& cfg) {
    validate(cfg);
    const int J = cfg.J, T = cfg.T, r = cfg.r, F = cfg.F;
    Rng rng(cfg.seed);
    auto uniform_vector = [&](int n, Range range) {
        Vector out(n);
        for (int i = 0; i < n; ++i) out(i) = rng.uniform(range.lo, range.hi);
        return out;
    };
    auto uniform_rows = [&](int rows, int cols, Range range) {
        Matrix out(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) out(i, j) = rng.uniform(range.lo, range.hi);
        return out;
    };

    SimulatedPanel sim{cfg, PanelData(Matrix::Zero(2, 2), Matrix::Zero(2, 0), std::nullopt, 1), {}, {}, {}, {}, {}, {},
                       {}, {}, {}, {}, {}, {}, {}, {}};
    sim.delta = uniform_vector(T, cfg.delta_range);
    std::sort(sim.delta.begin(), sim.delta.end());
    sim.upsilon = uniform_vector(T, cfg.upsilon_range);
    std::sort(sim.upsilon.begin(), sim.upsilon.end());
    sim.Z = uniform_rows(J, r, cfg.unit_range);
    sim.mu = uniform_rows(J, F, cfg.unit_range);
    sim.theta.resize(T, r);
    sim.gamma.resize(T, r);
    sim.lambda.resize(T, F);
    sim.eta.resize(T, F);
    for (int t = 0; t < T; ++t) {
        sim.theta.row(t) = uniform_vector(r, cfg.loading_range).transpose();
        sim.gamma.row(t) = uniform_vector(r, cfg.loading_range).transpose();
        sim.lambda.row(t) = uniform_vector(F, cfg.loading_range).transpose();
        sim.eta.row(t) = uniform_vector(F, cfg.loading_range).transpose();
    }
    const double sd = std::sqrt(cfg.sigma2);
    sim.eps.resize(J, T);
    sim.xi.resize(J, T);
    for (int j = 0; j < J; ++j)
        for (int t = 0; t < T; ++t) sim.eps(j, t) = rng.normal(0.0, sd);
    for (int j = 0; j < J; ++j)
        for (int t = 0; t < T; ++t) sim.xi(j, t) = rng.normal(0.0, sd);

    const Matrix systematic_n =
        (sim.Z * sim.theta.transpose() + sim.mu * sim.lambda.transpose()).rowwise() + sim.delta.transpose();
    sim.Y_N = systematic_n + sim.eps;
    if (cfg.null_mode) {
        sim.Y_I = systematic_n + sim.xi;
    } else {
        sim.Y_I = (sim.Z * sim.gamma.transpose() + sim.mu * sim.eta.transpose()).rowwise() + sim.upsilon.transpose();
        sim.Y_I += sim.xi;
    }
    const Vector f = Vector::Constant(J, 1.0 / J);
    sim.tau = (sim.Y_I - sim.Y_N).transpose() * f;

    Matrix observed = sim.Y_N;
    observed.rightCols(T - cfg.T0).setConstant(std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> units, periods;
    for (int j = 0; j < J; ++j) units.push_back("u" + std::to_string(j + 1));
    for (int t = 0; t < T; ++t) periods.push_back(std::to_string(t + 1));
    sim.panel = PanelData(observed, sim.Z, f, cfg.T0, units, periods);
    sim.partition = default_partition(sim.panel, cfg.T_E);
    return sim;
}

PanelData realize(const SimulatedPanel& sim, const std::vector<int>& treated) {
    const int J = sim.config.J;
    Matrix Y = sim.Y_N;
    for (const int j : treated) {
        if (j < 0 || j >= J) throw Error(ErrorCode::DimensionMismatch, "treated unit index out of range");
        Y.row(j).tail(sim.config.T - sim.config.T0) = sim.Y_I.row(j).tail(sim.config.T - sim.config.T0);
    }
    return sim.panel.with_outcomes(std::move(Y));
}

Vector true_effects(const SimulatedPanel& sim) {
    return sim.tau.tail(sim.config.T - sim.config.T0);
}

ReplicationRecord run_single(const FactorModelConfig& cfg, const DesignSpec& spec, const Statistic& statistic) {
    ReplicationRecord rec;
    rec.seed = cfg.seed;
    try {
        const SimulatedPanel sim = generate_panel(cfg);
        const PredictorSet pred = build_predictors(sim.panel, sim.partition);
        const DesignSolution sol = solve_design(pred, spec);
        const PanelData realized = realize(sim, sol.treated);
        const EffectEstimate est = estimate_ate(realized, sol, sim.partition);
        InferenceOptions inf;
        inf.statistic = statistic;
        const InferenceResult res = p_value(build_residuals(est), inf);
        rec.tau = true_effects(sim);
        rec.tau_hat = est.per_period;
        rec.p_value = res.p_value;
        rec.mae = mae(est.per_period, rec.tau);
        const auto [w, v] = effective_weights(sol, realized.f());
        double sq = 0.0;
        for (const int t : sim.partition.fitting) {
            const double gap = w.dot(realized.Y().col(t)) - v.dot(realized.Y().col(t));
            sq += gap * gap;
        }
        rec.pre_fit_rmse = std::sqrt(sq / sim.partition.T_E());
        rec.objective = sol.objective;
        rec.n_treated = static_cast<int>(sol.treated.size());
        rec.ok = true;
    } catch (const Error& e) {
        rec.error = e.what();
    } catch (const std::exception& e) {
        rec.error = std::string("Internal: ") + e.what();
    }
    return rec;
}

CalibrationReport run_replications(const FactorModelConfig& cfg, const DesignSpec& spec, std::uint64_t n_reps,
                                   const std::vector<double>& alphas, const ReplicationOptions& options) {
    validate(cfg);
    if (n_reps < 1) throw Error(ErrorCode::InvalidArgument, "n_reps must be at least 1");
    for (const double a : alphas) {
        if (!(a > 0.0 && a < 1.0)) throw Error(ErrorCode::InvalidArgument, "alphas must lie in (0, 1)");
    }
    // Fail fast on a spec that can never work for this configuration.
    resolve_spec(spec, cfg.J);

    std::vector<ReplicationRecord> records(n_reps);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (std::uint64_t i = next++; i < n_reps; i = next++) {
            FactorModelConfig rep = cfg;
            rep.seed = Rng::substream_seed(cfg.seed, i);
            records[i] = run_single(rep, spec, options.statistic);
            records[i].index = i;
        }
    };
    unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::uint64_t>(n_reps, 256))));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    CalibrationReport report;
    report.config = cfg;
    report.n_reps = n_reps;
    report.alphas = alphas;
    report.rejection_rate.assign(alphas.size(), 0.0);
    std::vector<double> pvals;
    double mae_sum = 0.0, fit_sum = 0.0;
    for (const auto& rec : records) {
        if (!rec.ok) {
            ++report.failures;
            continue;
        }
        pvals.push_back(rec.p_value);
        mae_sum += rec.mae;
        fit_sum += rec.pre_fit_rmse;
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            if (rec.p_value <= alphas[a] + 1e-12) report.rejection_rate[a] += 1.0;
        }
    }
    const double ok = static_cast<double>(pvals.size());
    if (ok > 0) {
        for (double& rate : report.rejection_rate) rate /= ok;
        report.mean_mae = mae_sum / ok;
        report.mean_pre_fit_rmse = fit_sum / ok;
        double psum = 0.0;
        for (const double p : pvals) psum += p;
        report.mean_p_value = psum / ok;
        std::sort(pvals.begin(), pvals.end());
        const std::size_t m = pvals.size();
        report.median_p_value = m % 2 ? pvals[m / 2] : 0.5 * (pvals[m / 2 - 1] + pvals[m / 2]);
    } else {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        std::fill(report.rejection_rate.begin(), report.rejection_rate.end(), nan);
        report.mean_mae = report.mean_pre_fit_rmse = report.mean_p_value = report.median_p_value = nan;
    }
    if (options.keep_records) report.records = std::move(records);
    return report;
}

std::vector<NoiseSweepRow> noise_sweep(const FactorModelConfig& cfg, const DesignSpec& spec,
                                       const std::vector<double>& sigma2_list, std::uint64_t n_reps,
                                       const std::vector<double>& alphas, const ReplicationOptions& options) {
    if (sigma2_list.empty()) throw Error(ErrorCode::InvalidArgument, "noise sweep needs at least one variance");
    std::vector<NoiseSweepRow> rows;
    for (const double s2 : sigma2_list) {
        FactorModelConfig c = cfg;
        c.sigma2 = s2;
        rows.push_back({s2, run_replications(c, spec, n_reps, alphas, options)});
    }
    return rows;
}

}  // namespace scdesign

// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"

#include "scdesign/designs.hpp"
#include "scdesign/estimators.hpp"
#include "scdesign/inference.hpp"
#include "scdesign/simplex_ls.hpp"
#include "scdesign/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace scdesign;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, const std::function<Outcome()>& body) {
    const auto start = Clock::now();
    Outcome out;
    try {
        out = body();
    } catch (const std::exception& e) {
        out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (!out.pass) ++failures;
    std::printf("[%s] criterion %2d: %s (%s; %.3f s)\n", out.pass ? "PASS" : "FAIL", id, title, out.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Matrix uniform(std::mt19937_64& gen, int rows, int cols, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = d(gen);
    return m;
}

PredictorSet predictors(const Matrix& X) {
    PredictorSet p;
    p.X = X;
    p.f = Vector::Constant(X.cols(), 1.0 / static_cast<double>(X.cols()));
    p.Xbar = X * p.f;
    p.scale = Vector::Ones(X.rows());
    p.zero_variance.assign(static_cast<std::size_t>(X.rows()), false);
    return p;
}

unsigned mask_of(const std::vector<int>& s) {
    unsigned m = 0;
    for (const int j : s) m |= 1u << j;
    return m;
}

Vector random_simplex(std::mt19937_64& gen, int n) {
    std::exponential_distribution<double> e(1.0);
    Vector w(n);
    for (int i = 0; i < n; ++i) w(i) = e(gen);
    return w / w.sum();
}

// Criterion 1
Outcome mae_reproduction() {
    Vector tau_hat(5), tau(5);
    tau_hat << -17.54, -18.70, 0.46, -4.47, -2.02;
    tau << -15.55, -17.76, 2.52, -4.92, -3.27;
    const auto start = Clock::now();
    const double value = mae(tau_hat, tau);
    const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return {std::abs(value - 1.34) <= 0.005 && ms < 1.0, fmt("MAE %.4f", value) + fmt(", %.4f ms", ms)};
}

// Criterion 2
Outcome design_oracle() {
    struct Config {
        const char* name;
        DesignSpec spec;
    };
    auto make = [](DesignKind kind, std::optional<int> m_hi, std::optional<double> lambda, std::optional<double> xi) {
        DesignSpec s;
        s.kind = kind;
        s.m_hi = m_hi;
        s.lambda1 = lambda;
        s.xi = xi;
        return s;
    };
    const std::vector<Config> configs = {
        {"unconstrained", make(DesignKind::Unconstrained, {}, {}, {})},
        {"constrained m=1", make(DesignKind::Constrained, 1, {}, {})},
        {"constrained m=2", make(DesignKind::Constrained, 2, {}, {})},
        {"penalized 0", make(DesignKind::Penalized, {}, 0.0, {})},
        {"penalized 1", make(DesignKind::Penalized, {}, 1.0, {})},
        {"unit-level 0.1", make(DesignKind::UnitLevel, {}, {}, 0.1)},
        {"unit-level 1", make(DesignKind::UnitLevel, {}, {}, 1.0)},
        {"unit-level 10", make(DesignKind::UnitLevel, {}, {}, 10.0)},
    };
    std::mt19937_64 gen(20240601);
    std::uniform_int_distribution<int> jdist(3, 6);
    std::uniform_int_distribution<int> mdist(1, 3);
    double worst = 0.0;
    int checked_supports = 0, support_mismatch = 0, gap_fail = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const int J = jdist(gen);
        const PredictorSet pred = predictors(uniform(gen, mdist(gen), J, 0.0, 1.0));
        for (const Config& c : configs) {
            const DesignSolution sol = solve_design(pred, c.spec);
            const int m_hi = c.spec.m_hi.value_or(J - 1);
            oracle::DesignOracle o;
            if (c.spec.kind == DesignKind::UnitLevel) {
                o = oracle::unit_level_design(pred.X, pred.Xbar, *c.spec.xi, 1, m_hi);
            } else {
                const double lambda = c.spec.lambda1.value_or(0.0);
                o = oracle::base_design(pred.X, pred.Xbar, 1, m_hi, lambda, lambda);
            }
            const double gap = std::abs(sol.objective - o.best.objective);
            worst = std::max(worst, gap);
            if (gap > 1e-3) ++gap_fail;
            if (o.runner_up_gap > 1e-2) {
                ++checked_supports;
                if (mask_of(sol.treated) != o.best.mask) ++support_mismatch;
            }
        }
    }
    return {gap_fail == 0 && support_mismatch == 0,
            "400 solves, max |objective gap| " + fmt("%.2e", worst) + ", " + std::to_string(gap_fail) +
                " over 1e-3, supports compared " + std::to_string(checked_supports) + ", mismatches " +
                std::to_string(support_mismatch)};
}

// Criterion 3
Outcome simplex_kernel() {
    std::mt19937_64 gen(77);
    std::uniform_int_distribution<int> kdist(1, 4);
    std::uniform_int_distribution<int> mdist(1, 3);
    double worst = 0.0;
    int bad = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int k = kdist(gen), M = mdist(gen);
        SimplexLSProblem p;
        p.columns = uniform(gen, M, k, -3.0, 3.0);
        p.target = uniform(gen, M, 1, -3.0, 3.0).col(0);
        Vector pen = Vector::Zero(k);
        if (trial % 2 == 1) {
            pen = uniform(gen, k, 1, 0.0, 2.0).col(0);
            p.penalty = pen;
        }
        const SimplexLSSolution s = solve_simplex_ls(p);
        const oracle::GridResult g = oracle::simplex_grid(p.columns, p.target, pen, 100);
        const double gap = std::abs(s.objective - g.objective);
        worst = std::max(worst, gap);
        double vertex = std::numeric_limits<double>::infinity();
        for (int j = 0; j < k; ++j) vertex = std::min(vertex, (p.target - p.columns.col(j)).squaredNorm() + pen(j));
        const bool simplex = s.weights.minCoeff() >= 0.0 && std::abs(s.weights.sum() - 1.0) <= 1e-12;
        const double direct = (p.target - p.columns * s.weights).squaredNorm() + pen.dot(s.weights);
        const bool consistent = std::abs(direct - s.objective) <= 1e-9 * std::max(1.0, direct);
        if (gap > 1e-3 || s.objective > vertex + 1e-12 || !simplex || !consistent || s.objective < 0.0) ++bad;
    }
    return {bad == 0, "200 problems, max |objective gap| " + fmt("%.2e", worst) + ", violations " + std::to_string(bad)};
}

// Criterion 4
Outcome att_identity() {
    std::mt19937_64 gen(4242);
    std::uniform_int_distribution<int> jdist(4, 7);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int J = jdist(gen);
        const int T = 8;
        const Matrix Y = uniform(gen, J, T, 0.0, 20.0);
        const PanelData panel(Y, uniform(gen, J, 2, 0.0, 1.0), std::nullopt, 6);
        const PredictorSet pred = build_predictors(panel, default_partition(panel, 4), true);
        DesignSpec s;
        s.kind = DesignKind::UnitLevel;
        s.xi = std::pow(10.0, static_cast<double>(trial % 5) - 2.0);
        const DesignSolution sol = solve_design(pred, s);
        const Matrix& V = *sol.v_unit;
        const Vector v_star = aggregate_unit_level_weights(sol.w, V);
        for (int t = 0; t < T; ++t) {
            const Vector y = Y.col(t);
            const double aggregated = sol.w.dot(y) - v_star.dot(y);
            double unit_level = 0.0;
            for (const int j : sol.treated) unit_level += sol.w(j) * (y(j) - V.col(j).dot(y));
            worst = std::max(worst, std::abs(aggregated - unit_level));
        }
        const EffectEstimate est = estimate_att(panel, sol, pred.partition);
        for (int a = 0; a < est.placebo.size(); ++a) {
            const int t = est.blank_periods[a];
            worst = std::max(worst, std::abs(est.placebo(a) - (sol.w.dot(Y.col(t)) - v_star.dot(Y.col(t)))));
        }
    }
    return {worst <= 1e-10, "100 designs, max |difference| " + fmt("%.2e", worst)};
}

double rate_at(const CalibrationReport& rep, double alpha, std::size_t count) {
    std::size_t hits = 0, n = 0;
    for (std::size_t i = 0; i < std::min(count, rep.records.size()); ++i) {
        const auto& r = rep.records[i];
        if (!r.ok) continue;
        ++n;
        if (r.p_value <= alpha + 1e-12) ++hits;
    }
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

// Criterion 7
Outcome saturation(const SimulatedPanel& sim) {
    const PredictorSet pred = build_predictors(sim.panel, sim.partition, true);
    auto one_hot = [](const Vector& x) {
        return (x.array() > 0.0).count() == 1 && std::abs(x.maxCoeff() - 1.0) <= 1e-8;
    };
    std::vector<DesignSolution> pen;
    for (const double lambda : {1e2, 1e3}) {
        DesignSpec s;
        s.kind = DesignKind::Penalized;
        s.lambda1 = lambda;
        pen.push_back(solve_design(pred, s));
    }
    const double pen_diff = std::max((pen[0].w - pen[1].w).cwiseAbs().maxCoeff(), (pen[0].v - pen[1].v).cwiseAbs().maxCoeff());
    const bool pen_ok = pen_diff < 1e-8 && one_hot(pen[0].w) && one_hot(pen[0].v) && one_hot(pen[1].w) && one_hot(pen[1].v);

    std::vector<DesignSolution> ul;
    for (const double xi : {10.0, 1e2, 1e3}) {
        DesignSpec s;
        s.kind = DesignKind::UnitLevel;
        s.xi = xi;
        ul.push_back(solve_design(pred, s));
    }
    double ul_diff = 0.0;
    bool ul_hot = true;
    for (const auto& s : ul) {
        ul_diff = std::max(ul_diff, (s.w - ul[0].w).cwiseAbs().maxCoeff());
        ul_hot = ul_hot && one_hot(s.w);
    }
    return {pen_ok && ul_diff < 1e-8 && ul_hot,
            "penalized max diff " + fmt("%.1e", pen_diff) + (pen_ok ? " one-hot" : " not one-hot") +
                ", unit-level max diff " + fmt("%.1e", ul_diff) + (ul_hot ? " one-hot" : " not one-hot")};
}

// Criterion 8
Outcome capacity(const SimulatedPanel& sim) {
    const PredictorSet pred = build_predictors(sim.panel, sim.partition, true);
    const DesignSolution u = solve_design(pred, DesignSpec{});
    DesignSpec s;
    s.kind = DesignKind::Constrained;
    s.m_hi = 7;
    const DesignSolution c = solve_design(pred, s);
    const double diff = std::max((u.w - c.w).cwiseAbs().maxCoeff(), (u.v - c.v).cwiseAbs().maxCoeff());
    return {diff == 0.0 && u.treated == c.treated && u.objective == c.objective,
            "unconstrained treats " + std::to_string(u.treated.size()) + " units, max weight diff " + fmt("%.1e", diff)};
}

// Criterion 9
Outcome qcqp() {
    std::mt19937_64 gen(909);
    std::uniform_int_distribution<int> jdist(2, 7);
    std::uniform_int_distribution<int> mdist(1, 4);
    double worst = 0.0;
    bool complement = true;
    for (int inst = 0; inst < 20; ++inst) {
        const int J = jdist(gen);
        const PredictorSet pred = predictors(uniform(gen, mdist(gen), J, -5.0, 5.0));
        const QcqpExport q = export_qcqp(pred);
        for (int draw = 0; draw < 50; ++draw) {
            std::vector<int> units(J);
            for (int j = 0; j < J; ++j) units[j] = j;
            std::shuffle(units.begin(), units.end(), gen);
            const int m = std::uniform_int_distribution<int>(1, J - 1)(gen);
            const Vector a = random_simplex(gen, m), b = random_simplex(gen, J - m);
            Vector w = Vector::Zero(J), v = Vector::Zero(J);
            for (int i = 0; i < m; ++i) w(units[i]) = a(i);
            for (int i = m; i < J; ++i) v(units[i]) = b(i - m);
            Vector W(2 * J);
            W << w, v;
            const double expanded = W.dot(q.P0 * W) + q.q0.dot(W) + 2.0 * pred.Xbar.squaredNorm();
            const double direct = (pred.Xbar - pred.X * w).squaredNorm() + (pred.Xbar - pred.X * v).squaredNorm();
            worst = std::max(worst, std::abs(expanded - direct));
            complement = complement && W.dot(q.P1 * W) == 0.0;
        }
    }
    return {worst <= 1e-9 && complement,
            "1000 points, max |difference| " + fmt("%.2e", worst) + (complement ? ", complementarity exact" : ", complementarity violated")};
}

// Criterion 10
Outcome bias_bound_grid() {
    BiasBoundInputs base;
    base.T_E = 4;
    const double hand = bias_bound(base);
    int violations = 0, comparisons = 0;
    const double grid[] = {0.5, 1.0, 2.0, 4.0};
    using Field = double BiasBoundInputs::*;
    const std::pair<Field, int> fields[] = {
        {&BiasBoundInputs::T_E, -1},       {&BiasBoundInputs::zeta_lo, -1}, {&BiasBoundInputs::J, +1},
        {&BiasBoundInputs::F, +1},         {&BiasBoundInputs::sigma_bar, +1}, {&BiasBoundInputs::lambda_bar, +1},
        {&BiasBoundInputs::eta_bar, +1},
    };
    for (const auto& [field, sign] : fields) {
        for (const double a : grid)
            for (const double b : grid)
                for (const double c : grid) {
                    BiasBoundInputs in;
                    in.lambda_bar = a;
                    in.eta_bar = b;
                    in.sigma_bar = c;
                    in.T_E = 4;
                    double previous = 0.0;
                    for (int step = 0; step < 5; ++step) {
                        in.*field = 0.5 * std::pow(2.0, step);
                        const double value = bias_bound(in);
                        if (step > 0) {
                            ++comparisons;
                            if (sign > 0 ? !(value > previous) : !(value < previous)) ++violations;
                        }
                        previous = value;
                    }
                }
    }
    return {std::abs(hand - 2.0) <= 1e-12 && violations == 0,
            "hand example " + fmt("%.15g", hand) + ", " + std::to_string(comparisons) + " monotone steps, " +
                std::to_string(violations) + " violations"};
}

}  // namespace

int main() {
    report(1, "MAE of the published estimates", mae_reproduction);
    report(2, "design objectives match the brute-force oracle", design_oracle);
    report(3, "simplex least-squares kernel", simplex_kernel);
    report(4, "ATT dual-form identity", att_identity);

    FactorModelConfig base;
    base.seed = 20250101;
    ReplicationOptions opts;
    opts.threads = 0;
    const std::vector<double> alphas{0.05, 0.1};

    FactorModelConfig null_cfg = base;
    null_cfg.null_mode = true;
    CalibrationReport null_rep;
    report(5, "null calibration over 500 replications", [&] {
        null_rep = run_replications(null_cfg, DesignSpec{}, 500, alphas, opts);
        const double r10 = rate_at(null_rep, 0.1, 500), r05 = rate_at(null_rep, 0.05, 500);
        const bool ok = null_rep.failures == 0 && r10 >= 0.05 && r10 <= 0.15 && r05 >= 0.01 && r05 <= 0.10;
        return Outcome{ok, "Pr(p<=0.10) " + fmt("%.3f", r10) + ", Pr(p<=0.05) " + fmt("%.3f", r05) + ", failures " +
                               std::to_string(null_rep.failures)};
    });

    CalibrationReport alt_rep;
    report(6, "power against the alternative", [&] {
        alt_rep = run_replications(base, DesignSpec{}, 200, alphas, opts);
        const double alt = rate_at(alt_rep, 0.05, 200);
        const double null = rate_at(null_rep, 0.05, 200);
        return Outcome{alt_rep.failures == 0 && alt - null >= 0.3,
                       "rejection at 0.05: alternative " + fmt("%.3f", alt) + ", null " + fmt("%.3f", null)};
    });

    const SimulatedPanel fixed = generate_panel(base);
    report(7, "saturation of penalized and unit-level weights", [&] { return saturation(fixed); });
    report(8, "constrained at m=7 equals unconstrained", [&] { return capacity(fixed); });
    report(9, "QCQP export reproduces the design objective", qcqp);
    report(10, "bias bound diagnostic", bias_bound_grid);

    report(11, "median p-value grows with noise", [&] {
        std::vector<double> medians{alt_rep.median_p_value};
        for (const double s2 : {5.0, 10.0}) {
            FactorModelConfig cfg = base;
            cfg.sigma2 = s2;
            medians.push_back(run_replications(cfg, DesignSpec{}, 200, alphas, opts).median_p_value);
        }
        int inversions = 0;
        for (std::size_t i = 1; i < medians.size(); ++i)
            if (medians[i] < medians[i - 1]) ++inversions;
        return Outcome{inversions <= 1, "medians " + fmt("%.4f", medians[0]) + ", " + fmt("%.4f", medians[1]) + ", " +
                                            fmt("%.4f", medians[2]) + "; inversions " + std::to_string(inversions)};
    });

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ALL PASSED" : "FAILED", failures);
    return failures == 0 ? 0 : 1;
}

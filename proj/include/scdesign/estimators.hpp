#pragma once

#include "scdesign/designs.hpp"
#include "scdesign/panel.hpp"

#include <vector>

namespace scdesign {

enum class Estimand { ATE, ATT };

const char* to_string(Estimand estimand) noexcept;

/// Weighted treated-minus-control gaps. `per_period` is aligned with
/// `experimental_periods` and `placebo` with `blank_periods` (0-based, ascending).
struct EffectEstimate {
    Estimand estimand = Estimand::ATE;
    std::vector<int> experimental_periods;
    Vector per_period;
    std::vector<int> blank_periods;
    Vector placebo;
    bool bias_corrected = false;
};

EffectEstimate estimate_ate(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part);

/// Requires unit-level control weights. Both the aggregated form and the
/// per-treated-unit form are evaluated and checked against each other.
EffectEstimate estimate_att(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part);

struct BiasCorrectionOptions {
    double ridge = 1e-8;
    bool intercept = true;
};

/// Outcome-model correction: for every experimental and blank period the
/// untreated outcomes are regressed on `features` (p x J, one column per unit).
/// Untreated units get leave-one-out predictions, treated units the full fit.
EffectEstimate estimate_bias_corrected(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part,
                                       const Matrix& features, const BiasCorrectionOptions& options = {});

/// Same, with the predictor columns as features.
EffectEstimate estimate_bias_corrected(const PanelData& panel, const DesignSolution& sol, const PredictorSet& pred,
                                       const BiasCorrectionOptions& options = {});

/// Mean absolute difference between estimates and truth.
double mae(const Vector& estimates, const Vector& truth);

struct BiasBoundInputs {
    double lambda_bar = 1.0;
    double eta_bar = 1.0;
    double F = 1.0;
    double zeta_lo = 1.0;
    double J = 1.0;
    double sigma_bar = 1.0;
    int q = 2;
    double T_E = 1.0;
};

/// lambda(eta + lambda) F / zeta * J^(1/q) * sqrt(2) sigma (q Gamma(q/2))^(1/q) / sqrt(T_E).
double bias_bound(const BiasBoundInputs& in);

}  // namespace scdesign

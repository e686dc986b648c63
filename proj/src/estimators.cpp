#include "scdesign/estimators.hpp"

#include "scdesign/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace scdesign {

const char* to_string(Estimand estimand) noexcept {
    return estimand == Estimand::ATT ? "ATT" : "ATE";
}

namespace {

void check_shapes(const PanelData& panel, const DesignSolution& sol) {
    if (sol.w.size() != panel.J() || sol.v.size() != panel.J()) {
        throw Error(ErrorCode::DimensionMismatch, "design weights do not match the panel's unit count");
    }
}

void check_observed(const PanelData& panel, const std::vector<int>& periods) {
    for (const int t : periods) {
        if (t < 0 || t >= panel.T()) throw Error(ErrorCode::DimensionMismatch, "period index out of range");
        if (panel.has_missing_in(t)) {
            throw Error(ErrorCode::MissingOutcome, "outcomes for period " +
                                                       (panel.period_ids().empty() ? std::to_string(t + 1)
                                                                                   : panel.period_ids()[t]) +
                                                       " are not observed");
        }
    }
}

Vector gaps(const Matrix& Y, const Vector& w, const Vector& v, const std::vector<int>& periods) {
    Vector out(static_cast<int>(periods.size()));
    for (std::size_t a = 0; a < periods.size(); ++a) {
        const auto col = Y.col(periods[a]);
        out(static_cast<int>(a)) = w.dot(col) - v.dot(col);
    }
    return out;
}

EffectEstimate skeleton(const PeriodPartition& part, Estimand estimand) {
    EffectEstimate est;
    est.estimand = estimand;
    est.experimental_periods = part.experimental;
    est.blank_periods = part.blank;
    return est;
}

// Ridge fit with an unpenalised intercept; returns predictions at `query`.
class RidgeFit {
public:
    RidgeFit(const Matrix& features, const Vector& y, const BiasCorrectionOptions& opt) : intercept_(0.0) {
        const int n = static_cast<int>(features.cols());
        const int p = static_cast<int>(features.rows());
        Vector mean = Vector::Zero(p);
        double y_mean = 0.0;
        if (opt.intercept && n > 0) {
            mean = features.rowwise().mean();
            y_mean = y.mean();
        }
        mean_ = mean;
        if (p == 0) {
            beta_ = Vector::Zero(0);
            intercept_ = y_mean;
            return;
        }
        Matrix A = Matrix::Zero(n + (opt.ridge > 0.0 ? p : 0), p);
        Vector b = Vector::Zero(A.rows());
        A.topRows(n) = (features.colwise() - mean).transpose();
        b.head(n) = y.array() - y_mean;
        if (opt.ridge > 0.0) A.bottomRows(p) = std::sqrt(opt.ridge) * Matrix::Identity(p, p);
        Eigen::ColPivHouseholderQR<Matrix> qr(A);
        qr.setThreshold(1e-12);
        if (qr.rank() < p) {
            throw Error(ErrorCode::SingularRegression, "outcome regression is rank deficient (" +
                                                           std::to_string(qr.rank()) + " < " + std::to_string(p) +
                                                           "); use a positive ridge");
        }
        beta_ = qr.solve(b);
        intercept_ = y_mean;
    }

    double predict(const Vector& x) const {
        if (beta_.size() == 0) return intercept_;
        return intercept_ + beta_.dot(x - mean_);
    }

private:
    Vector mean_;
    Vector beta_;
    double intercept_;
};

}  // namespace

EffectEstimate estimate_ate(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part) {
    check_shapes(panel, sol);
    check_observed(panel, part.experimental);
    check_observed(panel, part.blank);
    const auto [w, v] = effective_weights(sol, panel.f());
    EffectEstimate est = skeleton(part, Estimand::ATE);
    est.per_period = gaps(panel.Y(), w, v, part.experimental);
    est.placebo = gaps(panel.Y(), w, v, part.blank);
    return est;
}

EffectEstimate estimate_att(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part) {
    if (!sol.v_unit) throw Error(ErrorCode::MissingUnitLevelWeights, "ATT needs unit-level control weights");
    check_shapes(panel, sol);
    const Matrix& v_unit = *sol.v_unit;
    if (v_unit.rows() != panel.J() || v_unit.cols() != panel.J()) {
        throw Error(ErrorCode::DimensionMismatch, "unit-level weight matrix must be J x J");
    }
    check_observed(panel, part.experimental);
    check_observed(panel, part.blank);
    const auto [w, v] = effective_weights(sol, panel.f());
    const Matrix& Y = panel.Y();

    auto both_forms = [&](const std::vector<int>& periods) {
        Vector aggregated = gaps(Y, w, v, periods);
        Vector unit_level(static_cast<int>(periods.size()));
        for (std::size_t a = 0; a < periods.size(); ++a) {
            const Vector col = Y.col(periods[a]);
            const Vector controls = v_unit.transpose() * col;
            double total = 0.0;
            for (int j = 0; j < w.size(); ++j) {
                if (w(j) != 0.0) total += w(j) * (col(j) - controls(j));
            }
            unit_level(static_cast<int>(a)) = total;
            const double scale = std::max(1.0, col.cwiseAbs().maxCoeff());
            if (std::abs(total - aggregated(static_cast<int>(a))) > 1e-10 * scale) {
                throw Error(ErrorCode::FormMismatch, "aggregated and unit-level ATT forms disagree in period " +
                                                         std::to_string(periods[a] + 1));
            }
        }
        return aggregated;
    };

    EffectEstimate est = skeleton(part, Estimand::ATT);
    est.per_period = both_forms(part.experimental);
    est.placebo = both_forms(part.blank);
    return est;
}

EffectEstimate estimate_bias_corrected(const PanelData& panel, const DesignSolution& sol, const PeriodPartition& part,
                                       const Matrix& features, const BiasCorrectionOptions& options) {
    check_shapes(panel, sol);
    if (features.cols() != panel.J()) {
        throw Error(ErrorCode::DimensionMismatch, "bias-correction features need one column per unit");
    }
    if (!(options.ridge >= 0.0) || !std::isfinite(options.ridge)) {
        throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
    }
    check_observed(panel, part.experimental);
    check_observed(panel, part.blank);

    std::vector<int> untreated;
    for (int j = 0; j < panel.J(); ++j) {
        if (!std::binary_search(sol.treated.begin(), sol.treated.end(), j)) untreated.push_back(j);
    }
    if (untreated.size() < 2) throw Error(ErrorCode::EmptyDonorPool, "bias correction needs at least two untreated units");

    const auto [w, v] = effective_weights(sol, panel.f());
    const Matrix& Y = panel.Y();
    const int J = panel.J();
    const int n = static_cast<int>(untreated.size());

    auto corrected = [&](const std::vector<int>& periods) {
        Vector out(static_cast<int>(periods.size()));
        for (std::size_t a = 0; a < periods.size(); ++a) {
            const int t = periods[a];
            Matrix Xu(features.rows(), n);
            Vector yu(n);
            for (int b = 0; b < n; ++b) {
                Xu.col(b) = features.col(untreated[b]);
                yu(b) = Y(untreated[b], t);
            }
            Vector residual(J);
            const RidgeFit full(Xu, yu, options);
            for (int j = 0; j < J; ++j) residual(j) = Y(j, t) - full.predict(features.col(j));
            for (int b = 0; b < n; ++b) {
                Matrix Xl(features.rows(), n - 1);
                Vector yl(n - 1);
                for (int c = 0, d = 0; c < n; ++c) {
                    if (c == b) continue;
                    Xl.col(d) = Xu.col(c);
                    yl(d++) = yu(c);
                }
                const RidgeFit loo(Xl, yl, options);
                const int j = untreated[b];
                residual(j) = Y(j, t) - loo.predict(features.col(j));
            }
            out(static_cast<int>(a)) = w.dot(residual) - v.dot(residual);
        }
        return out;
    };

    EffectEstimate est = skeleton(part, Estimand::ATE);
    est.per_period = corrected(part.experimental);
    est.placebo = corrected(part.blank);
    est.bias_corrected = true;
    return est;
}

EffectEstimate estimate_bias_corrected(const PanelData& panel, const DesignSolution& sol, const PredictorSet& pred,
                                       const BiasCorrectionOptions& options) {
    return estimate_bias_corrected(panel, sol, pred.partition, pred.X, options);
}

double mae(const Vector& estimates, const Vector& truth) {
    if (estimates.size() != truth.size()) {
        throw Error(ErrorCode::LengthMismatch, "estimates and truth have lengths " + std::to_string(estimates.size()) +
                                                   " and " + std::to_string(truth.size()));
    }
    if (estimates.size() == 0) throw Error(ErrorCode::LengthMismatch, "empty vectors");
    return (estimates - truth).cwiseAbs().mean();
}

double bias_bound(const BiasBoundInputs& in) {
    const double values[] = {in.lambda_bar, in.eta_bar, in.F, in.zeta_lo, in.J, in.sigma_bar, in.T_E};
    for (const double x : values) {
        if (!(x > 0.0) || !std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "bias-bound inputs must be positive");
    }
    if (in.q < 1) throw Error(ErrorCode::InvalidArgument, "q must be a positive integer");
    const double q = in.q;
    const double moment = std::exp((std::log(q) + std::lgamma(q / 2.0)) / q);
    return in.lambda_bar * (in.eta_bar + in.lambda_bar) * in.F / in.zeta_lo * std::pow(in.J, 1.0 / q) *
           std::sqrt(2.0) * in.sigma_bar * moment / std::sqrt(in.T_E);
}

}  // namespace scdesign

#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace scdesign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Outcomes, covariates and population weights for J units over T periods.
///
/// Y is J x T; a NaN entry marks an outcome that is not observed yet, which is
/// only permitted after the first T0 periods. Weights are rescaled to sum to
/// one on construction. Instances are immutable.
class PanelData {
public:
    PanelData(Matrix Y, Matrix Z, std::optional<Vector> weights, int T0,
              std::vector<std::string> unit_ids = {}, std::vector<std::string> period_ids = {});

    int J() const { return static_cast<int>(Y_.rows()); }
    int T() const { return static_cast<int>(Y_.cols()); }
    int T0() const { return T0_; }
    int T1() const { return T() - T0_; }
    int r() const { return static_cast<int>(Z_.cols()); }

    const Matrix& Y() const { return Y_; }
    const Matrix& Z() const { return Z_; }
    const Vector& f() const { return f_; }
    const std::vector<std::string>& unit_ids() const { return unit_ids_; }
    const std::vector<std::string>& period_ids() const { return period_ids_; }

    /// Copy with a different outcome matrix (same shape); used once post-period
    /// outcomes become available.
    PanelData with_outcomes(Matrix Y) const;

    bool has_missing_in(int period) const;

private:
    Matrix Y_;
    Matrix Z_;
    Vector f_;
    int T0_;
    std::vector<std::string> unit_ids_;
    std::vector<std::string> period_ids_;
};

/// Split of the pre-intervention periods into fitting and blank periods.
/// Indices are 0-based positions into the panel's period axis.
struct PeriodPartition {
    std::vector<int> fitting;
    std::vector<int> blank;
    std::vector<int> experimental;

    int T_E() const { return static_cast<int>(fitting.size()); }
    int T_B() const { return static_cast<int>(blank.size()); }
};

/// Partition with an explicit fitting set; blank periods are the remaining
/// pre-intervention periods in ascending order.
PeriodPartition make_partition(const PanelData& panel, std::vector<int> fitting);

/// Fitting periods are the first T_E periods.
PeriodPartition default_partition(const PanelData& panel, int T_E);

/// Predictor matrix with column j = (Y_j over the fitting periods; Z_j).
struct PredictorSet {
    Matrix X;                         // M x J
    Vector Xbar;                      // f-weighted average of the columns
    Vector scale;                     // divisor applied to each row (1 when unscaled)
    std::vector<bool> zero_variance;  // rows left unscaled because their spread is zero
    Vector f;
    PeriodPartition partition;

    int M() const { return static_cast<int>(X.rows()); }
    int J() const { return static_cast<int>(X.cols()); }
};

PredictorSet build_predictors(const PanelData& panel, const PeriodPartition& part, bool scaling = true);

// File formats: see README. Outcomes are long form `unit,period,value`;
// an empty value or NA marks a missing outcome.
PanelData load_panel(const std::filesystem::path& outcome_file,
                     const std::filesystem::path& covariate_file,
                     std::optional<Vector> weights, int T0);

/// Reads a `unit,f` weights file and orders it by the given unit labels.
Vector load_weights(const std::filesystem::path& weights_file, const std::vector<std::string>& unit_ids);

void save_panel(const PanelData& panel, const std::filesystem::path& outcome_file,
                const std::filesystem::path& covariate_file,
                const std::optional<std::filesystem::path>& weights_file = std::nullopt);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_exact(double value);

}  // namespace scdesign

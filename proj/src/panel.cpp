#include "scdesign/panel.hpp"

#include "scdesign/error.hpp"
#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace scdesign {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using csv::CsvTable;
using csv::is_missing_token;
using csv::parse_number;
using csv::read_csv;

}  // namespace

std::string format_exact(double value) {
    if (std::isnan(value)) return "";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

PanelData::PanelData(Matrix Y, Matrix Z, std::optional<Vector> weights, int T0,
                     std::vector<std::string> unit_ids, std::vector<std::string> period_ids)
    : Y_(std::move(Y)), Z_(std::move(Z)), T0_(T0), unit_ids_(std::move(unit_ids)), period_ids_(std::move(period_ids)) {
    const int J = static_cast<int>(Y_.rows());
    const int T = static_cast<int>(Y_.cols());
    if (J < 2) throw Error(ErrorCode::InvalidArgument, "panel needs at least two units");
    if (Z_.rows() != J) {
        if (Z_.size() == 0) {
            Z_.resize(J, 0);
        } else {
            throw Error(ErrorCode::DimensionMismatch, "covariate rows do not match unit count");
        }
    }
    if (T0_ < 1 || T0_ >= T) {
        throw Error(ErrorCode::InvalidArgument,
                    "need 1 <= T0 < T (T0=" + std::to_string(T0_) + ", T=" + std::to_string(T) + ")");
    }
    if (unit_ids_.empty()) {
        for (int j = 0; j < J; ++j) unit_ids_.push_back(std::to_string(j + 1));
    }
    if (period_ids_.empty()) {
        for (int t = 0; t < T; ++t) period_ids_.push_back(std::to_string(t + 1));
    }
    if (static_cast<int>(unit_ids_.size()) != J || static_cast<int>(period_ids_.size()) != T) {
        throw Error(ErrorCode::DimensionMismatch, "label count does not match panel shape");
    }
    {
        std::vector<std::string> sorted = unit_ids_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            throw Error(ErrorCode::DuplicateUnit, "duplicate unit label");
        }
    }

    if (weights) {
        if (weights->size() != J) throw Error(ErrorCode::DimensionMismatch, "weight count does not match unit count");
        for (int j = 0; j < J; ++j) {
            if (!((*weights)(j) > 0.0) || !std::isfinite((*weights)(j))) {
                throw Error(ErrorCode::NonpositiveWeight, "weight of unit " + unit_ids_[j] + " is not positive");
            }
        }
        f_ = *weights / weights->sum();
    } else {
        f_ = Vector::Constant(J, 1.0 / J);
    }

    for (int j = 0; j < J; ++j) {
        for (int t = 0; t < T0_; ++t) {
            if (!std::isfinite(Y_(j, t))) {
                throw Error(ErrorCode::MissingPrePeriodValue,
                            "unit " + unit_ids_[j] + ", period " + period_ids_[t]);
            }
        }
        for (int t = T0_; t < T; ++t) {
            if (std::isinf(Y_(j, t))) throw Error(ErrorCode::MalformedFile, "infinite outcome");
        }
        for (int c = 0; c < Z_.cols(); ++c) {
            if (!std::isfinite(Z_(j, c))) {
                throw Error(ErrorCode::MissingPrePeriodValue, "missing covariate for unit " + unit_ids_[j]);
            }
        }
    }
}

PanelData PanelData::with_outcomes(Matrix Y) const {
    if (Y.rows() != Y_.rows() || Y.cols() != Y_.cols()) {
        throw Error(ErrorCode::DimensionMismatch, "outcome matrix shape differs from panel");
    }
    return PanelData(std::move(Y), Z_, f_, T0_, unit_ids_, period_ids_);
}

bool PanelData::has_missing_in(int period) const { return Y_.col(period).hasNaN(); }

PeriodPartition make_partition(const PanelData& panel, std::vector<int> fitting) {
    if (fitting.empty()) throw Error(ErrorCode::EmptyFittingSet, "no fitting periods");
    std::sort(fitting.begin(), fitting.end());
    if (std::adjacent_find(fitting.begin(), fitting.end()) != fitting.end()) {
        throw Error(ErrorCode::InvalidArgument, "duplicate fitting period");
    }
    if (fitting.front() < 0 || fitting.back() >= panel.T0()) {
        throw Error(ErrorCode::InvalidArgument, "fitting periods must be pre-intervention periods");
    }
    PeriodPartition part;
    part.fitting = std::move(fitting);
    for (int t = 0; t < panel.T0(); ++t) {
        if (!std::binary_search(part.fitting.begin(), part.fitting.end(), t)) part.blank.push_back(t);
    }
    for (int t = panel.T0(); t < panel.T(); ++t) part.experimental.push_back(t);
    return part;
}

PeriodPartition default_partition(const PanelData& panel, int T_E) {
    if (T_E < 1 || T_E > panel.T0()) {
        throw Error(ErrorCode::InvalidFittingCount,
                    "fitting count " + std::to_string(T_E) + " outside [1, " + std::to_string(panel.T0()) + "]");
    }
    std::vector<int> fitting(T_E);
    std::iota(fitting.begin(), fitting.end(), 0);
    return make_partition(panel, std::move(fitting));
}

PredictorSet build_predictors(const PanelData& panel, const PeriodPartition& part, bool scaling) {
    if (part.fitting.empty()) throw Error(ErrorCode::EmptyFittingSet, "no fitting periods");
    const int J = panel.J();
    const int T_E = part.T_E();
    const int M = T_E + panel.r();

    PredictorSet pred;
    pred.partition = part;
    pred.f = panel.f();
    pred.X.resize(M, J);
    for (int j = 0; j < J; ++j) {
        for (int e = 0; e < T_E; ++e) pred.X(e, j) = panel.Y()(j, part.fitting[e]);
        for (int c = 0; c < panel.r(); ++c) pred.X(T_E + c, j) = panel.Z()(j, c);
    }
    pred.scale = Vector::Ones(M);
    pred.zero_variance.assign(M, false);
    if (scaling) {
        for (int i = 0; i < M; ++i) {
            const double mean = pred.X.row(i).mean();
            const double ss = (pred.X.row(i).array() - mean).square().sum();
            const double sd = std::sqrt(ss / (J - 1));
            if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
                pred.zero_variance[i] = true;
                continue;
            }
            pred.scale(i) = sd;
            pred.X.row(i) /= sd;
        }
    }
    pred.Xbar = pred.X * pred.f;
    return pred;
}

Vector load_weights(const std::filesystem::path& weights_file, const std::vector<std::string>& unit_ids) {
    const CsvTable table = read_csv(weights_file);
    if (table.header.size() != 2 || table.header[0] != "unit") {
        throw Error(ErrorCode::MalformedFile, weights_file.string() + ": expected header unit,f");
    }
    std::unordered_map<std::string, double> by_unit;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        const double value = parse_number(row[1], weights_file, table.line_numbers[k]);
        if (!by_unit.emplace(row[0], value).second) throw Error(ErrorCode::DuplicateUnit, "unit " + row[0]);
    }
    if (by_unit.size() != unit_ids.size()) {
        throw Error(ErrorCode::MalformedFile, weights_file.string() + ": unit set differs from outcome file");
    }
    Vector f(static_cast<Eigen::Index>(unit_ids.size()));
    for (std::size_t j = 0; j < unit_ids.size(); ++j) {
        const auto it = by_unit.find(unit_ids[j]);
        if (it == by_unit.end()) throw Error(ErrorCode::MalformedFile, "no weight for unit " + unit_ids[j]);
        f(static_cast<Eigen::Index>(j)) = it->second;
    }
    return f;
}

PanelData load_panel(const std::filesystem::path& outcome_file, const std::filesystem::path& covariate_file,
                     std::optional<Vector> weights, int T0) {
    const CsvTable outcomes = read_csv(outcome_file);
    if (outcomes.header != std::vector<std::string>{"unit", "period", "value"}) {
        throw Error(ErrorCode::MalformedFile, outcome_file.string() + ": expected header unit,period,value");
    }
    std::vector<std::string> units, periods;
    std::unordered_map<std::string, int> unit_index, period_index;
    for (const auto& row : outcomes.rows) {
        if (unit_index.emplace(row[0], static_cast<int>(units.size())).second) units.push_back(row[0]);
        if (period_index.emplace(row[1], static_cast<int>(periods.size())).second) periods.push_back(row[1]);
    }
    const int J = static_cast<int>(units.size());
    const int T = static_cast<int>(periods.size());
    Matrix Y = Matrix::Constant(J, T, kNaN);
    std::vector<char> seen(static_cast<std::size_t>(J) * T, 0);
    for (std::size_t k = 0; k < outcomes.rows.size(); ++k) {
        const auto& row = outcomes.rows[k];
        const int j = unit_index.at(row[0]);
        const int t = period_index.at(row[1]);
        auto& flag = seen[static_cast<std::size_t>(j) * T + t];
        if (flag) {
            throw Error(ErrorCode::MalformedFile, outcome_file.string() + ":" +
                                                      std::to_string(outcomes.line_numbers[k]) +
                                                      ": repeated (unit, period) row");
        }
        flag = 1;
        if (!is_missing_token(row[2])) Y(j, t) = parse_number(row[2], outcome_file, outcomes.line_numbers[k]);
    }

    const CsvTable covariates = read_csv(covariate_file);
    if (covariates.header.empty() || covariates.header[0] != "unit") {
        throw Error(ErrorCode::MalformedFile, covariate_file.string() + ": first column must be unit");
    }
    const int r = static_cast<int>(covariates.header.size()) - 1;
    Matrix Z = Matrix::Constant(J, r, kNaN);
    std::vector<char> unit_seen(J, 0);
    for (std::size_t k = 0; k < covariates.rows.size(); ++k) {
        const auto& row = covariates.rows[k];
        const auto it = unit_index.find(row[0]);
        if (it == unit_index.end()) {
            throw Error(ErrorCode::MalformedFile, covariate_file.string() + ": unit " + row[0] +
                                                      " does not appear in the outcome file");
        }
        if (unit_seen[it->second]) throw Error(ErrorCode::DuplicateUnit, "unit " + row[0] + " in covariate file");
        unit_seen[it->second] = 1;
        for (int c = 0; c < r; ++c) {
            Z(it->second, c) = parse_number(row[c + 1], covariate_file, covariates.line_numbers[k]);
        }
    }
    for (int j = 0; j < J; ++j) {
        if (!unit_seen[j]) {
            throw Error(ErrorCode::MalformedFile, covariate_file.string() + ": no row for unit " + units[j]);
        }
    }
    return PanelData(std::move(Y), std::move(Z), std::move(weights), T0, std::move(units), std::move(periods));
}

void save_panel(const PanelData& panel, const std::filesystem::path& outcome_file,
                const std::filesystem::path& covariate_file,
                const std::optional<std::filesystem::path>& weights_file) {
    {
        std::ofstream out(outcome_file);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + outcome_file.string());
        out << "unit,period,value\n";
        for (int j = 0; j < panel.J(); ++j) {
            for (int t = 0; t < panel.T(); ++t) {
                out << panel.unit_ids()[j] << ',' << panel.period_ids()[t] << ',' << format_exact(panel.Y()(j, t))
                    << '\n';
            }
        }
    }
    {
        std::ofstream out(covariate_file);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + covariate_file.string());
        out << "unit";
        for (int c = 0; c < panel.r(); ++c) out << ",z" << (c + 1);
        out << '\n';
        for (int j = 0; j < panel.J(); ++j) {
            out << panel.unit_ids()[j];
            for (int c = 0; c < panel.r(); ++c) out << ',' << format_exact(panel.Z()(j, c));
            out << '\n';
        }
    }
    if (weights_file) {
        std::ofstream out(*weights_file);
        if (!out) throw Error(ErrorCode::Io, "cannot write " + weights_file->string());
        out << "unit,f\n";
        for (int j = 0; j < panel.J(); ++j) out << panel.unit_ids()[j] << ',' << format_exact(panel.f()(j)) << '\n';
    }
}

}  // namespace scdesign

#pragma once

#include "scdesign/designs.hpp"
#include "scdesign/estimators.hpp"
#include "scdesign/inference.hpp"
#include "scdesign/panel.hpp"
#include "scdesign/simulate.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace scdesign::io {

using Json = nlohmann::json;

/// Value rounded to `digits` significant decimal digits.
double round_sig(double value, int digits = 12);

/// Rounded number, or null for NaN/inf.
Json number(double value);

/// Pretty-printed with sorted keys and a trailing newline.
std::string dump(const Json& doc);

Json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

Json design_to_json(const DesignSolution& sol, const std::vector<std::string>& unit_ids);
DesignSolution design_from_json(const Json& doc, const std::vector<std::string>& unit_ids);

/// Fixed-width table of w and v per unit, two decimals.
std::string design_table(const DesignSolution& sol, const std::vector<std::string>& unit_ids);

Json estimate_to_json(const EffectEstimate& est, const std::vector<std::string>& period_ids,
                      const std::optional<Vector>& truth = std::nullopt);
/// With no period labels the periods are numbered by position (blank first).
EffectEstimate estimate_from_json(const Json& doc, const std::vector<std::string>& period_ids);

Json inference_to_json(const InferenceResult& res);

Json config_to_json(const FactorModelConfig& cfg);
Json calibration_to_json(const CalibrationReport& report);
Json sweep_to_json(const std::vector<NoiseSweepRow>& rows);
std::string replications_csv(const CalibrationReport& report);

Json qcqp_to_json(const QcqpExport& q, const PredictorSet& pred);

/// outcomes.csv, covariates.csv, weights.csv, potential.csv and truth.csv.
void write_simulation(const SimulatedPanel& sim, const std::filesystem::path& dir);

/// Post-period outcomes taken from a `unit,period,y_n,y_i` file according to
/// the treated set.
PanelData realize_from_potential(const PanelData& panel, const std::filesystem::path& potential_file,
                                 const std::vector<int>& treated);

/// True effects for the given periods from a `period,tau` file.
Vector read_truth(const std::filesystem::path& truth_file, const std::vector<std::string>& period_ids,
                  const std::vector<int>& periods);

/// paths.csv, gap.csv and summary.json.
void write_report(const PanelData& panel, const DesignSolution& sol, const std::optional<Json>& estimate,
                  const std::optional<Json>& inference, const std::filesystem::path& dir);

}  // namespace scdesign::io

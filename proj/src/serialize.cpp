#include "scdesign/serialize.hpp"

#include "scdesign/error.hpp"
#include "csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

namespace scdesign::io {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void malformed(const std::string& what) { throw Error(ErrorCode::MalformedFile, what); }

Json vector_json(const Vector& v) {
    Json out = Json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
    return out;
}

Json matrix_json(const Matrix& m) {
    Json out = Json::array();
    for (int i = 0; i < m.rows(); ++i) out.push_back(vector_json(m.row(i).transpose()));
    return out;
}

Json strings_json(const std::vector<std::string>& ids, const std::vector<int>& idx) {
    Json out = Json::array();
    for (const int i : idx) out.push_back(ids.at(i));
    return out;
}

std::string text_number(double value) {
    if (!std::isfinite(value)) return "";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return buf;
}

std::unordered_map<std::string, int> index_of(const std::vector<std::string>& ids) {
    std::unordered_map<std::string, int> out;
    for (int i = 0; i < static_cast<int>(ids.size()); ++i) out.emplace(ids[i], i);
    return out;
}

Vector read_vector(const Json& doc, const char* key, int expected) {
    if (!doc.contains(key) || !doc[key].is_array()) malformed(std::string("missing array '") + key + "'");
    const Json& arr = doc[key];
    if (static_cast<int>(arr.size()) != expected) {
        malformed(std::string("array '") + key + "' has " + std::to_string(arr.size()) + " entries, expected " +
                  std::to_string(expected));
    }
    Vector out(expected);
    for (int i = 0; i < expected; ++i) {
        if (!arr[i].is_number()) malformed(std::string("non-numeric entry in '") + key + "'");
        out(i) = arr[i].get<double>();
    }
    return out;
}

std::vector<int> read_periods(const Json& arr, const std::vector<std::string>& period_ids, int offset) {
    std::vector<int> out;
    if (period_ids.empty()) {
        for (std::size_t k = 0; k < arr.size(); ++k) out.push_back(offset + static_cast<int>(k));
        return out;
    }
    const auto lookup = index_of(period_ids);
    for (const Json& p : arr) {
        const std::string id = p.is_string() ? p.get<std::string>() : p.dump();
        const auto it = lookup.find(id);
        if (it == lookup.end()) malformed("period '" + id + "' is not in the panel");
        out.push_back(it->second);
    }
    return out;
}

Json spec_json(const ResolvedSpec& spec) {
    Json out = {{"kind", to_string(spec.kind)},
                {"m_lo", spec.m_lo},
                {"m_hi", spec.m_hi},
                {"enumeration_cap", spec.enumeration_cap},
                {"tolerance", number(spec.tolerance)}};
    switch (spec.kind) {
        case DesignKind::Penalized:
            out["lambda1"] = number(spec.lambda1);
            out["lambda2"] = number(spec.lambda2);
            break;
        case DesignKind::Clustered:
            out["n_clusters"] = spec.n_clusters;
            out["cluster_seed"] = spec.cluster_seed;
            out["cluster_restarts"] = spec.cluster_restarts;
            [[fallthrough]];
        case DesignKind::UnitLevel:
            out["xi"] = number(spec.xi);
            out["lambda1"] = number(spec.lambda1);
            out["lambda2"] = number(spec.lambda2);
            break;
        default:
            break;
    }
    if (spec.budget) out["budget"] = {{"cost", vector_json(spec.budget->cost)}, {"bound", number(spec.budget->bound)}};
    return out;
}

}  // namespace

double round_sig(double value, int digits) {
    if (!std::isfinite(value) || value == 0.0) return value;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", digits - 1, value);
    return std::strtod(buf, nullptr);
}

Json number(double value) {
    if (!std::isfinite(value)) return nullptr;
    return round_sig(value);
}

std::string dump(const Json& doc) { return doc.dump(2) + "\n"; }

Json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MissingUpstreamArtifact, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        malformed(path.string() + ": " + e.what());
    }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

Json design_to_json(const DesignSolution& sol, const std::vector<std::string>& unit_ids) {
    Json doc = {{"kind", to_string(sol.kind)},
                {"units", unit_ids},
                {"treated", strings_json(unit_ids, sol.treated)},
                {"w", vector_json(sol.w)},
                {"v", vector_json(sol.v)},
                {"objective", number(sol.objective)},
                {"evaluated_subsets", sol.evaluated_subsets},
                {"spec", spec_json(sol.spec)}};
    if (sol.v_unit) {
        Json vu = Json::object();
        for (const int j : sol.treated) vu[unit_ids.at(j)] = vector_json(sol.v_unit->col(j));
        doc["v_unit"] = vu;
    }
    if (sol.cluster_assignment) {
        Json labels = Json::array();
        for (const int k : *sol.cluster_assignment) labels.push_back(k + 1);
        doc["cluster_assignment"] = labels;
    }
    return doc;
}

DesignSolution design_from_json(const Json& doc, const std::vector<std::string>& unit_ids) {
    try {
        const int J = static_cast<int>(unit_ids.size());
        if (!doc.is_object()) malformed("design file is not a JSON object");
        if (!doc.contains("units") || doc["units"].get<std::vector<std::string>>() != unit_ids) {
            malformed("design units do not match the panel");
        }
        DesignSolution sol;
        const auto kind = parse_design_kind(doc.at("kind").get<std::string>());
        if (!kind) malformed("unknown design kind");
        sol.kind = *kind;
        const auto lookup = index_of(unit_ids);
        for (const Json& id : doc.at("treated")) {
            const auto it = lookup.find(id.get<std::string>());
            if (it == lookup.end()) malformed("treated unit '" + id.get<std::string>() + "' is not in the panel");
            sol.treated.push_back(it->second);
        }
        std::sort(sol.treated.begin(), sol.treated.end());
        sol.w = read_vector(doc, "w", J);
        sol.v = read_vector(doc, "v", J);
        sol.objective = doc.at("objective").is_number() ? doc["objective"].get<double>() : kNaN;
        sol.evaluated_subsets = doc.value("evaluated_subsets", std::uint64_t{0});
        if (doc.contains("v_unit")) {
            Matrix vu = Matrix::Zero(J, J);
            for (const auto& [id, col] : doc["v_unit"].items()) {
                const auto it = lookup.find(id);
                if (it == lookup.end()) malformed("v_unit refers to unknown unit '" + id + "'");
                const Json wrapper = {{"c", col}};
                vu.col(it->second) = read_vector(wrapper, "c", J);
            }
            sol.v_unit = std::move(vu);
        }
        if (doc.contains("cluster_assignment")) {
            std::vector<int> labels;
            for (const Json& k : doc["cluster_assignment"]) labels.push_back(k.get<int>() - 1);
            if (static_cast<int>(labels.size()) != J) malformed("cluster_assignment has the wrong length");
            sol.cluster_assignment = std::move(labels);
        }
        const Json& s = doc.at("spec");
        ResolvedSpec& r = sol.spec;
        r.kind = sol.kind;
        r.m_lo = s.value("m_lo", 1);
        r.m_hi = s.value("m_hi", J - 1);
        r.xi = s.value("xi", 1.0);
        r.lambda1 = s.value("lambda1", 0.0);
        r.lambda2 = s.value("lambda2", 0.0);
        r.n_clusters = s.value("n_clusters", 1);
        r.enumeration_cap = s.value("enumeration_cap", std::uint64_t{2'000'000});
        r.cluster_seed = s.value("cluster_seed", std::uint64_t{0});
        r.cluster_restarts = s.value("cluster_restarts", 10);
        r.tolerance = s.value("tolerance", 1e-10);
        if (s.contains("budget")) r.budget = Budget{read_vector(s["budget"], "cost", J), s["budget"].at("bound").get<double>()};
        return sol;
    } catch (const Json::exception& e) {
        malformed(std::string("design file: ") + e.what());
    }
}

std::string design_table(const DesignSolution& sol, const std::vector<std::string>& unit_ids) {
    std::size_t width = 6;
    for (const auto& id : unit_ids) width = std::max(width, id.size() + 1);
    std::ostringstream out;
    auto cell = [&](const std::string& s, std::size_t w) { out << std::string(w > s.size() ? w - s.size() : 1, ' ') << s; };
    auto fixed2 = [](double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", x == 0.0 ? 0.0 : x);
        return std::string(buf);
    };
    out << "unit";
    out << std::string(4, ' ');
    for (const auto& id : unit_ids) cell(id, width);
    out << '\n';
    const std::pair<const char*, const Vector*> rows[] = {{"w*", &sol.w}, {"v*", &sol.v}};
    for (const auto& [label, vec] : rows) {
        out << label << std::string(6, ' ');
        for (int j = 0; j < vec->size(); ++j) {
            // -0.00 from tiny negative rounding noise reads as 0.00
            const double x = std::abs((*vec)(j)) < 0.005 ? 0.0 : (*vec)(j);
            cell(fixed2(x), width);
        }
        out << '\n';
    }
    return out.str();
}

Json estimate_to_json(const EffectEstimate& est, const std::vector<std::string>& period_ids,
                      const std::optional<Vector>& truth) {
    Json doc = {{"estimand", to_string(est.estimand)},
                {"bias_corrected", est.bias_corrected},
                {"experimental", {{"periods", strings_json(period_ids, est.experimental_periods)},
                                  {"tau_hat", vector_json(est.per_period)}}},
                {"blank", {{"periods", strings_json(period_ids, est.blank_periods)}, {"u_hat", vector_json(est.placebo)}}}};
    if (truth) {
        doc["truth"] = vector_json(*truth);
        doc["mae"] = number(mae(est.per_period, *truth));
    }
    return doc;
}

EffectEstimate estimate_from_json(const Json& doc, const std::vector<std::string>& period_ids) {
    try {
        EffectEstimate est;
        const std::string estimand = doc.at("estimand").get<std::string>();
        if (estimand != "ATE" && estimand != "ATT") malformed("unknown estimand '" + estimand + "'");
        est.estimand = estimand == "ATT" ? Estimand::ATT : Estimand::ATE;
        est.bias_corrected = doc.value("bias_corrected", false);
        const Json& exp = doc.at("experimental");
        const Json& blank = doc.at("blank");
        est.blank_periods = read_periods(blank.at("periods"), period_ids, 0);
        est.experimental_periods =
            read_periods(exp.at("periods"), period_ids, static_cast<int>(est.blank_periods.size()));
        est.per_period = read_vector(exp, "tau_hat", static_cast<int>(est.experimental_periods.size()));
        est.placebo = read_vector(blank, "u_hat", static_cast<int>(est.blank_periods.size()));
        return est;
    } catch (const Json::exception& e) {
        malformed(std::string("estimate file: ") + e.what());
    }
}

Json inference_to_json(const InferenceResult& res) {
    Json doc = {{"p_value", {{"numerator", res.numerator}, {"denominator", res.denominator}, {"decimal", number(res.p_value)}}},
                {"mode", res.sampled ? "sampled" : "exact"},
                {"statistic", {{"name", to_string(res.statistic)}, {"observed", number(res.observed)}}},
                {"n_combinations", res.n_combinations},
                {"population", res.population}};
    if (res.sampled) doc["seed"] = res.seed;
    return doc;
}

Json config_to_json(const FactorModelConfig& cfg) {
    auto range = [](const Range& r) { return Json::array({number(r.lo), number(r.hi)}); };
    return {{"J", cfg.J},
            {"T", cfg.T},
            {"T0", cfg.T0},
            {"T_E", cfg.T_E},
            {"r", cfg.r},
            {"F", cfg.F},
            {"sigma2", number(cfg.sigma2)},
            {"delta_range", range(cfg.delta_range)},
            {"upsilon_range", range(cfg.upsilon_range)},
            {"loading_range", range(cfg.loading_range)},
            {"unit_range", range(cfg.unit_range)},
            {"null_mode", cfg.null_mode},
            {"seed", cfg.seed}};
}

Json calibration_to_json(const CalibrationReport& report) {
    Json rates = Json::array();
    for (std::size_t a = 0; a < report.alphas.size(); ++a) {
        rates.push_back({{"alpha", number(report.alphas[a])}, {"rate", number(report.rejection_rate[a])}});
    }
    Json failed = Json::array();
    for (const auto& rec : report.records) {
        if (!rec.ok) failed.push_back({{"index", rec.index}, {"error", rec.error}});
    }
    return {{"config", config_to_json(report.config)},
            {"n_reps", report.n_reps},
            {"failures", report.failures},
            {"failed_replications", failed},
            {"rejection_rates", rates},
            {"mean_mae", number(report.mean_mae)},
            {"mean_pre_fit_rmse", number(report.mean_pre_fit_rmse)},
            {"median_p_value", number(report.median_p_value)},
            {"mean_p_value", number(report.mean_p_value)}};
}

Json sweep_to_json(const std::vector<NoiseSweepRow>& rows) {
    Json out = Json::array();
    for (const auto& row : rows) {
        Json entry = calibration_to_json(row.report);
        entry["sigma2"] = number(row.sigma2);
        out.push_back(entry);
    }
    return {{"sweep", out}};
}

std::string replications_csv(const CalibrationReport& report) {
    std::ostringstream out;
    out << "sigma2,index,seed,ok,p_value,mae,pre_fit_rmse,objective,n_treated,error\n";
    for (const auto& rec : report.records) {
        std::string error = rec.error;
        for (char& c : error) {
            if (c == ',' || c == '\n' || c == '"') c = ';';
        }
        out << text_number(report.config.sigma2) << ',' << rec.index << ',' << rec.seed << ',' << (rec.ok ? 1 : 0) << ',';
        if (rec.ok) {
            out << text_number(rec.p_value) << ',' << text_number(rec.mae) << ',' << text_number(rec.pre_fit_rmse)
                << ',' << text_number(rec.objective) << ',' << rec.n_treated;
        } else {
            out << ",,,,";
        }
        out << ',' << error << '\n';
    }
    return out.str();
}

Json qcqp_to_json(const QcqpExport& q, const PredictorSet& pred) {
    return {{"J", q.J},
            {"M", q.M},
            {"P0", matrix_json(q.P0)},
            {"q0", vector_json(q.q0)},
            {"P1", matrix_json(q.P1)},
            {"e1", vector_json(q.e1)},
            {"e2", vector_json(q.e2)},
            {"constant", number(2.0 * pred.Xbar.squaredNorm())}};
}

void write_simulation(const SimulatedPanel& sim, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    save_panel(sim.panel, dir / "outcomes.csv", dir / "covariates.csv", dir / "weights.csv");
    const auto& units = sim.panel.unit_ids();
    const auto& periods = sim.panel.period_ids();
    std::ostringstream potential;
    potential << "unit,period,y_n,y_i\n";
    for (int j = 0; j < sim.config.J; ++j) {
        for (int t = 0; t < sim.config.T; ++t) {
            potential << units[j] << ',' << periods[t] << ',' << format_exact(sim.Y_N(j, t)) << ','
                      << format_exact(sim.Y_I(j, t)) << '\n';
        }
    }
    write_text(dir / "potential.csv", potential.str());
    std::ostringstream truth;
    truth << "period,tau\n";
    for (int t = 0; t < sim.config.T; ++t) truth << periods[t] << ',' << format_exact(sim.tau(t)) << '\n';
    write_text(dir / "truth.csv", truth.str());
}

PanelData realize_from_potential(const PanelData& panel, const std::filesystem::path& potential_file,
                                 const std::vector<int>& treated) {
    const csv::CsvTable table = csv::read_csv(potential_file);
    if (table.header != std::vector<std::string>{"unit", "period", "y_n", "y_i"}) {
        malformed(potential_file.string() + ": expected header unit,period,y_n,y_i");
    }
    const auto units = index_of(panel.unit_ids());
    const auto periods = index_of(panel.period_ids());
    std::vector<bool> is_treated(panel.J(), false);
    for (const int j : treated) is_treated.at(j) = true;
    Matrix Y = panel.Y();
    Matrix seen = Matrix::Zero(panel.J(), panel.T());
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        const auto& row = table.rows[k];
        const auto u = units.find(row[0]);
        const auto p = periods.find(row[1]);
        if (u == units.end() || p == periods.end()) malformed(potential_file.string() + ": unknown unit or period");
        const int j = u->second, t = p->second;
        if (t < panel.T0()) continue;
        const std::string& field = is_treated[j] ? row[3] : row[2];
        if (!csv::is_missing_token(field)) Y(j, t) = csv::parse_number(field, potential_file, table.line_numbers[k]);
        seen(j, t) = 1.0;
    }
    for (int t = panel.T0(); t < panel.T(); ++t) {
        if (seen.col(t).minCoeff() == 0.0) {
            throw Error(ErrorCode::MissingOutcome, potential_file.string() + " lacks period " + panel.period_ids()[t]);
        }
    }
    return panel.with_outcomes(std::move(Y));
}

Vector read_truth(const std::filesystem::path& truth_file, const std::vector<std::string>& period_ids,
                  const std::vector<int>& periods) {
    const csv::CsvTable table = csv::read_csv(truth_file);
    if (table.header != std::vector<std::string>{"period", "tau"}) malformed(truth_file.string() + ": expected header period,tau");
    std::unordered_map<std::string, double> values;
    for (std::size_t k = 0; k < table.rows.size(); ++k) {
        values[table.rows[k][0]] = csv::parse_number(table.rows[k][1], truth_file, table.line_numbers[k]);
    }
    Vector out(static_cast<int>(periods.size()));
    for (std::size_t a = 0; a < periods.size(); ++a) {
        const auto it = values.find(period_ids.at(periods[a]));
        if (it == values.end()) malformed(truth_file.string() + " lacks period " + period_ids.at(periods[a]));
        out(static_cast<int>(a)) = it->second;
    }
    return out;
}

void write_report(const PanelData& panel, const DesignSolution& sol, const std::optional<Json>& estimate,
                  const std::optional<Json>& inference, const std::filesystem::path& dir) {
    const auto [w, v] = effective_weights(sol, panel.f());
    const auto& periods = panel.period_ids();
    std::ostringstream paths, gap;
    paths << "period,synthetic_treated,synthetic_control\n";
    gap << "period,tau_hat\n";
    for (int t = 0; t < panel.T(); ++t) {
        const auto col = panel.Y().col(t);
        const bool observed = !col.hasNaN();
        const double treated = observed ? w.dot(col) : kNaN;
        const double control = observed ? v.dot(col) : kNaN;
        paths << periods[t] << ',' << text_number(treated) << ',' << text_number(control) << '\n';
        gap << periods[t] << ',' << text_number(treated - control) << '\n';
    }
    Json summary = {{"design", to_string(sol.kind)},
                    {"treated", strings_json(panel.unit_ids(), sol.treated)},
                    {"objective", number(sol.objective)}};
    if (estimate) {
        summary["estimand"] = estimate->value("estimand", "ATE");
        if (estimate->contains("experimental")) summary["tau_hat"] = (*estimate)["experimental"].value("tau_hat", Json::array());
        if (estimate->contains("mae")) summary["mae"] = (*estimate)["mae"];
    }
    if (inference) {
        if (!inference->contains("p_value")) malformed("inference file lacks p_value");
        summary["p_value"] = (*inference)["p_value"];
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    write_text(dir / "paths.csv", paths.str());
    write_text(dir / "gap.csv", gap.str());
    write_text(dir / "summary.json", dump(summary));
}

}  // namespace scdesign::io

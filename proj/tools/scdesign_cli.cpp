#include "scdesign/scdesign.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

enum Exit : int {
    kOk = 0,
    kInternal = 1,
    kConfig = 2,
    kData = 3,
    kDesign = 4,
    kInference = 5,
    kEstimation = 6,
};

int exit_code(scd_status status) {
    switch (status) {
        case SCD_OK:
            return kOk;
        case SCD_ERR_CONFIG:
        case SCD_ERR_INVALID_ARGUMENT:
            return kConfig;
        case SCD_ERR_MALFORMED_FILE:
        case SCD_ERR_DUPLICATE_UNIT:
        case SCD_ERR_NONPOSITIVE_WEIGHT:
        case SCD_ERR_MISSING_PRE_PERIOD_VALUE:
        case SCD_ERR_EMPTY_FITTING_SET:
        case SCD_ERR_INVALID_FITTING_COUNT:
        case SCD_ERR_DIMENSION_MISMATCH:
        case SCD_ERR_MISSING_OUTCOME:
        case SCD_ERR_LENGTH_MISMATCH:
        case SCD_ERR_MISSING_UPSTREAM_ARTIFACT:
            return kData;
        case SCD_ERR_ENUMERATION_CAP_EXCEEDED:
        case SCD_ERR_INFEASIBLE_BUDGET:
        case SCD_ERR_EMPTY_DONOR_POOL:
        case SCD_ERR_INFEASIBLE_DESIGN:
        case SCD_ERR_EMPTY_CLUSTER_AFTER_CONVERGENCE:
            return kDesign;
        case SCD_ERR_NO_BLANK_PERIODS:
        case SCD_ERR_COMBINATION_CAP_EXCEEDED:
        case SCD_ERR_SAMPLE_LARGER_THAN_POPULATION:
            return kInference;
        case SCD_ERR_MISSING_UNIT_LEVEL_WEIGHTS:
        case SCD_ERR_FORM_MISMATCH:
        case SCD_ERR_SINGULAR_REGRESSION:
            return kEstimation;
        default:
            return kInternal;
    }
}

struct Failure {
    int code;
    std::string message;
};

void check(scd_status status) {
    if (status != SCD_OK) throw Failure{exit_code(status), scd_last_error()};
}

[[noreturn]] void config_error(const std::string& message) { throw Failure{kConfig, "ConfigError: " + message}; }

template <class T, void (*Free)(T*)>
struct Deleter {
    void operator()(T* p) const { Free(p); }
};
using Panel = std::unique_ptr<scd_panel, Deleter<scd_panel, scd_panel_free>>;
using Predictors = std::unique_ptr<scd_predictors, Deleter<scd_predictors, scd_predictors_free>>;
using Design = std::unique_ptr<scd_design, Deleter<scd_design, scd_design_free>>;
using Estimate = std::unique_ptr<scd_estimate, Deleter<scd_estimate, scd_estimate_free>>;
using Inference = std::unique_ptr<scd_inference, Deleter<scd_inference, scd_inference_free>>;
using Simulation = std::unique_ptr<scd_simulation, Deleter<scd_simulation, scd_simulation_free>>;
using Calibration = std::unique_ptr<scd_calibration, Deleter<scd_calibration, scd_calibration_free>>;

// Options shared by every subcommand.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

struct PanelOptions {
    std::string outcomes;
    std::string covariates;
    std::string weights;
    std::optional<int> T0;
    std::optional<int> T_E;
    bool scaling = true;
};

struct DesignOptions {
    std::string kind = "unconstrained";
    std::optional<int> m_lo, m_hi, n_clusters, cluster_restarts;
    std::optional<double> xi, lambda, lambda1, lambda2, budget_bound;
    std::vector<double> budget_cost;
    std::optional<std::uint64_t> enumeration_cap;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "Flat JSON file of option values; command-line flags take precedence");
    sub->add_option("--seed", c.seed, "Random seed");
    sub->add_option("--out", c.out, "Output directory")->capture_default_str();
}

void add_panel(CLI::App* sub, PanelOptions& p, bool need_partition = true) {
    sub->add_option("--outcomes", p.outcomes, "Outcomes CSV (unit,period,value)");
    sub->add_option("--covariates", p.covariates, "Covariates CSV (unit,<covariates>)");
    sub->add_option("--weights", p.weights, "Population weights CSV (unit,f); equal weights when omitted");
    sub->add_option("--T0", p.T0, "Number of pre-intervention periods");
    if (need_partition) {
        sub->add_option("--T_E", p.T_E, "Number of fitting periods (the first T_E periods)");
        sub->add_flag("--scaling,!--no-scaling", p.scaling, "Scale predictor rows by their standard deviation");
    }
}

void add_design(CLI::App* sub, DesignOptions& d) {
    sub->add_option("--kind", d.kind, "unconstrained, constrained, penalized, unit_level or clustered")
        ->capture_default_str();
    sub->add_option("--m_lo", d.m_lo, "Minimum number of treated units");
    sub->add_option("--m_hi", d.m_hi, "Maximum number of treated units");
    sub->add_option("--xi", d.xi, "Unit-level trade-off parameter");
    sub->add_option("--lambda", d.lambda, "Penalty applied to both fits");
    sub->add_option("--lambda1", d.lambda1, "Penalty on the treated fit");
    sub->add_option("--lambda2", d.lambda2, "Penalty on the control fit");
    sub->add_option("--n_clusters", d.n_clusters, "Number of clusters");
    sub->add_option("--cluster_restarts", d.cluster_restarts, "K-means restarts");
    sub->add_option("--budget_cost", d.budget_cost, "Per-unit treatment cost, in unit order");
    sub->add_option("--budget_bound", d.budget_bound, "Upper bound on the cost of the treated set");
    sub->add_option("--enumeration_cap", d.enumeration_cap, "Maximum number of candidate treated sets");
}

// Fills options not given on the command line from a flat JSON object.
void merge_config(CLI::App* sub, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) config_error("cannot read config file " + path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::exception& e) {
        config_error(path + ": " + e.what());
    }
    if (!doc.is_object()) config_error(path + ": expected a JSON object");
    for (const auto& [key, value] : doc.items()) {
        CLI::Option* opt = key == "config" || key == "help" ? nullptr : sub->get_option_no_throw("--" + key);
        if (opt == nullptr) config_error("unknown key '" + key + "' for command '" + sub->get_name() + "'");
        if (opt->count() > 0) continue;
        std::vector<Json> items = value.is_array() ? value.get<std::vector<Json>>() : std::vector<Json>{value};
        for (const Json& item : items) {
            if (item.is_string()) {
                opt->add_result(item.get<std::string>());
            } else if (item.is_boolean()) {
                opt->add_result(item.get<bool>() ? "true" : "false");
            } else if (item.is_number()) {
                opt->add_result(item.dump());
            } else {
                config_error("key '" + key + "' has an unsupported value");
            }
        }
        try {
            opt->run_callback();
        } catch (const CLI::Error& e) {
            config_error("key '" + key + "': " + e.what());
        }
    }
}

void require(bool present, const char* name) {
    if (!present) config_error(std::string("missing required option --") + name);
}

const char* or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void validate_panel(const PanelOptions& p, bool need_partition) {
    require(!p.outcomes.empty(), "outcomes");
    require(!p.covariates.empty(), "covariates");
    require(p.T0.has_value(), "T0");
    if (need_partition) require(p.T_E.has_value(), "T_E");
}

scd_design_spec make_spec(const DesignOptions& d, std::uint64_t seed) {
    scd_design_spec spec;
    scd_design_spec_init(&spec);
    scd_design_kind kind;
    if (scd_design_kind_parse(d.kind.c_str(), &kind) != SCD_OK) config_error("unknown design kind '" + d.kind + "'");
    spec.kind = kind;
    if (d.m_lo) {
        if (*d.m_lo < 1) config_error("m_lo must be at least 1");
        spec.m_lo = *d.m_lo;
    }
    if (d.m_hi) {
        if (*d.m_hi < 1) config_error("m_hi must be at least 1");
        spec.m_hi = *d.m_hi;
    }
    if (d.n_clusters) {
        if (*d.n_clusters < 1) config_error("n_clusters must be at least 1");
        spec.n_clusters = *d.n_clusters;
    }
    if (d.xi) spec.xi = *d.xi;
    if (d.lambda && (d.lambda1 || d.lambda2)) config_error("use either lambda or lambda1/lambda2");
    if (d.lambda) spec.lambda1 = spec.lambda2 = *d.lambda;
    if (d.lambda1) spec.lambda1 = *d.lambda1;
    if (d.lambda2) spec.lambda2 = *d.lambda2;
    if (d.cluster_restarts) spec.cluster_restarts = *d.cluster_restarts;
    if (d.enumeration_cap) spec.enumeration_cap = *d.enumeration_cap;
    if (!d.budget_cost.empty() != d.budget_bound.has_value()) config_error("budget needs both budget_cost and budget_bound");
    if (d.budget_bound) {
        spec.budget_cost = d.budget_cost.data();
        spec.budget_bound = *d.budget_bound;
    }
    spec.cluster_seed = seed;
    return spec;
}

Panel load_panel(const PanelOptions& p) {
    scd_panel* raw = nullptr;
    check(scd_panel_load(p.outcomes.c_str(), p.covariates.c_str(), or_null(p.weights), *p.T0, &raw));
    return Panel(raw);
}

Predictors build_predictors(const scd_panel* panel, const PanelOptions& p) {
    scd_predictors* raw = nullptr;
    check(scd_predictors_build(panel, nullptr, 0, *p.T_E, p.scaling ? 1 : 0, &raw));
    return Predictors(raw);
}

std::string in_dir(const Common& c, const char* name) { return (fs::path(c.out) / name).string(); }

// Explicit path if given (must exist), else the default file in --out if present.
std::optional<std::string> upstream(const std::string& explicit_path, const Common& c, const char* name) {
    if (!explicit_path.empty()) {
        if (!fs::exists(explicit_path)) {
            throw Failure{kData, "MissingUpstreamArtifact: " + explicit_path + " does not exist"};
        }
        return explicit_path;
    }
    const std::string fallback = in_dir(c, name);
    if (fs::exists(fallback)) return fallback;
    return std::nullopt;
}

std::string need_upstream(const std::string& explicit_path, const Common& c, const char* name, const char* stage) {
    auto path = upstream(explicit_path, c, name);
    if (!path) {
        throw Failure{kData, std::string("MissingUpstreamArtifact: no ") + name + " found; run '" + stage + "' first"};
    }
    return *path;
}

std::string table_text(const scd_design* design, const scd_panel* panel) {
    size_t needed = 0;
    check(scd_design_format_table(design, panel, nullptr, 0, &needed));
    std::string text(needed, '\0');
    check(scd_design_format_table(design, panel, text.data(), text.size(), nullptr));
    text.resize(needed - 1);
    return text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic control experimental designs: choose treated and control units, estimate effects "
                 "and test for their presence."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(scd_version()));

    Common common;
    PanelOptions panel_opt;
    DesignOptions design_opt;

    auto* design_cmd = app.add_subcommand("design", "Choose treated units and synthetic weights");
    add_common(design_cmd, common);
    add_panel(design_cmd, panel_opt);
    add_design(design_cmd, design_opt);

    std::string design_file, potential_file, truth_file, estimator = "ate", estimate_file, inference_file;
    double ridge = 1e-8;
    bool intercept = true;
    auto* estimate_cmd = app.add_subcommand("estimate", "Estimate treatment effects and blank-period placebos");
    add_common(estimate_cmd, common);
    add_panel(estimate_cmd, panel_opt);
    estimate_cmd->add_option("--design", design_file, "Design JSON (default <out>/design.json)");
    estimate_cmd->add_option("--potential", potential_file,
                             "Potential outcomes CSV (unit,period,y_n,y_i) used to fill post-period outcomes");
    estimate_cmd->add_option("--truth", truth_file, "True effects CSV (period,tau); adds the MAE");
    estimate_cmd->add_option("--estimator", estimator, "ate, att or bias_corrected")->capture_default_str();
    estimate_cmd->add_option("--ridge", ridge, "Ridge penalty of the bias-correction regression")->capture_default_str();
    estimate_cmd->add_flag("--intercept,!--no-intercept", intercept, "Intercept in the bias-correction regression");

    std::string statistic = "mean_abs", mode = "exact";
    std::uint64_t samples = 0, exact_cap = 10'000'000;
    auto* infer_cmd = app.add_subcommand("infer", "Combination test of the no-effect null");
    add_common(infer_cmd, common);
    infer_cmd->add_option("--estimate", estimate_file, "Estimate JSON (default <out>/estimate.json)");
    infer_cmd->add_option("--statistic", statistic, "mean_abs, lp(<p>), one_sided_pos or one_sided_neg")
        ->capture_default_str();
    infer_cmd->add_option("--mode", mode, "exact or sampled")->capture_default_str();
    infer_cmd->add_option("--samples", samples, "Number of sampled combinations");
    infer_cmd->add_option("--exact_cap", exact_cap, "Largest number of combinations enumerated exactly")
        ->capture_default_str();

    int J = 15, T = 30, T0 = 25, T_E = 20, r = 7, F = 11, threads = 0;
    double sigma2 = 1.0;
    bool null_mode = false;
    std::uint64_t replications = 0;
    std::vector<double> alphas{0.01, 0.05, 0.1, 0.2}, sigma2_list;
    auto* simulate_cmd = app.add_subcommand("simulate", "Draw a panel from the linear factor model, or run replications");
    add_common(simulate_cmd, common);
    simulate_cmd->add_option("--J", J, "Units")->capture_default_str();
    simulate_cmd->add_option("--T", T, "Periods")->capture_default_str();
    simulate_cmd->add_option("--T0", T0, "Pre-intervention periods")->capture_default_str();
    simulate_cmd->add_option("--T_E", T_E, "Fitting periods")->capture_default_str();
    simulate_cmd->add_option("--r", r, "Observed covariates")->capture_default_str();
    simulate_cmd->add_option("--F", F, "Latent factors")->capture_default_str();
    simulate_cmd->add_option("--sigma2", sigma2, "Noise variance")->capture_default_str();
    simulate_cmd->add_flag("--null_mode", null_mode, "Treated outcomes follow the untreated model (no effect)");
    simulate_cmd->add_option("--replications", replications, "Run this many end-to-end replications instead");
    simulate_cmd->add_option("--alphas", alphas, "Test levels for rejection rates")->capture_default_str();
    simulate_cmd->add_option("--sigma2_list", sigma2_list, "Noise variances for a sweep of replications");
    simulate_cmd->add_option("--statistic", statistic, "Test statistic for replications")->capture_default_str();
    simulate_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    add_design(simulate_cmd, design_opt);

    auto* qcqp_cmd = app.add_subcommand("export-qcqp", "Write the quadratically constrained form of the base design");
    add_common(qcqp_cmd, common);
    add_panel(qcqp_cmd, panel_opt);

    auto* report_cmd = app.add_subcommand("report", "Write plot data and a summary");
    add_common(report_cmd, common);
    add_panel(report_cmd, panel_opt, false);
    report_cmd->add_option("--design", design_file, "Design JSON (default <out>/design.json)");
    report_cmd->add_option("--potential", potential_file, "Potential outcomes CSV used to fill post-period outcomes");
    report_cmd->add_option("--estimate", estimate_file, "Estimate JSON (default <out>/estimate.json when present)");
    report_cmd->add_option("--inference", inference_file, "Inference JSON (default <out>/inference.json when present)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        merge_config(sub, common.config);
        const std::uint64_t seed = common.seed.value_or(0);

        if (sub == design_cmd) {
            validate_panel(panel_opt, true);
            const scd_design_spec spec = make_spec(design_opt, seed);
            Panel panel = load_panel(panel_opt);
            if (!design_opt.budget_cost.empty() &&
                static_cast<int>(design_opt.budget_cost.size()) != scd_panel_units(panel.get())) {
                config_error("budget_cost needs one entry per unit");
            }
            Predictors pred = build_predictors(panel.get(), panel_opt);
            scd_design* raw = nullptr;
            check(scd_design_solve(pred.get(), &spec, &raw));
            Design design(raw);
            const std::string table = table_text(design.get(), panel.get());
            check(scd_design_write_json(design.get(), panel.get(), in_dir(common, "design.json").c_str()));
            std::ofstream(in_dir(common, "weights.txt")) << table;
            std::cout << table;
        } else if (sub == estimate_cmd) {
            validate_panel(panel_opt, true);
            if (estimator != "ate" && estimator != "att" && estimator != "bias_corrected") {
                config_error("unknown estimator '" + estimator + "'");
            }
            if (!(ridge >= 0.0)) config_error("ridge must be nonnegative");
            const std::string dpath = need_upstream(design_file, common, "design.json", "design");
            Panel panel = load_panel(panel_opt);
            scd_design* raw = nullptr;
            check(scd_design_read_json(dpath.c_str(), panel.get(), &raw));
            Design design(raw);
            if (!potential_file.empty()) {
                scd_panel* realized = nullptr;
                check(scd_panel_realize(panel.get(), potential_file.c_str(), design.get(), &realized));
                panel.reset(realized);
            }
            Predictors pred = build_predictors(panel.get(), panel_opt);
            const scd_estimator which = estimator == "att"   ? SCD_ESTIMATOR_ATT
                                        : estimator == "ate" ? SCD_ESTIMATOR_ATE
                                                             : SCD_ESTIMATOR_BIAS_CORRECTED;
            scd_estimate* est_raw = nullptr;
            check(scd_estimate_compute(panel.get(), design.get(), pred.get(), which, ridge, intercept ? 1 : 0, &est_raw));
            Estimate est(est_raw);
            check(scd_estimate_write_json(est.get(), panel.get(), or_null(truth_file),
                                          in_dir(common, "estimate.json").c_str()));
            std::vector<double> tau(scd_estimate_experimental_count(est.get()));
            check(scd_estimate_values(est.get(), tau.data(), nullptr));
            for (std::size_t t = 0; t < tau.size(); ++t) std::printf("tau_hat[%zu] = %.4f\n", t + 1, tau[t]);
        } else if (sub == infer_cmd) {
            if (mode != "exact" && mode != "sampled") config_error("mode must be exact or sampled");
            if (mode == "sampled" && samples == 0) config_error("sampled mode needs --samples");
            const std::string epath = need_upstream(estimate_file, common, "estimate.json", "estimate");
            scd_estimate* raw = nullptr;
            check(scd_estimate_read_json(epath.c_str(), nullptr, &raw));
            Estimate est(raw);
            scd_inference_options opt;
            scd_inference_options_init(&opt);
            opt.statistic = statistic.c_str();
            opt.sampled = mode == "sampled" ? 1 : 0;
            opt.samples = samples;
            opt.seed = seed;
            opt.exact_cap = exact_cap;
            scd_inference* inf_raw = nullptr;
            check(scd_infer(est.get(), &opt, &inf_raw));
            Inference inf(inf_raw);
            check(scd_inference_write_json(inf.get(), in_dir(common, "inference.json").c_str()));
            std::uint64_t num = 0, den = 1;
            double p = 0.0;
            check(scd_inference_p_value(inf.get(), &num, &den, &p));
            std::printf("p-value = %llu/%llu = %.6f\n", static_cast<unsigned long long>(num),
                        static_cast<unsigned long long>(den), p);
        } else if (sub == simulate_cmd) {
            scd_factor_model model;
            scd_factor_model_init(&model);
            model.J = J;
            model.T = T;
            model.T0 = T0;
            model.T_E = T_E;
            model.r = r;
            model.F = F;
            model.sigma2 = sigma2;
            model.null_mode = null_mode ? 1 : 0;
            model.seed = seed;
            if (replications == 0) {
                scd_simulation* raw = nullptr;
                check(scd_simulate(&model, &raw));
                Simulation sim(raw);
                check(scd_simulation_write(sim.get(), common.out.c_str()));
                std::printf("wrote simulated panel (J=%d, T=%d, T0=%d) to %s\n", J, T, T0, common.out.c_str());
            } else {
                const scd_design_spec spec = make_spec(design_opt, 0);
                scd_calibration* raw = nullptr;
                check(scd_replicate(&model, &spec, replications, alphas.data(), static_cast<int>(alphas.size()),
                                    statistic.c_str(), threads, sigma2_list.empty() ? nullptr : sigma2_list.data(),
                                    static_cast<int>(sigma2_list.size()), &raw));
                Calibration cal(raw);
                check(scd_calibration_write_json(cal.get(), in_dir(common, "calibration.json").c_str()));
                check(scd_calibration_write_csv(cal.get(), in_dir(common, "replications.csv").c_str()));
                for (int b = 0; b < scd_calibration_batches(cal.get()); ++b) {
                    double median = 0.0;
                    std::uint64_t failures = 0;
                    check(scd_calibration_median_p_value(cal.get(), b, &median));
                    check(scd_calibration_failures(cal.get(), b, &failures));
                    std::printf("batch %d: median p-value %.4f, failures %llu", b + 1, median,
                                static_cast<unsigned long long>(failures));
                    for (std::size_t a = 0; a < alphas.size(); ++a) {
                        double rate = 0.0;
                        check(scd_calibration_rejection_rate(cal.get(), b, static_cast<int>(a), &rate));
                        std::printf(", reject@%g %.3f", alphas[a], rate);
                    }
                    std::printf("\n");
                }
            }
        } else if (sub == qcqp_cmd) {
            validate_panel(panel_opt, true);
            Panel panel = load_panel(panel_opt);
            Predictors pred = build_predictors(panel.get(), panel_opt);
            check(scd_qcqp_write_json(pred.get(), in_dir(common, "qcqp.json").c_str()));
        } else if (sub == report_cmd) {
            validate_panel(panel_opt, false);
            const std::string dpath = need_upstream(design_file, common, "design.json", "design");
            const auto epath = upstream(estimate_file, common, "estimate.json");
            const auto ipath = upstream(inference_file, common, "inference.json");
            Panel panel = load_panel(panel_opt);
            scd_design* raw = nullptr;
            check(scd_design_read_json(dpath.c_str(), panel.get(), &raw));
            Design design(raw);
            if (!potential_file.empty()) {
                scd_panel* realized = nullptr;
                check(scd_panel_realize(panel.get(), potential_file.c_str(), design.get(), &realized));
                panel.reset(realized);
            }
            check(scd_report_write(panel.get(), design.get(), epath ? epath->c_str() : nullptr,
                                   ipath ? ipath->c_str() : nullptr, common.out.c_str()));
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "error: %s\n", f.message.c_str());
        return f.code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInternal;
    }
    return kOk;
}

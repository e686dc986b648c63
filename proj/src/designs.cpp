#include "scdesign/designs.hpp"

#include "scdesign/error.hpp"
#include "scdesign/simplex_ls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scdesign {

const char* to_string(DesignKind kind) noexcept {
    switch (kind) {
        case DesignKind::Unconstrained: return "unconstrained";
        case DesignKind::Constrained: return "constrained";
        case DesignKind::Penalized: return "penalized";
        case DesignKind::UnitLevel: return "unit_level";
        case DesignKind::Clustered: return "clustered";
    }
    return "unknown";
}

std::optional<DesignKind> parse_design_kind(const std::string& name) {
    if (name == "unconstrained") return DesignKind::Unconstrained;
    if (name == "constrained") return DesignKind::Constrained;
    if (name == "penalized") return DesignKind::Penalized;
    if (name == "unit_level" || name == "unit-level") return DesignKind::UnitLevel;
    if (name == "clustered") return DesignKind::Clustered;
    return std::nullopt;
}

namespace {

void require(bool condition, const std::string& message) {
    if (!condition) throw Error(ErrorCode::InvalidArgument, message);
}

void forbid(bool present, DesignKind kind, const char* what) {
    if (present) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " does not apply to " + to_string(kind) + " designs");
    }
}

}  // namespace

ResolvedSpec resolve_spec(const DesignSpec& spec, int J) {
    if (J < 2) throw Error(ErrorCode::EmptyDonorPool, "a design needs at least two units");
    const DesignKind kind = spec.kind;
    ResolvedSpec out{};
    out.kind = kind;
    out.xi = 1.0;
    out.lambda1 = 0.0;
    out.lambda2 = 0.0;
    out.n_clusters = 1;

    switch (kind) {
        case DesignKind::Unconstrained:
            forbid(spec.m_lo.has_value() || spec.m_hi.has_value(), kind, "cardinality bounds");
            forbid(spec.xi.has_value(), kind, "xi");
            forbid(spec.lambda1.has_value() || spec.lambda2.has_value(), kind, "lambda");
            forbid(spec.n_clusters.has_value(), kind, "cluster count");
            break;
        case DesignKind::Constrained:
            require(spec.m_hi.has_value(), "constrained designs require m_hi");
            forbid(spec.xi.has_value(), kind, "xi");
            forbid(spec.lambda1.has_value() || spec.lambda2.has_value(), kind, "lambda");
            forbid(spec.n_clusters.has_value(), kind, "cluster count");
            break;
        case DesignKind::Penalized:
            require(spec.lambda1.has_value(), "penalized designs require lambda1");
            forbid(spec.xi.has_value(), kind, "xi");
            forbid(spec.n_clusters.has_value(), kind, "cluster count");
            break;
        case DesignKind::UnitLevel:
            forbid(spec.n_clusters.has_value(), kind, "cluster count");
            break;
        case DesignKind::Clustered:
            require(spec.n_clusters.has_value(), "clustered designs require n_clusters");
            break;
    }

    out.m_lo = spec.m_lo.value_or(1);
    out.m_hi = spec.m_hi.value_or(J - 1);
    require(1 <= out.m_lo && out.m_lo <= out.m_hi && out.m_hi <= J - 1,
            "cardinality bounds must satisfy 1 <= m_lo <= m_hi <= J-1 (got " + std::to_string(out.m_lo) + ", " +
                std::to_string(out.m_hi) + ", J=" + std::to_string(J) + ")");
    if (spec.xi) {
        require(std::isfinite(*spec.xi) && *spec.xi > 0.0, "xi must be positive");
        out.xi = *spec.xi;
    }
    if (spec.lambda1) {
        require(std::isfinite(*spec.lambda1) && *spec.lambda1 >= 0.0, "lambda1 must be nonnegative");
        out.lambda1 = *spec.lambda1;
        out.lambda2 = *spec.lambda1;
    }
    if (spec.lambda2) {
        require(std::isfinite(*spec.lambda2) && *spec.lambda2 >= 0.0, "lambda2 must be nonnegative");
        out.lambda2 = *spec.lambda2;
    }
    if (spec.n_clusters) {
        require(*spec.n_clusters >= 1 && *spec.n_clusters <= J, "n_clusters must satisfy 1 <= K <= J");
        out.n_clusters = *spec.n_clusters;
    }
    if (spec.budget) {
        if (spec.budget->cost.size() != J) throw Error(ErrorCode::DimensionMismatch, "budget cost length differs from J");
        require(spec.budget->cost.allFinite() && std::isfinite(spec.budget->bound), "budget must be finite");
        out.budget = spec.budget;
    }
    require(spec.enumeration_cap >= 1, "enumeration cap must be positive");
    require(spec.cluster_restarts >= 1, "cluster restarts must be positive");
    require(spec.tolerance > 0.0, "tolerance must be positive");
    out.enumeration_cap = spec.enumeration_cap;
    out.cluster_seed = spec.cluster_seed;
    out.cluster_restarts = spec.cluster_restarts;
    out.tolerance = spec.tolerance;
    return out;
}

Vector aggregate_unit_level_weights(const Vector& w, const Matrix& v_unit) {
    if (v_unit.rows() != w.size() || v_unit.cols() != w.size()) {
        throw Error(ErrorCode::DimensionMismatch, "unit-level weight matrix must be J x J");
    }
    return v_unit * w;
}

std::pair<Vector, Vector> effective_weights(const DesignSolution& sol, const Vector& f) {
    if (sol.w.size() != f.size() || sol.v.size() != f.size()) {
        throw Error(ErrorCode::DimensionMismatch, "design weights do not match the panel's unit count");
    }
    if (!sol.cluster_assignment) return {sol.w, sol.v};
    const auto& labels = *sol.cluster_assignment;
    const int K = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    Vector mass = Vector::Zero(K);
    for (int j = 0; j < f.size(); ++j) mass(labels[j]) += f(j);
    Vector w = sol.w, v = sol.v;
    for (int j = 0; j < f.size(); ++j) {
        w(j) *= mass(labels[j]);
        v(j) *= mass(labels[j]);
    }
    return {w, v};
}

QcqpExport export_qcqp(const PredictorSet& pred) {
    const int J = pred.J();
    QcqpExport out;
    out.J = J;
    out.M = pred.M();
    const Matrix gram = pred.X.transpose() * pred.X;
    const Vector lin = -2.0 * (pred.X.transpose() * pred.Xbar);
    out.P0 = Matrix::Zero(2 * J, 2 * J);
    out.P0.topLeftCorner(J, J) = gram;
    out.P0.bottomRightCorner(J, J) = gram;
    out.q0.resize(2 * J);
    out.q0 << lin, lin;
    out.P1 = Matrix::Zero(2 * J, 2 * J);
    for (int k = 0; k < J; ++k) {
        out.P1(k + J, k) = 1.0;
        out.P1(k, k + J) = 1.0;
    }
    out.e1 = Vector::Zero(2 * J);
    out.e2 = Vector::Zero(2 * J);
    out.e1.head(J).setOnes();
    out.e2.tail(J).setOnes();
    return out;
}

namespace {

// Lower objective wins; near-ties go to fewer treated units, then the
// lexicographically smaller sorted support.
bool preferred(double obj_a, const std::vector<int>& support_a, double obj_b, const std::vector<int>& support_b) {
    const double tol = 1e-10 * std::max({1.0, std::abs(obj_a), std::abs(obj_b)});
    if (obj_a < obj_b - tol) return true;
    if (obj_a > obj_b + tol) return false;
    if (support_a.size() != support_b.size()) return support_a.size() < support_b.size();
    return support_a < support_b;
}

struct Fit {
    double objective = 0.0;
    Vector weights;
};

// Shared precomputation for every candidate support.
class DesignContext {
public:
    DesignContext(const PredictorSet& pred, const ResolvedSpec& spec) : pred_(pred), spec_(spec) {
        gram_ = pred.X.transpose() * pred.X;
    }

    const Matrix& gram() const { return gram_; }
    int J() const { return pred_.J(); }
    int M() const { return pred_.M(); }

    // Fit of the columns in `support` to `target`, with an optional extra linear
    // penalty per column. `target_cross` is X' target for all J units.
    Fit fit(const std::vector<int>& support, const Vector& target_cross, double target_norm_sq,
            const std::vector<double>& penalty) const {
        std::vector<double> cross(support.size());
        for (std::size_t a = 0; a < support.size(); ++a) cross[a] = target_cross(support[a]);
        GramProblem problem;
        problem.gram = &gram_;
        problem.index = support;
        problem.cross = cross;
        problem.norm_sq = target_norm_sq;
        problem.penalty = penalty;
        problem.tolerance = spec_.tolerance;
        problem.rows = M();
        SimplexLSSolution sol = solve_simplex_ls(problem);
        return {sol.objective, std::move(sol.weights)};
    }

    std::vector<double> distance_penalty(const std::vector<int>& support, const Vector& target, double lambda) const {
        std::vector<double> out(support.size(), 0.0);
        if (lambda == 0.0) return out;
        for (std::size_t a = 0; a < support.size(); ++a) {
            out[a] = lambda * (pred_.X.col(support[a]) - target).squaredNorm();
        }
        return out;
    }

    const PredictorSet& pred() const { return pred_; }
    const ResolvedSpec& spec() const { return spec_; }

private:
    const PredictorSet& pred_;
    const ResolvedSpec& spec_;
    Matrix gram_;
};

std::vector<int> complement_of(const std::vector<int>& universe, const std::vector<int>& support) {
    std::vector<int> out;
    out.reserve(universe.size());
    std::set_difference(universe.begin(), universe.end(), support.begin(), support.end(), std::back_inserter(out));
    return out;
}

void check_enumeration_size(int J, const ResolvedSpec& spec) {
    const std::uint64_t total = count_supports(J, spec.m_lo, spec.m_hi);
    if (total <= spec.enumeration_cap) return;
    if (spec.budget) {
        SupportEnumerator it(J, spec.m_lo, spec.m_hi, spec.budget);
        std::uint64_t feasible = 0;
        while (it.next()) {
            if (++feasible > spec.enumeration_cap) break;
        }
        if (feasible <= spec.enumeration_cap) return;
    }
    throw Error(ErrorCode::EnumerationCapExceeded,
                std::to_string(total) + " candidate supports exceed the cap of " + std::to_string(spec.enumeration_cap));
}

[[noreturn]] void throw_no_support(const ResolvedSpec& spec) {
    if (spec.budget) throw Error(ErrorCode::InfeasibleBudget, "no treated set satisfies the budget");
    throw Error(ErrorCode::InfeasibleDesign, "no admissible treated set");
}

// Unconstrained, Constrained and Penalized: fit w on S and v on the complement,
// both to Xbar, with distance penalties lambda1 / lambda2.
DesignSolution solve_base(const DesignContext& ctx) {
    const ResolvedSpec& spec = ctx.spec();
    const PredictorSet& pred = ctx.pred();
    const int J = ctx.J();
    check_enumeration_size(J, spec);

    const Vector cross = pred.X.transpose() * pred.Xbar;
    const double norm_sq = pred.Xbar.squaredNorm();
    std::vector<int> all(J);
    for (int j = 0; j < J; ++j) all[j] = j;

    // Subset fits are shared between the w side and the v side (and across
    // supports) through a bitmask memo when J is small enough.
    const bool use_memo = J <= 20;
    const bool shared_penalty = spec.lambda1 == spec.lambda2;
    std::vector<double> memo_w, memo_v;
    if (use_memo) {
        memo_w.assign(std::size_t{1} << J, std::numeric_limits<double>::quiet_NaN());
        if (!shared_penalty) memo_v = memo_w;
    }
    auto subset_fit = [&](const std::vector<int>& subset, bool treated_side) {
        const double lambda = treated_side ? spec.lambda1 : spec.lambda2;
        double* slot = nullptr;
        if (use_memo) {
            std::size_t mask = 0;
            for (const int j : subset) mask |= std::size_t{1} << j;
            slot = (treated_side || shared_penalty) ? &memo_w[mask] : &memo_v[mask];
            if (!std::isnan(*slot)) return *slot;
        }
        const double value = ctx.fit(subset, cross, norm_sq, ctx.distance_penalty(subset, pred.Xbar, lambda)).objective;
        if (slot) *slot = value;
        return value;
    };

    SupportEnumerator it(J, spec.m_lo, spec.m_hi, spec.budget);
    std::vector<int> best_support;
    double best_obj = std::numeric_limits<double>::infinity();
    std::uint64_t evaluated = 0;
    while (it.next()) {
        const std::vector<int>& support = it.current();
        const double obj = subset_fit(support, true) + subset_fit(complement_of(all, support), false);
        ++evaluated;
        if (best_support.empty() || preferred(obj, support, best_obj, best_support)) {
            best_obj = obj;
            best_support = support;
        }
    }
    if (best_support.empty()) throw_no_support(spec);

    const std::vector<int> donors = complement_of(all, best_support);
    const Fit fw = ctx.fit(best_support, cross, norm_sq, ctx.distance_penalty(best_support, pred.Xbar, spec.lambda1));
    const Fit fv = ctx.fit(donors, cross, norm_sq, ctx.distance_penalty(donors, pred.Xbar, spec.lambda2));

    DesignSolution sol;
    sol.kind = spec.kind;
    sol.treated = best_support;
    sol.w = Vector::Zero(J);
    sol.v = Vector::Zero(J);
    for (std::size_t a = 0; a < best_support.size(); ++a) sol.w(best_support[a]) = fw.weights(static_cast<int>(a));
    for (std::size_t a = 0; a < donors.size(); ++a) sol.v(donors[a]) = fv.weights(static_cast<int>(a));
    sol.objective = fw.objective + fv.objective;
    sol.evaluated_subsets = evaluated;
    sol.spec = spec;
    return sol;
}

struct UnitLevelFit {
    double objective = 0.0;
    Vector w;                             // over support
    std::vector<Vector> controls;         // per treated unit, over donors
    std::vector<int> donors;
};

// Unit-level program for one treated support inside `universe`: one synthetic
// control per treated unit fitted on the donors, then w fitted to `target`
// with the discrepancies d_j entering linearly with weight xi.
UnitLevelFit unit_level_fit(const DesignContext& ctx, const std::vector<int>& universe, const std::vector<int>& support,
                            const Vector& target, const Vector& target_cross, double target_norm_sq,
                            bool keep_controls) {
    const ResolvedSpec& spec = ctx.spec();
    const Matrix& G = ctx.gram();
    UnitLevelFit out;
    out.donors = complement_of(universe, support);
    if (out.donors.empty()) throw Error(ErrorCode::EmptyDonorPool, "treated set leaves no donors");

    std::vector<double> outer_penalty(support.size());
    for (std::size_t a = 0; a < support.size(); ++a) {
        const int j = support[a];
        const Vector unit = ctx.pred().X.col(j);
        const Fit control = ctx.fit(out.donors, G.col(j), G(j, j), ctx.distance_penalty(out.donors, unit, spec.lambda2));
        outer_penalty[a] = spec.xi * control.objective + spec.lambda1 * (unit - target).squaredNorm();
        if (keep_controls) out.controls.push_back(control.weights);
    }
    const Fit outer = ctx.fit(support, target_cross, target_norm_sq, outer_penalty);
    out.objective = outer.objective;
    out.w = outer.weights;
    return out;
}

DesignSolution solve_unit_level(const DesignContext& ctx) {
    const ResolvedSpec& spec = ctx.spec();
    const PredictorSet& pred = ctx.pred();
    const int J = ctx.J();
    check_enumeration_size(J, spec);

    const Vector cross = pred.X.transpose() * pred.Xbar;
    const double norm_sq = pred.Xbar.squaredNorm();
    std::vector<int> all(J);
    for (int j = 0; j < J; ++j) all[j] = j;

    SupportEnumerator it(J, spec.m_lo, spec.m_hi, spec.budget);
    std::vector<int> best_support;
    double best_obj = std::numeric_limits<double>::infinity();
    std::uint64_t evaluated = 0;
    while (it.next()) {
        const auto& support = it.current();
        const double obj = unit_level_fit(ctx, all, support, pred.Xbar, cross, norm_sq, false).objective;
        ++evaluated;
        if (best_support.empty() || preferred(obj, support, best_obj, best_support)) {
            best_obj = obj;
            best_support = support;
        }
    }
    if (best_support.empty()) throw_no_support(spec);

    const UnitLevelFit fit = unit_level_fit(ctx, all, best_support, pred.Xbar, cross, norm_sq, true);
    DesignSolution sol;
    sol.kind = spec.kind;
    sol.treated = best_support;
    sol.w = Vector::Zero(J);
    Matrix v_unit = Matrix::Zero(J, J);
    for (std::size_t a = 0; a < best_support.size(); ++a) {
        const int j = best_support[a];
        sol.w(j) = fit.w(static_cast<int>(a));
        for (std::size_t b = 0; b < fit.donors.size(); ++b) v_unit(fit.donors[b], j) = fit.controls[a](static_cast<int>(b));
    }
    sol.v = aggregate_unit_level_weights(sol.w, v_unit);
    sol.v_unit = std::move(v_unit);
    sol.objective = fit.objective;
    sol.evaluated_subsets = evaluated;
    sol.spec = spec;
    return sol;
}

DesignSolution solve_clustered(const DesignContext& ctx) {
    const ResolvedSpec& spec = ctx.spec();
    const PredictorSet& pred = ctx.pred();
    const int J = ctx.J();
    const int K = spec.n_clusters;
    const Clustering clusters = cluster_units(pred, K, spec.cluster_seed, spec.cluster_restarts);

    struct Candidate {
        std::vector<int> support;
        double objective;
    };
    std::vector<std::vector<int>> members(K);
    for (int j = 0; j < J; ++j) members[clusters.labels[j]].push_back(j);

    // Every proper nonempty treated subset of every cluster, scored by the
    // cluster's unit-level program against its own mean.
    std::vector<std::vector<Candidate>> per_cluster(K);
    unsigned __int128 combos = 1;
    for (int k = 0; k < K; ++k) {
        const auto& I = members[k];
        const int n = static_cast<int>(I.size());
        if (n < 2) {
            throw Error(ErrorCode::EmptyDonorPool,
                        "cluster " + std::to_string(k + 1) + " has a single unit and no within-cluster donor");
        }
        combos *= count_supports(n, 1, n - 1);
        if (combos > spec.enumeration_cap) {
            throw Error(ErrorCode::EnumerationCapExceeded, "clustered candidate count exceeds the enumeration cap");
        }
        const Vector target = clusters.means.col(k);
        const Vector cross = pred.X.transpose() * target;
        const double norm_sq = target.squaredNorm();
        SupportEnumerator it(n, 1, n - 1);
        while (it.next()) {
            std::vector<int> support;
            for (const int a : it.current()) support.push_back(I[a]);
            const double obj = unit_level_fit(ctx, I, support, target, cross, norm_sq, false).objective;
            per_cluster[k].push_back({std::move(support), obj});
        }
    }

    std::vector<std::size_t> choice(K, 0);
    std::vector<std::size_t> best_choice;
    std::vector<int> best_union;
    double best_obj = std::numeric_limits<double>::infinity();
    std::uint64_t evaluated = 0;
    while (true) {
        int count = 0;
        double cost = 0.0;
        double obj = 0.0;
        std::vector<int> treated;
        for (int k = 0; k < K; ++k) {
            const Candidate& c = per_cluster[k][choice[k]];
            count += static_cast<int>(c.support.size());
            obj += clusters.mass(k) * c.objective;
            treated.insert(treated.end(), c.support.begin(), c.support.end());
            if (spec.budget) {
                for (const int j : c.support) cost += spec.budget->cost(j);
            }
        }
        const bool admissible =
            count >= spec.m_lo && count <= spec.m_hi && (!spec.budget || cost <= spec.budget->bound);
        if (admissible) {
            ++evaluated;
            std::sort(treated.begin(), treated.end());
            if (best_choice.empty() || preferred(obj, treated, best_obj, best_union)) {
                best_obj = obj;
                best_union = std::move(treated);
                best_choice = choice;
            }
        }
        int k = 0;
        while (k < K && ++choice[k] == per_cluster[k].size()) choice[k++] = 0;
        if (k == K) break;
    }
    if (best_choice.empty()) throw_no_support(spec);

    DesignSolution sol;
    sol.kind = spec.kind;
    sol.treated = best_union;
    sol.w = Vector::Zero(J);
    sol.v = Vector::Zero(J);
    Matrix v_unit = Matrix::Zero(J, J);
    double objective = 0.0;
    for (int k = 0; k < K; ++k) {
        const auto& support = per_cluster[k][best_choice[k]].support;
        const Vector target = clusters.means.col(k);
        const Vector cross = pred.X.transpose() * target;
        const UnitLevelFit fit = unit_level_fit(ctx, members[k], support, target, cross, target.squaredNorm(), true);
        for (std::size_t a = 0; a < support.size(); ++a) {
            const int j = support[a];
            sol.w(j) = fit.w(static_cast<int>(a));
            for (std::size_t b = 0; b < fit.donors.size(); ++b) {
                v_unit(fit.donors[b], j) = fit.controls[a](static_cast<int>(b));
            }
        }
        objective += clusters.mass(k) * fit.objective;
    }
    sol.v = aggregate_unit_level_weights(sol.w, v_unit);
    sol.v_unit = std::move(v_unit);
    sol.objective = objective;
    sol.cluster_assignment = clusters.labels;
    sol.evaluated_subsets = evaluated;
    sol.spec = spec;
    return sol;
}

}  // namespace

DesignSolution solve_design(const PredictorSet& pred, const DesignSpec& spec) {
    const ResolvedSpec resolved = resolve_spec(spec, pred.J());
    const DesignContext ctx(pred, resolved);
    switch (resolved.kind) {
        case DesignKind::Unconstrained:
        case DesignKind::Constrained:
        case DesignKind::Penalized:
            return solve_base(ctx);
        case DesignKind::UnitLevel:
            return solve_unit_level(ctx);
        case DesignKind::Clustered:
            return solve_clustered(ctx);
    }
    throw Error(ErrorCode::Internal, "unknown design kind");
}

}  // namespace scdesign

#pragma once

#include "scdesign/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scdesign {

enum class DesignKind { Unconstrained, Constrained, Penalized, UnitLevel, Clustered };

const char* to_string(DesignKind kind) noexcept;
std::optional<DesignKind> parse_design_kind(const std::string& name);

/// Per-unit treatment cost and the experimenter's budget (cost of the treated set <= bound).
struct Budget {
    Vector cost;
    double bound = 0.0;
};

/// Parameters of one design program. Optional members are kind-specific:
///   Constrained  requires m_hi
///   Penalized    requires lambda1 (lambda2 defaults to lambda1)
///   UnitLevel    xi defaults to 1; lambda1/lambda2 optional (penalised variant)
///   Clustered    requires n_clusters; xi defaults to 1
/// Cardinality bounds default to m_lo = 1, m_hi = J - 1.
struct DesignSpec {
    DesignKind kind = DesignKind::Unconstrained;
    std::optional<int> m_lo;
    std::optional<int> m_hi;
    std::optional<double> xi;
    std::optional<double> lambda1;
    std::optional<double> lambda2;
    std::optional<int> n_clusters;
    std::optional<Budget> budget;
    std::uint64_t enumeration_cap = 2'000'000;
    std::uint64_t cluster_seed = 0;
    int cluster_restarts = 10;
    double tolerance = 1e-10;
};

/// Spec with every default filled in, after validation against J.
struct ResolvedSpec {
    DesignKind kind;
    int m_lo;
    int m_hi;
    double xi;
    double lambda1;
    double lambda2;
    int n_clusters;
    std::optional<Budget> budget;
    std::uint64_t enumeration_cap;
    std::uint64_t cluster_seed;
    int cluster_restarts;
    double tolerance;
};

ResolvedSpec resolve_spec(const DesignSpec& spec, int J);

struct DesignSolution {
    DesignKind kind = DesignKind::Unconstrained;
    std::vector<int> treated;  // sorted, 0-based
    Vector w;
    Vector v;
    std::optional<Matrix> v_unit;  // v_unit(i, j): weight of control i in the synthetic control of treated j
    double objective = 0.0;
    std::optional<std::vector<int>> cluster_assignment;
    std::uint64_t evaluated_subsets = 0;
    ResolvedSpec spec{};
};

DesignSolution solve_design(const PredictorSet& pred, const DesignSpec& spec);

/// w and v as population-level weights: for clustered designs each cluster's
/// weights are scaled by the cluster's share of f; otherwise w and v unchanged.
std::pair<Vector, Vector> effective_weights(const DesignSolution& sol, const Vector& f);

/// Treated supports with m_lo <= |S| <= m_hi and cost(S) <= bound, ordered by
/// size and then lexicographically.
class SupportEnumerator {
public:
    SupportEnumerator(int J, int m_lo, int m_hi, std::optional<Budget> budget = std::nullopt);

    /// Advances to the next admissible support; false when exhausted.
    bool next();
    const std::vector<int>& current() const { return current_; }

private:
    bool advance_raw();
    bool admissible() const;

    int J_;
    int m_lo_;
    int m_hi_;
    std::optional<Budget> budget_;
    int size_;
    bool started_ = false;
    std::vector<int> current_;
};

std::vector<std::vector<int>> enumerate_supports(int J, int m_lo, int m_hi,
                                                 const std::optional<Budget>& budget = std::nullopt);

/// Number of subsets with m_lo <= |S| <= m_hi, saturating at UINT64_MAX.
std::uint64_t count_supports(int J, int m_lo, int m_hi);

struct Clustering {
    std::vector<int> labels;  // cluster of each unit, numbered by first appearance
    Matrix means;             // M x K, f-weighted cluster means
    Vector mass;              // K, sum of f within each cluster
    double inertia = 0.0;
};

/// f-weighted K-means on the predictor columns (k-means++ start, Lloyd updates).
Clustering cluster_units(const PredictorSet& pred, int K, std::uint64_t seed, int restarts);

/// v*_i = sum_j w_j v_unit(i, j).
Vector aggregate_unit_level_weights(const Vector& w, const Matrix& v_unit);

struct QcqpExport {
    Matrix P0;
    Vector q0;
    Matrix P1;
    Vector e1;
    Vector e2;
    int J = 0;
    int M = 0;
};

/// Quadratic-constrained canonical form of the base design over (w, v).
QcqpExport export_qcqp(const PredictorSet& pred);

}  // namespace scdesign

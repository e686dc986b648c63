#include "scdesign/simplex_ls.hpp"

#include "scdesign/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace scdesign {

namespace {

// Local k x k copy of the program; everything below works on it.
struct LocalProgram {
    Matrix H;      // Gram block
    Vector cross;  // A'b
    Vector p;      // linear penalty
    double norm_sq = 0.0;
    double tolerance = 1e-10;
    int max_iter = 1;

    int size() const { return static_cast<int>(H.rows()); }

    double objective(const Vector& w) const {
        const double fit = w.dot(H * w) - 2.0 * cross.dot(w) + norm_sq;
        return std::max(fit, 0.0) + p.dot(w);
    }

    Vector gradient(const Vector& w) const { return 2.0 * (H * w - cross) + p; }

    double gap_tolerance(const Vector& g) const { return tolerance * std::max(1.0, g.cwiseAbs().maxCoeff()); }
};

double frank_wolfe_gap(const Vector& g, const Vector& w) { return g.dot(w) - g.minCoeff(); }

int argmin_lowest(const Vector& g) {
    int best = 0;
    for (int i = 1; i < g.size(); ++i) {
        if (g(i) < g(best)) best = i;
    }
    return best;
}

void normalise(Vector& w) {
    w = w.cwiseMax(0.0);
    const double total = w.sum();
    w /= total;
}

// Equality-constrained minimiser on the passive set: [H 1; 1' 0] [w; nu] = [cross - p/2; 1].
// The border is scaled to the Gram diagonal to keep the condition estimate meaningful.
// Returns false when the system is numerically singular.
bool solve_face(const LocalProgram& prog, const std::vector<int>& passive, Vector& z) {
    const int n = static_cast<int>(passive.size());
    double border = 0.0;
    for (int a = 0; a < n; ++a) border += prog.H(passive[a], passive[a]);
    border = border > 0.0 ? border / n : 1.0;

    Matrix kkt(n + 1, n + 1);
    Vector rhs(n + 1);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) kkt(a, b) = prog.H(passive[a], passive[b]);
        kkt(a, n) = border;
        kkt(n, a) = border;
        rhs(a) = prog.cross(passive[a]) - 0.5 * prog.p(passive[a]);
    }
    kkt(n, n) = 0.0;
    rhs(n) = border;

    const Eigen::PartialPivLU<Matrix> lu(kkt);
    if (!(lu.rcond() > 1e-13)) return false;
    const Vector sol = lu.solve(rhs);
    if (!sol.allFinite()) return false;
    z = sol.head(n);
    return true;
}

// Pairwise Frank-Wolfe with exact line search, from a feasible start.
// Used when a face system is singular (identical or affinely dependent columns).
SimplexLSSolution pairwise_frank_wolfe(const LocalProgram& prog, Vector w, int iterations) {
    const int k = prog.size();
    const int cap = iterations + std::max(1000 * k, prog.max_iter);
    Vector g = prog.gradient(w);
    SimplexLSSolution out;
    out.status = SolveStatus::HitIterationCap;
    while (iterations < cap) {
        if (iterations % 64 == 0) g = prog.gradient(w);
        const int s = argmin_lowest(g);
        int a = -1;
        for (int i = 0; i < k; ++i) {
            if (w(i) > 0.0 && (a < 0 || g(i) > g(a))) a = i;
        }
        const double gap = g.dot(w) - g(s);
        if (gap <= prog.gap_tolerance(g) || a == s) {
            out.status = SolveStatus::Converged;
            break;
        }
        const double slope = g(s) - g(a);
        const double curvature = 2.0 * (prog.H(s, s) - 2.0 * prog.H(s, a) + prog.H(a, a));
        double step = w(a);
        if (curvature > 0.0) step = std::min(step, -slope / curvature);
        if (!(step > 0.0)) {
            out.status = SolveStatus::Converged;
            break;
        }
        if (step >= w(a)) {
            step = w(a);
            w(s) += step;
            w(a) = 0.0;
        } else {
            w(s) += step;
            w(a) -= step;
        }
        g += 2.0 * step * (prog.H.col(s) - prog.H.col(a));
        ++iterations;
    }
    normalise(w);
    out.weights = std::move(w);
    out.objective = prog.objective(out.weights);
    out.iterations = iterations;
    return out;
}

// Primal active-set method (Lawson-Hanson style, with the sum-to-one row).
// Starts at the best vertex and adds the coordinate with the most negative
// reduced gradient, lowest index first.
SimplexLSSolution active_set(const LocalProgram& prog) {
    const int k = prog.size();

    Vector vertex_obj(k);
    for (int j = 0; j < k; ++j) vertex_obj(j) = prog.H(j, j) - 2.0 * prog.cross(j) + prog.norm_sq + prog.p(j);
    const int start = argmin_lowest(vertex_obj);

    Vector w = Vector::Zero(k);
    w(start) = 1.0;
    std::vector<int> passive{start};
    std::vector<char> in_passive(k, 0);
    in_passive[start] = 1;

    int iterations = 0;
    SolveStatus status = SolveStatus::HitIterationCap;
    Vector z;

    while (true) {
        const Vector g = prog.gradient(w);
        const double gw = g.dot(w);
        const double tol = prog.gap_tolerance(g);
        if (gw - g.minCoeff() <= tol) {
            status = SolveStatus::Converged;
            break;
        }
        if (iterations >= prog.max_iter) break;

        int entering = -1;
        for (int i = 0; i < k; ++i) {
            if (!in_passive[i] && (entering < 0 || g(i) < g(entering))) entering = i;
        }
        if (entering < 0 || g(entering) >= gw - tol) {
            // The gap sits inside the passive face; hand over to the first-order polish.
            return pairwise_frank_wolfe(prog, w, iterations);
        }
        passive.push_back(entering);
        std::sort(passive.begin(), passive.end());
        in_passive[entering] = 1;

        while (true) {
            if (!solve_face(prog, passive, z)) return pairwise_frank_wolfe(prog, w, iterations);
            ++iterations;
            const int n = static_cast<int>(passive.size());
            bool interior = true;
            for (int a = 0; a < n; ++a) {
                if (!(z(a) > 0.0)) {
                    interior = false;
                    break;
                }
            }
            if (interior) {
                for (int a = 0; a < n; ++a) w(passive[a]) = z(a);
                break;
            }
            double alpha = 1.0;
            int blocking = -1;
            for (int a = 0; a < n; ++a) {
                if (z(a) <= 0.0) {
                    const double wa = w(passive[a]);
                    const double ratio = wa / (wa - z(a));
                    if (ratio < alpha) {
                        alpha = ratio;
                        blocking = a;
                    }
                }
            }
            for (int a = 0; a < n; ++a) w(passive[a]) += alpha * (z(a) - w(passive[a]));
            std::vector<int> kept;
            for (int a = 0; a < n; ++a) {
                const int i = passive[a];
                if (a == blocking || w(i) <= 0.0) {
                    w(i) = 0.0;
                    in_passive[i] = 0;
                } else {
                    kept.push_back(i);
                }
            }
            if (kept.empty()) return pairwise_frank_wolfe(prog, w.cwiseMax(0.0) / w.cwiseMax(0.0).sum(), iterations);
            const bool stalled = alpha <= 0.0 && !in_passive[entering];
            passive = std::move(kept);
            if (stalled) return pairwise_frank_wolfe(prog, w, iterations);
            if (iterations >= prog.max_iter) break;
        }
        if (iterations >= prog.max_iter) {
            const Vector g_end = prog.gradient(w);
            if (frank_wolfe_gap(g_end, w) <= prog.gap_tolerance(g_end)) status = SolveStatus::Converged;
            break;
        }
    }

    normalise(w);
    SimplexLSSolution out;
    out.objective = prog.objective(w);
    out.weights = std::move(w);
    out.iterations = iterations;
    out.status = status;
    return out;
}

SimplexLSSolution solve_local(const LocalProgram& prog) {
    SimplexLSSolution sol = active_set(prog);
    // Descent from the best vertex cannot end above it; guard against round-off.
    const int k = prog.size();
    double best_vertex = std::numeric_limits<double>::infinity();
    int best_index = 0;
    for (int j = 0; j < k; ++j) {
        const double value =
            std::max(prog.H(j, j) - 2.0 * prog.cross(j) + prog.norm_sq, 0.0) + prog.p(j);
        if (value < best_vertex) {
            best_vertex = value;
            best_index = j;
        }
    }
    if (sol.objective > best_vertex) {
        sol.weights = Vector::Zero(k);
        sol.weights(best_index) = 1.0;
        sol.objective = best_vertex;
    }
    return sol;
}

void check_penalty(std::span<const double> penalty, std::size_t k) {
    if (!penalty.empty() && penalty.size() != k) {
        throw Error(ErrorCode::DimensionMismatch, "penalty length differs from column count");
    }
    for (const double value : penalty) {
        if (!(value >= 0.0)) throw Error(ErrorCode::InvalidArgument, "penalty entries must be nonnegative");
    }
}

}  // namespace

SimplexLSSolution solve_simplex_ls(const SimplexLSProblem& problem) {
    const auto k = problem.columns.cols();
    const auto M = problem.columns.rows();
    if (k < 1) throw Error(ErrorCode::DimensionMismatch, "empty support");
    if (problem.target.size() != M) throw Error(ErrorCode::DimensionMismatch, "target length differs from rows");
    if (!(problem.tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    check_penalty(std::span<const double>(problem.penalty.data(), static_cast<std::size_t>(problem.penalty.size())),
                  static_cast<std::size_t>(k));

    LocalProgram prog;
    prog.H = problem.columns.transpose() * problem.columns;
    prog.cross = problem.columns.transpose() * problem.target;
    prog.norm_sq = problem.target.squaredNorm();
    prog.p = problem.penalty.size() == 0 ? Vector::Zero(k) : problem.penalty;
    prog.tolerance = problem.tolerance;
    prog.max_iter = problem.max_iter > 0 ? problem.max_iter : static_cast<int>(std::max<Eigen::Index>(1, 10 * k * M));

    SimplexLSSolution sol = solve_local(prog);
    sol.objective = (problem.target - problem.columns * sol.weights).squaredNorm() + prog.p.dot(sol.weights);
    return sol;
}

SimplexLSSolution solve_simplex_ls(const GramProblem& problem) {
    const auto k = static_cast<int>(problem.index.size());
    if (k < 1 || problem.gram == nullptr) throw Error(ErrorCode::DimensionMismatch, "empty support");
    if (problem.cross.size() != problem.index.size()) {
        throw Error(ErrorCode::DimensionMismatch, "cross-product length differs from support size");
    }
    if (!(problem.tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
    check_penalty(problem.penalty, problem.index.size());

    const Matrix& G = *problem.gram;
    LocalProgram prog;
    prog.H.resize(k, k);
    prog.cross.resize(k);
    prog.p.resize(k);
    for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) prog.H(a, b) = G(problem.index[a], problem.index[b]);
        prog.cross(a) = problem.cross[a];
        prog.p(a) = problem.penalty.empty() ? 0.0 : problem.penalty[a];
    }
    prog.norm_sq = problem.norm_sq;
    prog.tolerance = problem.tolerance;
    prog.max_iter = problem.max_iter > 0 ? problem.max_iter : std::max(1, 10 * k * std::max(1, problem.rows));
    return solve_local(prog);
}

Vector distance_penalties(const Matrix& columns, const Vector& target, double lambda) {
    if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be nonnegative");
    if (target.size() != columns.rows()) throw Error(ErrorCode::DimensionMismatch, "target length differs from rows");
    return lambda * (columns.colwise() - target).colwise().squaredNorm().transpose();
}

}  // namespace scdesign

#pragma once

#include "scdesign/panel.hpp"

#include <span>

namespace scdesign {

/// minimize ||target - columns * w||^2 + penalty' w  subject to  w >= 0, sum(w) = 1.
struct SimplexLSProblem {
    Matrix columns;  // M x k
    Vector target;   // M
    Vector penalty;  // k, nonnegative; empty means no penalty
    double tolerance = 1e-10;
    int max_iter = 0;  // 0 selects 10 * k * M
};

enum class SolveStatus { Converged, HitIterationCap };

struct SimplexLSSolution {
    Vector weights;
    double objective = 0.0;
    int iterations = 0;
    SolveStatus status = SolveStatus::Converged;
};

SimplexLSSolution solve_simplex_ls(const SimplexLSProblem& problem);

/// The same program stated through its normal equations: gram = A'A,
/// cross = A'b and norm_sq = b'b. Used by the design search, which reuses one
/// Gram matrix for every candidate support.
struct GramProblem {
    const Matrix* gram = nullptr;     // full Gram matrix; only rows/cols in `index` are read
    std::span<const int> index;       // columns taking part (the support)
    std::span<const double> cross;    // A'b for the columns in `index`, same order
    double norm_sq = 0.0;
    std::span<const double> penalty;  // empty or one entry per column in `index`
    double tolerance = 1e-10;
    int max_iter = 0;
    int rows = 1;                     // M, only used for the default iteration cap
};

SimplexLSSolution solve_simplex_ls(const GramProblem& problem);

/// lambda * ||target - X_j||^2 for every column.
Vector distance_penalties(const Matrix& columns, const Vector& target, double lambda);

}  // namespace scdesign

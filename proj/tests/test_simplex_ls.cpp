#include "helpers.hpp"
#include "oracles.hpp"

#include "scdesign/simplex_ls.hpp"

#include <doctest.h>

#include <random>

using namespace scdesign;
using testing::code_of;

namespace {

double vertex_min(const SimplexLSProblem& p) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p.columns.cols(); ++j) {
        const double pen = p.penalty.size() ? p.penalty(j) : 0.0;
        best = std::min(best, (p.target - p.columns.col(j)).squaredNorm() + pen);
    }
    return best;
}

void check_simplex(const Vector& w) {
    CHECK(w.minCoeff() >= 0.0);
    CHECK(std::abs(w.sum() - 1.0) <= 1e-12);
}

}  // namespace

TEST_CASE("target equal to a column") {
    SimplexLSProblem p;
    p.columns.resize(2, 2);
    p.columns << 4, 2, 1, 3;
    p.target = Vector(2);
    p.target << 2, 3;
    const auto s = solve_simplex_ls(p);
    CHECK(std::abs(s.weights(0)) < 1e-12);
    CHECK(s.weights(1) == doctest::Approx(1.0));
    CHECK(s.objective < 1e-12);
    CHECK(s.status == SolveStatus::Converged);
}

TEST_CASE("convex combination in one dimension") {
    SimplexLSProblem p;
    p.columns.resize(1, 2);
    p.columns << 0, 1;
    p.target = Vector::Constant(1, 0.25);
    const auto s = solve_simplex_ls(p);
    CHECK(s.weights(0) == doctest::Approx(0.75));
    CHECK(s.weights(1) == doctest::Approx(0.25));
    CHECK(s.objective <= 1e-12);
}

TEST_CASE("distance penalty pushes the weight onto the nearest column") {
    SimplexLSProblem p;
    p.columns.resize(1, 2);
    p.columns << 0, 1;
    p.target = Vector::Constant(1, 0.25);
    p.penalty = distance_penalties(p.columns, p.target, 1.0);
    CHECK(p.penalty(0) == 0.0625);
    CHECK(p.penalty(1) == 0.5625);
    const auto s = solve_simplex_ls(p);
    CHECK(s.weights(0) == doctest::Approx(1.0));
    CHECK(std::abs(s.weights(1)) < 1e-12);
    CHECK(s.objective == doctest::Approx(0.125).epsilon(1e-12));

    const auto grid = oracle::simplex_grid(p.columns, p.target, p.penalty, 10000);
    CHECK(grid.objective == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(grid.weights(0) == 1.0);
}

TEST_CASE("distance penalties scale linearly") {
    Matrix cols(1, 2);
    cols << 0, 1;
    const Vector t = Vector::Constant(1, 0.25);
    CHECK(distance_penalties(cols, t, 0.0).isZero());
    CHECK((distance_penalties(cols, t, 2.0) - 2.0 * distance_penalties(cols, t, 1.0)).norm() == 0.0);
    CHECK(code_of([&] { distance_penalties(cols, t, -1.0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("random instances agree with the grid oracle") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<int> kdist(1, 4);
    std::uniform_int_distribution<int> mdist(1, 3);
    for (int trial = 0; trial < 60; ++trial) {
        const int k = kdist(gen);
        const int M = mdist(gen);
        SimplexLSProblem p;
        p.columns = testing::uniform_matrix(gen, M, k, -2, 2);
        p.target = testing::uniform_matrix(gen, M, 1, -2, 2).col(0);
        if (trial % 2) p.penalty = distance_penalties(p.columns, p.target, 0.5);
        const auto s = solve_simplex_ls(p);
        const auto grid = oracle::simplex_grid(p.columns, p.target,
                                               p.penalty.size() ? p.penalty : Vector::Zero(k), 100);
        check_simplex(s.weights);
        CHECK(s.objective <= grid.objective + 1e-12);
        CHECK(grid.objective - s.objective <= 1e-3);
        CHECK(s.objective <= vertex_min(p) + 1e-12);
    }
}

TEST_CASE("scale equivariance") {
    std::mt19937_64 gen(99);
    for (int trial = 0; trial < 20; ++trial) {
        SimplexLSProblem p;
        p.columns = testing::uniform_matrix(gen, 3, 4, -1, 1);
        p.target = testing::uniform_matrix(gen, 3, 1, -1, 1).col(0);
        p.penalty = distance_penalties(p.columns, p.target, 0.3);
        const double c = 3.5;
        SimplexLSProblem q = p;
        q.columns *= c;
        q.target *= c;
        q.penalty *= c * c;
        const auto a = solve_simplex_ls(p);
        const auto b = solve_simplex_ls(q);
        CHECK(b.objective == doctest::Approx(c * c * a.objective).epsilon(1e-8));
        CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("large distance penalties saturate to the nearest column") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 30; ++trial) {
        SimplexLSProblem p;
        p.columns = testing::uniform_matrix(gen, 2, 4, 0, 1);
        p.target = testing::uniform_matrix(gen, 2, 1, 0, 1).col(0);
        double spread = 0.0;
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) spread = std::max(spread, (p.columns.col(a) - p.columns.col(b)).squaredNorm());
        p.penalty = distance_penalties(p.columns, p.target, 1e6 * spread);
        Eigen::Index nearest = 0;
        (p.columns.colwise() - p.target).colwise().squaredNorm().minCoeff(&nearest);
        const auto s = solve_simplex_ls(p);
        CHECK(s.weights(nearest) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("identical columns and single columns") {
    SimplexLSProblem p;
    p.columns.resize(2, 3);
    p.columns << 1, 1, 0, 2, 2, 0;
    p.target = Vector(2);
    p.target << 0.5, 1.0;
    const auto s = solve_simplex_ls(p);
    check_simplex(s.weights);
    CHECK(s.objective <= 1e-12);
    CHECK(s.weights(2) == doctest::Approx(0.5));

    SimplexLSProblem one;
    one.columns = Matrix::Constant(2, 1, 1.0);
    one.target = Vector::Zero(2);
    const auto t = solve_simplex_ls(one);
    CHECK(t.weights(0) == 1.0);
    CHECK(t.objective == 2.0);
}

TEST_CASE("Gram form matches the column form") {
    std::mt19937_64 gen(8);
    const Matrix X = testing::uniform_matrix(gen, 3, 6);
    const Vector target = testing::uniform_matrix(gen, 3, 1).col(0);
    const Matrix G = X.transpose() * X;
    const std::vector<int> idx{1, 3, 4};
    std::vector<double> cross;
    for (int j : idx) cross.push_back(X.col(j).dot(target));
    GramProblem gp;
    gp.gram = &G;
    gp.index = idx;
    gp.cross = cross;
    gp.norm_sq = target.squaredNorm();
    gp.rows = 3;
    SimplexLSProblem p;
    p.columns = oracle::columns(X, idx);
    p.target = target;
    const auto a = solve_simplex_ls(gp);
    const auto b = solve_simplex_ls(p);
    CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-10));
    CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("invalid problems") {
    SimplexLSProblem p;
    p.columns = Matrix::Ones(2, 2);
    p.target = Vector::Ones(3);
    CHECK(code_of([&] { solve_simplex_ls(p); }) == ErrorCode::DimensionMismatch);
    p.target = Vector::Ones(2);
    p.penalty = Vector::Constant(2, -1.0);
    CHECK(code_of([&] { solve_simplex_ls(p); }) == ErrorCode::InvalidArgument);
    p.penalty.resize(0);
    p.tolerance = 0.0;
    CHECK(code_of([&] { solve_simplex_ls(p); }) == ErrorCode::InvalidArgument);
    SimplexLSProblem empty;
    empty.columns.resize(2, 0);
    empty.target = Vector::Ones(2);
    CHECK(code_of([&] { solve_simplex_ls(empty); }) == ErrorCode::DimensionMismatch);
}

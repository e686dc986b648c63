#include "helpers.hpp"
#include "oracles.hpp"

#include "scdesign/estimators.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace scdesign;
using testing::code_of;

namespace {

// One pre-period used for fitting, one blank period, then the experimental periods.
PanelData flat_panel(const Matrix& Y) { return PanelData(Y, Matrix::Zero(Y.rows(), 1), std::nullopt, 2); }

DesignSolution weights(const Vector& w, const Vector& v, std::vector<int> treated) {
    DesignSolution sol;
    sol.w = w;
    sol.v = v;
    sol.treated = std::move(treated);
    return sol;
}

Vector vec(std::initializer_list<double> xs) {
    Vector out(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("one-hot weights give a plain difference") {
    Matrix Y(2, 3);
    Y << 5, 5, 5, 3, 3, 3;
    const PanelData p = flat_panel(Y);
    const auto est = estimate_ate(p, weights(vec({1, 0}), vec({0, 1}), {0}), default_partition(p, 1));
    REQUIRE(est.per_period.size() == 1);
    CHECK(est.per_period(0) == 2.0);
    CHECK(est.placebo(0) == 2.0);
    CHECK(est.estimand == Estimand::ATE);
}

TEST_CASE("three-unit ATE") {
    Matrix Y(3, 3);
    Y.col(0) << 0, 0, 0;
    Y.col(1) << 0, 0, 0;
    Y.col(2) << 1, 2, 4;
    const PanelData p = flat_panel(Y);
    const auto est = estimate_ate(p, weights(vec({.5, .5, 0}), vec({0, 0, 1}), {0, 1}), default_partition(p, 1));
    const Vector col = Y.col(2);
    CHECK(est.per_period(0) == doctest::Approx(vec({.5, .5, 0}).dot(col) - vec({0, 0, 1}).dot(col)));
    CHECK(est.per_period(0) == -2.5);
}

TEST_CASE("ATT agrees in both forms") {
    Matrix Y = Matrix::Zero(4, 3);
    Y.col(2) << 10, 20, 30, 40;
    const PanelData p = flat_panel(Y);
    Matrix V = Matrix::Zero(4, 4);
    V(2, 0) = 1.0;
    V(2, 1) = 0.5;
    V(3, 1) = 0.5;
    const Vector w = vec({.5, .5, 0, 0});
    DesignSolution sol = weights(w, aggregate_unit_level_weights(w, V), {0, 1});
    sol.v_unit = V;
    const auto est = estimate_att(p, sol, default_partition(p, 1));
    CHECK(est.per_period(0) == -17.5);
    CHECK(0.5 * (10 - 30) + 0.5 * (20 - 35) == -17.5);
    CHECK(est.estimand == Estimand::ATT);

    sol.v_unit.reset();
    CHECK(code_of([&] { estimate_att(p, sol, default_partition(p, 1)); }) == ErrorCode::MissingUnitLevelWeights);

    DesignSolution bad = weights(w, vec({0, 0, 1, 0}), {0, 1});
    bad.v_unit = V;
    CHECK(code_of([&] { estimate_att(p, bad, default_partition(p, 1)); }) == ErrorCode::FormMismatch);
}

TEST_CASE("ATT identity on random unit-level designs") {
    std::mt19937_64 gen(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix Y = testing::uniform_matrix(gen, 6, 10, -5, 5);
        const PanelData p(Y, testing::uniform_matrix(gen, 6, 2), std::nullopt, 8);
        const PredictorSet pred = build_predictors(p, default_partition(p, 5), true);
        DesignSpec s;
        s.kind = DesignKind::UnitLevel;
        s.xi = 0.1 + trial;
        const DesignSolution sol = solve_design(pred, s);
        CHECK_NOTHROW(estimate_att(p, sol, pred.partition));
    }
}

TEST_CASE("missing outcomes and dimension errors") {
    Matrix Y(2, 3);
    Y << 1, 1, std::nan(""), 1, 1, 1;
    const PanelData p = flat_panel(Y);
    CHECK(code_of([&] { estimate_ate(p, weights(vec({1, 0}), vec({0, 1}), {0}), default_partition(p, 1)); }) ==
          ErrorCode::MissingOutcome);
    CHECK(code_of([&] { estimate_ate(p, weights(vec({1, 0, 0}), vec({0, 1, 0}), {0}), default_partition(p, 1)); }) ==
          ErrorCode::DimensionMismatch);
}

TEST_CASE("adding a constant to every outcome leaves the gaps unchanged") {
    std::mt19937_64 gen(9);
    const Matrix Y = testing::uniform_matrix(gen, 5, 6);
    const PanelData a(Y, Matrix::Zero(5, 1), std::nullopt, 4);
    const PanelData b((Y.array() + 7.0).matrix(), Matrix::Zero(5, 1), std::nullopt, 4);
    const DesignSolution sol = weights(vec({.3, .7, 0, 0, 0}), vec({0, 0, .2, .3, .5}), {0, 1});
    const auto ea = estimate_ate(a, sol, default_partition(a, 2));
    const auto eb = estimate_ate(b, sol, default_partition(b, 2));
    CHECK((ea.per_period - eb.per_period).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ea.placebo - eb.placebo).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bias correction without features or intercept changes nothing") {
    std::mt19937_64 gen(10);
    const Matrix Y = testing::uniform_matrix(gen, 5, 6);
    const PanelData p(Y, Matrix::Zero(5, 1), std::nullopt, 4);
    const DesignSolution sol = weights(vec({.3, .7, 0, 0, 0}), vec({0, 0, .2, .3, .5}), {0, 1});
    const auto part = default_partition(p, 2);
    const auto plain = estimate_ate(p, sol, part);
    const auto bc = estimate_bias_corrected(p, sol, part, Matrix(0, 5), BiasCorrectionOptions{0.0, false});
    CHECK(bc.bias_corrected);
    CHECK((plain.per_period - bc.per_period).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((plain.placebo - bc.placebo).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("bias correction removes an exactly linear outcome model") {
    std::mt19937_64 gen(13);
    const Matrix features = testing::uniform_matrix(gen, 2, 6);
    Matrix Y(6, 4);
    for (int t = 0; t < 4; ++t) Y.col(t) = (1.0 + t) + (features.transpose() * vec({2.0 - t, 0.5 * t})).array();
    const PanelData p(Y, Matrix::Zero(6, 1), std::nullopt, 3);
    const DesignSolution sol = weights(vec({.4, .6, 0, 0, 0, 0}), vec({0, 0, .25, .25, .25, .25}), {0, 1});
    const auto bc = estimate_bias_corrected(p, sol, default_partition(p, 1), features, BiasCorrectionOptions{0.0, true});
    CHECK(std::abs(bc.per_period(0)) < 1e-10);
    for (int a = 0; a < bc.placebo.size(); ++a) CHECK(std::abs(bc.placebo(a)) < 1e-10);
}

TEST_CASE("bias correction matches a normal-equations oracle") {
    std::mt19937_64 gen(21);
    const int J = 5;
    const Matrix features = testing::uniform_matrix(gen, 1, J);
    const Matrix Y = testing::uniform_matrix(gen, J, 3, -3, 3);
    const PanelData p(Y, Matrix::Zero(J, 1), std::nullopt, 2);
    const Vector w = vec({.6, .4, 0, 0, 0});
    const Vector v = vec({0, 0, .5, .2, .3});
    const DesignSolution sol = weights(w, v, {0, 1});
    const double ridge = 0.1;
    const auto bc = estimate_bias_corrected(p, sol, default_partition(p, 1), features, BiasCorrectionOptions{ridge, true});

    for (const int t : {1, 2}) {
        const std::vector<int> untreated{2, 3, 4};
        Vector residual(J);
        const Matrix Xu = oracle::columns(features, untreated);
        Vector yu(3);
        for (int b = 0; b < 3; ++b) yu(b) = Y(untreated[b], t);
        const Vector full = oracle::ridge_predict(Xu, yu, features, ridge, true);
        for (int j = 0; j < J; ++j) residual(j) = Y(j, t) - full(j);
        for (int b = 0; b < 3; ++b) {
            std::vector<int> rest;
            for (int c = 0; c < 3; ++c)
                if (c != b) rest.push_back(untreated[c]);
            Vector yr(2);
            for (int c = 0; c < 2; ++c) yr(c) = Y(rest[c], t);
            const Vector loo = oracle::ridge_predict(oracle::columns(features, rest), yr,
                                                     features.col(untreated[b]), ridge, true);
            residual(untreated[b]) = Y(untreated[b], t) - loo(0);
        }
        const double expected = w.dot(residual) - v.dot(residual);
        const double got = t == 1 ? bc.placebo(0) : bc.per_period(0);
        CHECK(got == doctest::Approx(expected).epsilon(1e-8));
    }
}

TEST_CASE("bias correction errors") {
    const Matrix features = Matrix::Ones(2, 4);
    Matrix Y = Matrix::Ones(4, 3);
    Y(2, 2) = 2;
    const PanelData p(Y, Matrix::Zero(4, 1), std::nullopt, 2);
    const DesignSolution sol = weights(vec({1, 0, 0, 0}), vec({0, .5, .5, 0}), {0});
    CHECK(code_of([&] { estimate_bias_corrected(p, sol, default_partition(p, 1), features, {0.0, false}); }) ==
          ErrorCode::SingularRegression);
    CHECK(code_of([&] { estimate_bias_corrected(p, sol, default_partition(p, 1), features, {-1.0, true}); }) ==
          ErrorCode::InvalidArgument);
    const DesignSolution wide = weights(vec({.3, .3, .4, 0}), vec({0, 0, 0, 1}), {0, 1, 2});
    CHECK(code_of([&] { estimate_bias_corrected(p, wide, default_partition(p, 1), features, {}); }) ==
          ErrorCode::EmptyDonorPool);
}

TEST_CASE("mean absolute error of the published estimates") {
    const Vector tau_hat = vec({-17.54, -18.70, 0.46, -4.47, -2.02});
    const Vector tau = vec({-15.55, -17.76, 2.52, -4.92, -3.27});
    CHECK(std::abs(mae(tau_hat, tau) - 1.34) <= 0.005);
    CHECK(mae(tau, tau) == 0.0);
    CHECK(mae((tau.array() + 1.5).matrix(), tau) == doctest::Approx(1.5));
    CHECK(mae(tau_hat, tau) == mae(tau, tau_hat));
    CHECK(code_of([&] { mae(tau, vec({1})); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("bias bound") {
    BiasBoundInputs in;
    in.T_E = 4;
    CHECK(std::abs(bias_bound(in) - 2.0) <= 1e-12);
    BiasBoundInputs longer = in;
    longer.T_E = 16;
    CHECK(bias_bound(longer) == doctest::Approx(1.0).epsilon(1e-12));
    BiasBoundInputs wide = in;
    wide.J = 8;
    CHECK(bias_bound(wide) == doctest::Approx(2.0 * std::sqrt(8.0)).epsilon(1e-12));
    BiasBoundInputs bad = in;
    bad.zeta_lo = 0;
    CHECK(code_of([&] { bias_bound(bad); }) == ErrorCode::InvalidArgument);
}

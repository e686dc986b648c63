#pragma once

#include "scdesign/estimators.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace scdesign {

/// r = (experimental estimates in period order, blank-period placebos in period order).
struct ResidualVector {
    Vector values;
    int T1 = 0;
    int T_B = 0;
};

ResidualVector build_residuals(const EffectEstimate& est);

enum class StatisticKind { MeanAbs, Lp, OneSidedPos, OneSidedNeg };

struct Statistic {
    StatisticKind kind = StatisticKind::MeanAbs;
    double p = 2.0;  // exponent for Lp
};

std::string to_string(const Statistic& stat);
std::optional<Statistic> parse_statistic(const std::string& name);

/// mean |e|, (mean |e|^p)^(1/p), mean e, or mean -e.
double test_statistic(const Vector& e, const Statistic& stat);

struct InferenceOptions {
    Statistic statistic;
    bool sampled = false;
    std::uint64_t samples = 0;  // M, sampled mode only
    std::uint64_t seed = 0;
    std::uint64_t exact_cap = 10'000'000;
};

struct InferenceResult {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;
    double p_value = 1.0;
    std::uint64_t n_combinations = 0;  // combinations evaluated: |Pi| in exact mode, M in sampled mode
    std::uint64_t population = 0;      // |Pi|
    bool sampled = false;
    std::uint64_t seed = 0;
    Statistic statistic;
    double observed = 0.0;
};

/// Share of T1-subsets of r whose statistic is at least the observed one.
/// Sampled mode draws M distinct subsets that always include the observed one.
InferenceResult p_value(const ResidualVector& r, const InferenceOptions& options);

/// C(n, k), saturating at UINT64_MAX.
std::uint64_t binomial(int n, int k);

/// k-subset of {0..n-1} with the given lexicographic rank.
std::vector<int> unrank_combination(int n, int k, std::uint64_t rank);

}  // namespace scdesign

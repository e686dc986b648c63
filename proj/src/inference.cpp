#include "scdesign/inference.hpp"

#include "scdesign/error.hpp"
#include "scdesign/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace scdesign {

ResidualVector build_residuals(const EffectEstimate& est) {
    if (est.placebo.size() == 0) throw Error(ErrorCode::NoBlankPeriods, "the estimate has no blank-period placebos");
    if (est.per_period.size() == 0) throw Error(ErrorCode::InvalidArgument, "the estimate has no experimental periods");
    ResidualVector r;
    r.T1 = static_cast<int>(est.per_period.size());
    r.T_B = static_cast<int>(est.placebo.size());
    r.values.resize(r.T1 + r.T_B);
    r.values << est.per_period, est.placebo;
    return r;
}

std::string to_string(const Statistic& stat) {
    switch (stat.kind) {
        case StatisticKind::MeanAbs: return "mean_abs";
        case StatisticKind::OneSidedPos: return "one_sided_pos";
        case StatisticKind::OneSidedNeg: return "one_sided_neg";
        case StatisticKind::Lp: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "lp(%g)", stat.p);
            return buf;
        }
    }
    return "unknown";
}

std::optional<Statistic> parse_statistic(const std::string& name) {
    if (name == "mean_abs") return Statistic{StatisticKind::MeanAbs, 2.0};
    if (name == "one_sided_pos") return Statistic{StatisticKind::OneSidedPos, 2.0};
    if (name == "one_sided_neg") return Statistic{StatisticKind::OneSidedNeg, 2.0};
    if (name.size() > 4 && name.rfind("lp(", 0) == 0 && name.back() == ')') {
        try {
            std::size_t used = 0;
            const std::string inner = name.substr(3, name.size() - 4);
            const double p = std::stod(inner, &used);
            if (used == inner.size() && p >= 1.0 && std::isfinite(p)) return Statistic{StatisticKind::Lp, p};
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

double test_statistic(const Vector& e, const Statistic& stat) {
    if (e.size() == 0) throw Error(ErrorCode::InvalidArgument, "statistic of an empty vector");
    switch (stat.kind) {
        case StatisticKind::MeanAbs: return e.cwiseAbs().mean();
        case StatisticKind::Lp:
            if (!(stat.p >= 1.0)) throw Error(ErrorCode::InvalidArgument, "lp exponent must be at least 1");
            return std::pow(e.cwiseAbs().array().pow(stat.p).mean(), 1.0 / stat.p);
        case StatisticKind::OneSidedPos: return e.mean();
        case StatisticKind::OneSidedNeg: return -e.mean();
    }
    throw Error(ErrorCode::Internal, "unknown statistic");
}

std::uint64_t binomial(int n, int k) {
    if (k < 0 || n < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 acc = 1;
    for (int i = 1; i <= k; ++i) {
        acc = acc * static_cast<unsigned>(n - k + i) / static_cast<unsigned>(i);
        if (acc > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    }
    return static_cast<std::uint64_t>(acc);
}

std::vector<int> unrank_combination(int n, int k, std::uint64_t rank) {
    if (rank >= binomial(n, k)) throw Error(ErrorCode::InvalidArgument, "combination rank out of range");
    std::vector<int> out;
    out.reserve(k);
    int next = 0;
    for (int slot = 0; slot < k; ++slot) {
        // Skip candidates whose block of combinations lies entirely before `rank`.
        while (true) {
            const std::uint64_t block = binomial(n - next - 1, k - slot - 1);
            if (rank < block) break;
            rank -= block;
            ++next;
        }
        out.push_back(next++);
    }
    return out;
}

namespace {

bool next_combination(std::vector<int>& c, int n) {
    const int k = static_cast<int>(c.size());
    int i = k - 1;
    while (i >= 0 && c[i] == n - k + i) --i;
    if (i < 0) return false;
    ++c[i];
    for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
    return true;
}

}  // namespace

InferenceResult p_value(const ResidualVector& r, const InferenceOptions& options) {
    const int n = static_cast<int>(r.values.size());
    const int k = r.T1;
    if (r.T_B < 1) throw Error(ErrorCode::NoBlankPeriods, "residual vector has no blank periods");
    if (k < 1 || k + r.T_B != n) throw Error(ErrorCode::DimensionMismatch, "residual vector sizes are inconsistent");
    if (!r.values.allFinite()) throw Error(ErrorCode::InvalidArgument, "residual vector has non-finite entries");

    const std::uint64_t population = binomial(n, k);
    if (population == std::numeric_limits<std::uint64_t>::max()) {
        throw Error(ErrorCode::CombinationCapExceeded, "number of combinations overflows 64 bits");
    }

    InferenceResult result;
    result.population = population;
    result.sampled = options.sampled;
    result.seed = options.seed;
    result.statistic = options.statistic;

    std::vector<int> combo(k);
    Vector e(k);
    auto statistic_of = [&](const std::vector<int>& idx) {
        for (int a = 0; a < k; ++a) e(a) = r.values(idx[a]);
        return test_statistic(e, options.statistic);
    };
    for (int a = 0; a < k; ++a) combo[a] = a;
    result.observed = statistic_of(combo);
    // Ties within rounding count as exceeding; the tolerance scales with r.
    const double tol = 1e-12 * r.values.cwiseAbs().maxCoeff();
    const double threshold = result.observed - tol;

    std::uint64_t hits = 0;
    if (!options.sampled) {
        if (population > options.exact_cap) {
            throw Error(ErrorCode::CombinationCapExceeded, std::to_string(population) +
                                                               " combinations exceed the exact-mode cap of " +
                                                               std::to_string(options.exact_cap));
        }
        do {
            if (statistic_of(combo) >= threshold) ++hits;
        } while (next_combination(combo, n));
        result.n_combinations = population;
    } else {
        const std::uint64_t M = options.samples;
        if (M < 1) throw Error(ErrorCode::InvalidArgument, "sample size must be positive");
        if (M > population) {
            throw Error(ErrorCode::SampleLargerThanPopulation,
                        std::to_string(M) + " samples requested from " + std::to_string(population) + " combinations");
        }
        // Rank 0 is the observed subset; Floyd's algorithm picks M-1 distinct
        // ranks from [1, population).
        Rng rng(options.seed);
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(static_cast<std::size_t>(M));
        const std::uint64_t pool = population - 1;
        const std::uint64_t draws = M - 1;
        for (std::uint64_t j = pool - draws; j < pool; ++j) {
            const std::uint64_t t = rng.below(j + 1);
            if (!chosen.insert(t + 1).second) chosen.insert(j + 1);
        }
        std::vector<std::uint64_t> ranks(chosen.begin(), chosen.end());
        ranks.push_back(0);
        std::sort(ranks.begin(), ranks.end());
        for (const std::uint64_t rank : ranks) {
            if (statistic_of(unrank_combination(n, k, rank)) >= threshold) ++hits;
        }
        result.n_combinations = M;
    }
    result.numerator = hits;
    result.denominator = result.n_combinations;
    result.p_value = static_cast<double>(hits) / static_cast<double>(result.denominator);
    return result;
}

}  // namespace scdesign

#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace scdesign {

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// xoshiro256** (Blackman & Vigna), seeded through splitmix64.
///
/// All draws in the library go through this type so that a seed fixes every
/// panel, cluster initialisation and sampled p-value bit-for-bit on any
/// platform. Derived quantities are specified exactly:
///   uniform()   = (next() >> 11) * 2^-53, in [0, 1)
///   normal()    = Box-Muller on two uniforms (u1 first, 1 - u1 used in the log)
///   below(n)    = rejection sampling on next() to remove modulo bias
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) noexcept;

    /// Independent stream for replication/stream `index` under a master seed.
    static Rng substream(std::uint64_t seed, std::uint64_t index) noexcept;
    static std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return next(); }
    result_type next() noexcept;

    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal(double mean = 0.0, double sd = 1.0) noexcept;
    /// Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace scdesign

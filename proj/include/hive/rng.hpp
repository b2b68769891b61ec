#pragma once

#include <cstdint>
#include <limits>

namespace hive {

/// SplitMix64 finalizer, used both as a generator step and as a stream mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Small deterministic generator (SplitMix64). Identical sequences on every
/// platform, unlike the std distributions.
class Rng {
public:
    using result_type = std::uint64_t;

    constexpr explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    /// Independent stream keyed by (seed, a, b, c). Used to give every unit its
    /// own generator per tick so evaluation order does not matter.
    static constexpr Rng stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                                std::uint64_t c = 0) {
        std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
        h = mix64(h ^ (a + 0x632be59bd9b4e019ULL));
        h = mix64(h ^ (b + 0x8cb92ba72f3d8dd7ULL));
        h = mix64(h ^ (c + 0x2545f4914f6cdd1dULL));
        return Rng(h);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() { return next(); }

    constexpr std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    /// Uniform in [0, 1).
    constexpr double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    constexpr double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be > 0.
    constexpr std::uint64_t below(std::uint64_t n) {
        // Lemire's rejection-free is overkill here; modulo bias is < 2^-40 for our n.
        return next() % n;
    }

    constexpr std::uint64_t state() const { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace hive

#pragma once

#include <cmath>
#include <cstdint>

namespace npdw::rng {

// Generator identity; bump when the mixing function or any distribution
// routine changes, since recorded experiments depend on the exact stream.
inline constexpr const char* kGeneratorId = "splitmix64-v1";

namespace detail {
inline constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace detail

// Counter-based stream: output i is mix64(seed + (i+1)*gamma), so a stream
// is fully determined by (seed, counter) and never touches global state.
class Stream {
public:
    Stream() = default;
    explicit Stream(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64() {
        ++counter_;
        return detail::mix64(seed_ + counter_ * detail::kGamma);
    }

    // Independent child stream; derivation consumes no draws from the parent.
    Stream substream(std::uint64_t index) const {
        return Stream(detail::mix64(seed_ ^ detail::mix64((index + 1) * 0xD1342543DE82EF95ull)));
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n); n > 0.
    std::uint32_t below(std::uint32_t n) {
        return static_cast<std::uint32_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Knuth's product method; fine for the trace-rate regime used here.
    int poisson(double lambda) {
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // One Box-Muller value per call (the sine branch is discarded).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace npdw::rng

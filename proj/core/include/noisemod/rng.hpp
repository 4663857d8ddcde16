#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace noisemod {

/// Deterministic random stream. Identical seeds produce identical sample
/// sequences on every platform and thread layout; substreams derived with
/// the same keys are likewise identical. The raw generator is the fully
/// specified std::mt19937_64; all variate transforms are closed-form so no
/// implementation-defined distribution code is involved.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

    /// Child stream keyed by (this stream's seed, keys...). Used to give
    /// each purpose/epoch/example its own independent stream.
    RngStream derive(std::initializer_list<std::uint64_t> keys) const {
        std::uint64_t s = seed_;
        for (std::uint64_t k : keys) s = mix(s ^ (k + 0x9e3779b97f4a7c15ULL));
        return RngStream(s);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on the open interval (0,1); safe under log().
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace noisemod

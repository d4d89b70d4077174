#pragma once

#include <cstdint>
#include <vector>

namespace clustex {

/// SplitMix64 generator. Used everywhere randomness is needed so that runs
/// are bit-identical for a given seed regardless of the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        // rejection sampling, no modulo bias
        const std::uint64_t threshold = (0ULL - bound) % bound;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Stage seeds fan out from the root seed by counter: each stage hashes
/// (root, counter) through one SplitMix64 step, so stages can be rerun in
/// isolation with the same randomness as a full pipeline run.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t counter) {
    Rng rng(root ^ (0xa076'1d64'78bd'642fULL * (counter + 1)));
    return rng.next_u64();
}

}  // namespace clustex

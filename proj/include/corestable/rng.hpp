#pragma once

#include <cstdint>
#include <limits>

namespace corestable {

/// Counter-based generator: draw i of stream (seed, stream) is a SplitMix64
/// finalization of seed ⊕ stream-mix ⊕ i. Output depends only on the seed,
/// the stream id and the number of draws, never on the platform's <random>.
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed) ^ mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept { return mix(key_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound) noexcept {
        // Lemire's multiply-shift with rejection.
        for (;;) {
            const auto r = (*this)();
            const auto prod = static_cast<unsigned __int128>(r) * bound;
            const auto low = static_cast<std::uint64_t>(prod);
            if (low >= bound || low >= (0 - bound) % bound) {
                return static_cast<std::uint64_t>(prod >> 64);
            }
        }
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Independent generator keyed by this one's key and `stream`.
    CounterRng split(std::uint64_t stream) const noexcept { return CounterRng(key_, stream + 1); }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace corestable

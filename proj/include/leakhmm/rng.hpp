#pragma once

#include <cstdint>
#include <random>

namespace leakhmm::util {

// SplitMix64 step; used to derive independent streams from (seed, counter).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream split: the engine for stream i of a given seed is a
// pure function of (seed, i), so parallel consumers can draw independent
// streams in any order and the result never depends on the worker count.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t counter) {
    return splitmix64(splitmix64(seed) ^ splitmix64(counter * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with explicit uniform mappings.  The standard distributions are
// implementation-defined; these mappings are pinned so outputs are identical
// across platforms and toolchains.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    Rng(std::uint64_t seed, std::uint64_t counter) : eng_(stream_seed(seed, counter)) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n) by rejection; exact for n <= 2^63.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t v;
        do {
            v = eng_();
        } while (v >= limit);
        return v % n;
    }

    int pm_one() { return (eng_() >> 63) ? -1 : 1; }

  private:
    std::mt19937_64 eng_;
};

} // namespace leakhmm::util

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace moco {

namespace detail {

// murmur3 64-bit finalizer; bijective mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

}  // namespace detail

// Counter-based generator: draw i of stream s under seed k is a pure
// function of (k, s, i), so sequences are identical regardless of thread
// count or evaluation order.
class SeededRng {
public:
    SeededRng() : SeededRng(0, 0) {}
    SeededRng(std::uint64_t seed, std::uint64_t stream)
        : seed_(seed), stream_(stream), counter_(0) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    // Independent stream under the same seed.
    SeededRng split(std::uint64_t substream) const {
        return SeededRng(seed_, detail::mix64(stream_ + 0x9e3779b97f4a7c15ULL * (substream + 1)));
    }

    void skip(std::uint64_t n) { counter_ += n; }

    std::uint64_t next_u64() {
        std::uint64_t v = detail::mix64(seed_ + 0x9e3779b97f4a7c15ULL);
        v = detail::mix64(v ^ (0xbf58476d1ce4e5b9ULL * (stream_ + 1)));
        v = detail::mix64(v ^ (0x94d049bb133111ebULL * (counter_ + 1)));
        ++counter_;
        return v;
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two draws per call.
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    int rademacher_one() { return (next_u64() & 1u) ? 1 : -1; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

inline std::vector<double> rademacher(SeededRng& rng, std::size_t n) {
    if (n == 0) throw std::invalid_argument("rademacher: n must be >= 1");
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(rng.rademacher_one());
    return v;
}

}  // namespace moco

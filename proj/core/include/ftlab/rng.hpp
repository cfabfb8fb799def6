#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>

namespace ftlab {

// FNV-1a, fixed here so substream derivation does not depend on the
// standard library's std::hash implementation.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// All randomness in a run flows from one master seed through named
// substreams ("init", "batching", "sae", ...), so stages can be re-run
// independently without disturbing each other.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng substream(std::uint64_t master_seed, std::string_view name) {
        std::uint64_t h = fnv1a(name);
        // splitmix64 final mix over (master, name-hash)
        std::uint64_t x = master_seed ^ (h + 0x9e3779b97f4a7c15ull);
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        x ^= x >> 31;
        return Rng(x);
    }

    std::uint64_t next_u64() { return engine_(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        // Box-Muller without caching the spare: one state draw per call
        // keeps the stream position easy to reason about in checkpoints.
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Truncated normal: redraw until within [-2, 2] sigma, then scale.
    double trunc_normal(double sigma) {
        double v = normal();
        while (v < -2.0 || v > 2.0) v = normal();
        return v * sigma;
    }

    template <class It>
    void shuffle(It first, It last) {
        auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[below(i)]);
        }
    }

    std::mt19937_64& engine() { return engine_; }

    // Exact state round-trip for checkpoints (text form of mt19937_64).
    std::string serialize() const;
    void deserialize(const std::string& state);

private:
    std::mt19937_64 engine_;
};

}  // namespace ftlab

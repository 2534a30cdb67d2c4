#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace trifusion {

// Counter-based deterministic RNG. Each output is a pure function of
// (seed, counter), so streams can be derived, forked and replayed without
// shared state. Identical seed and call sequence give identical values on
// every platform with IEEE-754 doubles.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : seed_(seed) {}

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }

    uint64_t next_u64() {
        ++counter_;
        return mix(seed_ + 0x9E3779B97F4A7C15ULL * counter_);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    // Standard normal via Box-Muller. Consumes two draws per call; no
    // cached state so the stream position stays a plain counter.
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Independent stream labelled by a string (e.g. "init", "val").
    Rng derive(std::string_view label) const {
        uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (const char c : label) {
            h ^= static_cast<uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(mix(seed_ ^ h));
    }

    // Independent stream indexed by an integer (e.g. step or sample id).
    Rng derive(uint64_t index) const { return Rng(mix(seed_ ^ mix(index + 0x9E3779B97F4A7C15ULL))); }

    static uint64_t mix(uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

private:
    uint64_t seed_ = 0;
    uint64_t counter_ = 0;
};

}  // namespace trifusion

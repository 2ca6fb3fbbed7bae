// Deterministic random number generation.
//
// Every stochastic component in the toolkit draws from these generators so
// that a (seed, config) pair fully determines the output, independent of
// platform, standard-library version, and thread count.  std::* distributions
// are implementation-defined and are deliberately not used.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace trapkit {

// SplitMix64 step; used for seeding and for mixing seed components.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Mixes an extra component into a seed (order-sensitive).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t component) {
    std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ULL + component);
    return splitmix64(s);
}

// FNV-1a, for folding strings into seeds.
constexpr std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : text) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stage seeds are derived from the global seed and the stage name so each
// pipeline stage is independently reproducible.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    return mix_seed(base, fnv1a(tag));
}

// xoshiro256++ with SplitMix64 seeding.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi] inclusive, bias-free via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
        const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
        std::uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return lo + static_cast<std::int64_t>(draw % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the spare value is cached, so draw order is deterministic.
    double normal(double mean = 0.0, double sd = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return mean + sd * radius * std::cos(angle);
    }

    // Exponential with the given mean, by inversion.
    double exponential(double mean) {
        double u = 0.0;
        do {
            u = uniform();
        } while (u <= 0.0);
        return -mean * std::log(u);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace trapkit

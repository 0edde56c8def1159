#pragma once

#include <cmath>
#include <cstdint>

#include "tdreg/atoms.hpp"

namespace tdreg {

// Fixed 64-bit generator (splitmix64-seeded xoshiro256**): integer state only,
// so seeded streams are bit-identical across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal() {
        // Box-Muller; one fresh pair per call keeps the stream stateless.
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

// Splittable per-trial stream: trial i of a run seeded with `master` always sees
// the same substream regardless of which other trials run.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    x ^= x >> 33;
    x *= 0xFF51AFD7ED558CCDULL;
    x ^= x >> 33;
    x *= 0xC4CEB9FE1A85EC53ULL;
    x ^= x >> 33;
    return x;
}

// Random reference pattern: 20 atoms with psi in [-pi, pi), centers in [-4, 4]^2,
// scales in [0.3, 2.3], coefficients in [-1, 1].
inline Pattern synth_random_reference(std::uint64_t seed, int atom_count = 20) {
    Rng rng(seed);
    Pattern p;
    p.atoms.reserve(static_cast<size_t>(atom_count));
    for (int k = 0; k < atom_count; ++k) {
        const double psi = rng.uniform(-kPi, kPi);
        const Vec2 tau{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
        const Vec2 sigma{rng.uniform(0.3, 2.3), rng.uniform(0.3, 2.3)};
        const double c = rng.uniform(-1.0, 1.0);
        p.atoms.push_back({c, AtomParams(psi, tau, sigma)});
    }
    return p;
}

// Noise pattern of `count` small-scale atoms with normal coefficients, rescaled
// so that its L2 norm is exactly target_nu. target_nu = 0 gives the empty pattern.
inline Pattern synth_noise_pattern(int count, double scale_lo, double scale_hi, double target_nu,
                                   std::uint64_t seed) {
    if (!(target_nu >= 0.0)) throw std::invalid_argument("synth_noise_pattern: target_nu must be >= 0");
    if (target_nu == 0.0) return Pattern{};
    Rng rng(seed);
    Pattern n;
    n.atoms.reserve(static_cast<size_t>(count));
    for (int k = 0; k < count; ++k) {
        const double psi = rng.uniform(-kPi, kPi);
        const Vec2 tau{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)};
        const Vec2 sigma{rng.uniform(scale_lo, scale_hi), rng.uniform(scale_lo, scale_hi)};
        n.atoms.push_back({rng.normal(), AtomParams(psi, tau, sigma)});
    }
    const double norm = pattern_norm(n);
    if (norm == 0.0) throw std::runtime_error("synth_noise_pattern: degenerate zero-norm draw");
    return n.scaled(target_nu / norm);
}

}  // namespace tdreg

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace volnmf {

// xoshiro256** seeded through splitmix64. Chosen over <random> engines so the
// produced streams (including the normal/gamma transforms below) are the same
// on every platform. Sub-streams for parallel work are derived with split(),
// which hashes (base seed, stream index) through splitmix64; streams with
// distinct indices are independent for all practical purposes.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    Rng split(std::uint64_t stream) const {
        std::uint64_t x = seed_words_mixed() ^ (0x9E3779B97F4A7C15ULL + stream * 0xBF58476D1CE4E5B9ULL);
        return Rng(splitmix64(x));
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

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1], safe as a log() argument.
    double uniform01_open_low() { return 1.0 - uniform01(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller; two uniforms per draw keeps the stream layout simple.
        const double u1 = uniform01_open_low();
        const double u2 = uniform01();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
        return mean + stddev * z;
    }

    // Gamma(shape, 1) via Marsaglia-Tsang, boosted for shape < 1.
    double gamma(double shape) {
        if (shape <= 0.0)
            throw std::invalid_argument("Rng::gamma: shape must be positive");
        if (shape < 1.0) {
            const double u = uniform01_open_low();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        while (true) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform01_open_low();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    // Dirichlet(alpha * ones(r)) as normalized Gamma draws.
    std::vector<double> dirichlet(double alpha, std::size_t r) {
        if (alpha <= 0.0)
            throw std::invalid_argument("Rng::dirichlet: alpha must be positive");
        std::vector<double> v(r);
        double total = 0.0;
        for (auto& x : v) {
            x = gamma(alpha);
            total += x;
        }
        if (total <= 0.0) {
            // All-underflow corner: fall back to a uniform vertex.
            const std::size_t k = static_cast<std::size_t>(uniform01() * static_cast<double>(r)) % r;
            for (auto& x : v) x = 0.0;
            v[k] = 1.0;
            return v;
        }
        for (auto& x : v) x /= total;
        return v;
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_words_mixed() const {
        return state_[0] ^ rotl(state_[1], 13) ^ rotl(state_[2], 29) ^ rotl(state_[3], 47);
    }

    std::uint64_t state_[4] = {};
};

}  // namespace volnmf

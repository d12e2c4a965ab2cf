#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pamk {

/// Deterministic random stream. All randomness in the toolkit flows through
/// this wrapper so results do not depend on the standard library's
/// distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [-limit, limit).
    double uniform_symmetric(double limit) {
        return (2.0 * uniform() - 1.0) * limit;
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling keeps the draw unbiased and portable.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    std::uint64_t next_raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Expands one master seed into independent streams keyed by a label, so
/// partial pipeline reruns keep their randomness stable.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
    // FNV-1a over the label, then a splitmix64 finalizer.
    std::uint64_t h = 14695981039346656037ULL;
    for (const char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace pamk

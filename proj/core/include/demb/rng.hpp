#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace demb {

// Deterministic random source. std::mt19937_64 has a fully specified output
// sequence, but the std distributions do not, so the transforms live here:
// same seed means the same doubles on every platform and compiler.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53 bits of mantissa.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_int(std::uint64_t n) { return engine_() % n; }

    // Standard normal via Box-Muller, one cached value.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    // Fisher-Yates; unlike std::shuffle the result depends only on the seed.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Module offsets applied to the global seed so partial reruns stay aligned.
namespace seed_offset {
inline constexpr std::uint64_t corpus = 0;
inline constexpr std::uint64_t dataset = 1;
inline constexpr std::uint64_t encoder_init = 2;
inline constexpr std::uint64_t vocab_align = 3;
inline constexpr std::uint64_t trainer = 4;
inline constexpr std::uint64_t projection = 5;
inline constexpr std::uint64_t synthesis = 6;
}  // namespace seed_offset

}  // namespace demb

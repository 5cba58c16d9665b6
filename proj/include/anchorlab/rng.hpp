#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace anchorlab {

// SplitMix64 counter generator (Steele, Lea, Flood 2014). Chosen over
// std::mt19937 because the output stream is fixed by the algorithm alone,
// so fixtures generated from a seed are identical on every platform.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0,1), 53 bits of mantissa
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0,n); modulo bias is irrelevant at the sizes used here
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller, second value cached
    double next_gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0,1], keeps log() finite
        const double u2 = next_double();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Knuth's product method; fine for the small rates used by the synth harness
    int next_poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= next_double();
        } while (p > limit);
        return k - 1;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used to derive independent per-file streams from one master seed
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace anchorlab

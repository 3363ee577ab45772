#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sspd {

namespace detail {
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

// Deterministic RNG stream. Distribution sampling is implemented here rather
// than with std:: distributions so that replay is bit-exact across standard
// library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), engine_(detail::splitmix64(seed)) {}

    // Derive an independent stream, e.g. per (global seed, clip index).
    Rng fork(uint64_t stream) const {
        return Rng(detail::splitmix64(seed_ ^ detail::splitmix64(stream + 0x51ed2701)));
    }

    uint64_t next_u64() { return engine_(); }

    double uniform() {  // [0, 1)
        return (next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    double gaussian(double mean, double std) { return mean + std * gaussian(); }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0;
};

}  // namespace sspd

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace altmin {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape mismatch between operands of a linear-algebra or model operation.
struct DimensionError : Error {
    using Error::Error;
};

// Malformed on-disk payload (IDX, checkpoint, CSV, config).
struct FormatError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// NaN/Inf reached a value that must stay finite. `layer` is 1-based where it
// applies, 0 otherwise.
struct NumericError : Error {
    int layer = 0;
    explicit NumericError(const std::string& what, int layer_index = 0)
        : Error(what), layer(layer_index) {}
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG. Draw order is part of every caller's contract: the same
// seed must reproduce identical streams across runs and platforms, so doubles
// are built from raw engine bits instead of std::*_distribution (whose output
// is implementation-defined).
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix64(seed ^ 0x853c49e6748fea9bULL)) {
        for (int i = 0; i < 4; ++i) next_u64();
    }

    uint64_t next_u64() {
        state_ = splitmix64(state_);
        return state_;
    }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Box-Muller; one spare is cached, so draws come in a fixed order.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        // Rejection sampling keeps the distribution exact for any n.
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Independent substream d of a master seed.
inline uint64_t substream(uint64_t seed, uint64_t stream) {
    return splitmix64(seed ^ splitmix64(stream + 0x4cf5ad432745937fULL));
}

}  // namespace altmin

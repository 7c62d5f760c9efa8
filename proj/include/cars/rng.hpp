#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "cars/errors.hpp"

namespace cars {

// Seeded random source. Wraps std::mt19937 but implements all distributions
// by hand so that draw sequences are stable across standard libraries and
// can be checkpointed exactly (distribution objects carry no hidden state).
class Rng {
  public:
    Rng() : gen_(0) {}
    explicit Rng(uint64_t seed) : gen_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    uint32_t next_u32() { return gen_(); }

    // Unbiased integer in [0, n). Lemire's multiply-shift with rejection.
    uint32_t u32(uint32_t n) {
        if (n == 0) throw UsageError("Rng::u32 with n == 0");
        uint64_t m = static_cast<uint64_t>(gen_()) * n;
        auto lo = static_cast<uint32_t>(m);
        if (lo < n) {
            const uint32_t t = (0u - n) % n;
            while (lo < t) {
                m = static_cast<uint64_t>(gen_()) * n;
                lo = static_cast<uint32_t>(m);
            }
        }
        return static_cast<uint32_t>(m >> 32);
    }

    int index(size_t n) { return static_cast<int>(u32(static_cast<uint32_t>(n))); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        const uint64_t hi = gen_();
        const uint64_t lo = gen_();
        return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, no cached spare (two draws per call, fully stateless).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    float normal_f(float stddev) { return static_cast<float>(normal() * stddev); }

    // Child stream for independent draw sequences.
    Rng fork() {
        const uint64_t s = (static_cast<uint64_t>(gen_()) << 32) | gen_();
        return Rng(s);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    static Rng deserialize(const std::string& text) {
        Rng r;
        std::istringstream is(text);
        is >> r.gen_;
        if (!is) throw CorruptFileError("bad rng state string");
        return r;
    }

    bool operator==(const Rng& other) const { return gen_ == other.gen_; }

  private:
    std::mt19937 gen_;
};

} // namespace cars

#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace mixgen {

// Counter-based deterministic RNG (xoshiro256** core, splitmix64 seeding).
// std::mt19937 + std distributions are implementation-defined, so everything
// random in the project goes through this.
struct Rng {
    uint64_t s[4];

    explicit Rng(uint64_t seed = 0) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s) w = splitmix64(x);
        has_cached_ = false;
    }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    uint64_t next_u64() {
        const uint64_t result = rotl(s[1] * 5, 7) * 9;
        const uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Derive an independent substream, e.g. per track or per song.
    Rng fork(uint64_t stream) const {
        uint64_t x = s[0] ^ (0x6a09e667f3bcc908ULL + stream * 0x100000001b3ULL);
        uint64_t seed = splitmix64(x);
        return Rng(seed ^ stream);
    }

    double uniform() {  // [0, 1)
        return double(next_u64() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }
    // Box-Muller with cached second value.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = 2.0 * M_PI * u2;
        cached_ = r * std::sin(th);
        has_cached_ = true;
        return r * std::cos(th);
    }
    float normalf() { return float(normal()); }
    // Uniform integer in [0, n).
    uint64_t randint(uint64_t n) { return n ? next_u64() % n : 0; }

private:
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Warnings are counted so tests can assert on them.
std::atomic<uint64_t>& warn_count();
void warn(const std::string& msg);

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

// Static-partition parallel for. Each index is computed independently, so the
// result does not depend on the number of threads.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body,
                  int n_threads = 0);

int default_threads();
void set_default_threads(int n);

inline double db_to_lin(double db) { return std::pow(10.0, db / 20.0); }
inline double lin_to_db(double lin) { return 20.0 * std::log10(lin); }

std::string format_str(const char* fmt, ...);

}  // namespace mixgen

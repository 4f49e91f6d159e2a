#include "mil/rng.hpp"

#include <cmath>
#include <numbers>

namespace mil {
namespace {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Public-domain constants.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : state_(mix64(seed)) {}

Rng::Rng(std::uint64_t state, int) : state_(state) {}

Rng Rng::fork(std::string_view tag) const {
    return Rng(mix64(state_ ^ mix64(fnv1a64(tag))), 0);
}

Rng Rng::fork(std::uint64_t index) const {
    return Rng(mix64(state_ ^ mix64(index ^ 0xA5A5A5A5A5A5A5A5ULL)), 0);
}

std::uint64_t Rng::next_u64() {
    // Counter-based: output i depends only on (state, i).
    return mix64(state_ + counter_++ * 0x9E3779B97F4A7C15ULL);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % n;
}

double Rng::gaussian() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;  // guard log(0)
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::gaussian(double mean, double stddev) {
    return mean + stddev * gaussian();
}

}  // namespace mil

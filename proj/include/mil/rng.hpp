#ifndef MIL_RNG_HPP
#define MIL_RNG_HPP

#include <cstdint>
#include <string_view>

namespace mil {

// Splittable counter-based random stream. A stream is identified by the
// run seed plus the derivation path used to fork it (purpose tag, epoch,
// bag id, ...), so per-(epoch, bag, patch) streams can be created in any
// order and still produce identical draws across runs and platforms.
//
// Draw primitives avoid <random> distributions on purpose: their output
// is implementation-defined, which would break cross-platform
// reproducibility of augmentation and dropout.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Derive an independent child stream. Forking does not advance this
    // stream's own draw counter.
    [[nodiscard]] Rng fork(std::string_view tag) const;
    [[nodiscard]] Rng fork(std::uint64_t index) const;

    std::uint64_t next_u64();

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    // Uniform integer in [0, n), n >= 1. Uses rejection sampling so the
    // result depends only on the stream, not on platform modulo quirks.
    std::uint64_t uniform_int(std::uint64_t n);

    // Standard normal via Box-Muller (two uniforms per call, cosine
    // branch only; deterministic and platform-stable).
    double gaussian();
    double gaussian(double mean, double stddev);

private:
    Rng(std::uint64_t state, int);  // raw-state constructor

    std::uint64_t state_;
    std::uint64_t counter_ = 0;
};

}  // namespace mil

#endif

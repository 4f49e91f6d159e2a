#ifndef MIL_GRADCHECK_HPP
#define MIL_GRADCHECK_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace mil {

// Finite-difference verification of every analytic gradient: the three
// differentiable pooling operators, each layer kind, and the end-to-end
// bag gradient. Evaluation points are random but fully determined by the
// seed; scores stay away from the clamp boundaries.
struct GradCheckOptions {
    std::vector<std::string> components;  // empty = all
    double lse_r = 10.0;
    std::uint64_t seed = 42;
    int points = 100;
    double tolerance = 1e-4;
};

struct GradCheckEntry {
    std::string component;
    double max_rel_error = 0.0;
    int points = 0;
    bool pass = false;
};

// Component names: nor, isr, lse, conv2d, maxpool2x2, affine, relu,
// sigmoid, dropout, bag. Throws ConfigError on an unknown name.
std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& options);

}  // namespace mil

#endif

#ifndef MIL_POOLING_HPP
#define MIL_POOLING_HPP

#include <string>
#include <vector>

namespace mil {

// Permutation-invariant operators mapping instance scores z_1..z_K to
// the bag probability theta.
//
//   Max:     theta = max_k z_k                      (reference, subgradient)
//   NoisyOr: theta = 1 - prod_k (1 - z_k)
//   ISR:     theta = S / (1 + S),  S = sum_k z_k / (1 - z_k)
//   LSE:     theta = (1/r) ln( (1/K) sum_k exp(r z_k) ),  r > 0
//
// NoisyOr is evaluated in log space and LSE with the max-shift trick so
// both stay finite for large K and sharp r. Scores are clamped to
// [epsilon, 1-epsilon] before NoisyOr/ISR; the clamp is part of the
// operator contract and gradients are taken at the clamped scores.
enum class PoolKind { Max, NoisyOr, Isr, Lse };

struct PoolingConfig {
    PoolKind kind = PoolKind::NoisyOr;
    double r = 10.0;          // LSE sharpness, required > 0 for LSE
    double epsilon = 1e-7;    // clamp margin, in (0, 0.01]

    void validate() const;  // throws ConfigError
};

PoolKind pool_kind_from_string(const std::string& name);  // throws ConfigError
std::string pool_kind_name(PoolKind kind);

// theta in [0, 1]. Throws DomainError on an empty score list or scores
// outside [0, 1]; ConfigError on an invalid config.
double pool(const PoolingConfig& config, const std::vector<double>& scores);

// d theta / d z_j * upstream for every j. Max uses subgradient semantics:
// weight 1 at the first maximizing index, 0 elsewhere.
std::vector<double> pool_grad(const PoolingConfig& config,
                              const std::vector<double>& scores,
                              double upstream);

}  // namespace mil

#endif

#ifndef MIL_MODEL_HPP
#define MIL_MODEL_HPP

#include <string>
#include <vector>

#include "mil/data.hpp"
#include "mil/layers.hpp"
#include "mil/pooling.hpp"

namespace mil {

// The shared instance classifier: an ordered layer chain applied to one
// normalized patch, ending in a single sigmoid unit so scores live in
// [0, 1].
struct InstanceClassifierConfig {
    std::vector<LayerSpec> layers;
    int in_channels = 3;
    int in_height = kPatchSide;
    int in_width = kPatchSide;

    std::vector<std::size_t> input_shape() const {
        return {static_cast<std::size_t>(in_channels),
                static_cast<std::size_t>(in_height),
                static_cast<std::size_t>(in_width)};
    }

    // Shape-checks the whole chain and the single-sigmoid-output rule;
    // throws ConfigError naming the offending layer.
    void validate() const;

    // Default architecture for a given square patch size: a small conv
    // stack, one hidden affine layer with dropout 0.5, then the sigmoid
    // score unit. Patches of 64px or more get three conv blocks, smaller
    // ones two.
    static InstanceClassifierConfig default_for_patch(int side);
};

// All learnable tensors of the classifier, aligned with the layer list.
struct ModelParams {
    std::vector<LayerParams> layers;
    std::uint32_t version = 1;

    void require_finite() const;
};

// Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
ModelParams init_params(const InstanceClassifierConfig& config, Rng rng);

std::size_t param_count(const ModelParams& params);

// Bag probability together with the per-patch evidence behind it.
struct BagPrediction {
    double theta = 0.0;
    std::vector<double> instance_scores;        // bag patch order
    std::vector<std::pair<int, int>> patch_coords;  // (grid_row, grid_col)
};

// Converts 8-bit patch pixels to the (C, H, W) network input in [0, 1].
Tensor patch_to_tensor(const Patch& patch);

// Score of one patch; rng only matters in train mode (dropout).
double instance_score(const ModelParams& params,
                      const InstanceClassifierConfig& config,
                      const Tensor& patch, Mode mode, Rng rng);

BagPrediction bag_probability(const ModelParams& params,
                              const InstanceClassifierConfig& config,
                              const PoolingConfig& pooling, const Bag& bag,
                              Mode mode, Rng rng);

// Bernoulli negative log-likelihood, theta clamped to
// [epsilon, 1-epsilon] so the loss stays finite at the extremes.
double nll_loss(double theta, int y, double epsilon = 1e-7);

struct BagGradient {
    double loss = 0.0;
    double theta = 0.0;
    std::vector<LayerParams> grads;  // ModelParams-shaped
};

// Loss and d loss / d psi for one bag: forward every patch through the
// shared network, pool, then push the chain rule back through pooling
// and all K shared passes, accumulating into the shared parameters.
// Per-patch activations are recomputed instead of cached so memory stays
// flat in K. Scores of a given patch are identical across both passes
// because the dropout stream is keyed by patch index.
BagGradient bag_gradient(const ModelParams& params,
                         const InstanceClassifierConfig& config,
                         const PoolingConfig& pooling, const Bag& bag, int y,
                         Rng rng, double epsilon = 1e-7);

std::vector<LayerParams> zero_grads(const ModelParams& params);

}  // namespace mil

#endif

#include "mil/model.hpp"

#include <algorithm>
#include <cmath>

#include "mil/errors.hpp"

namespace mil {

void InstanceClassifierConfig::validate() const {
    if (layers.empty()) throw ConfigError("instance classifier has no layers");
    if (in_channels <= 0 || in_height <= 0 || in_width <= 0) {
        throw ConfigError("instance classifier input shape must be positive");
    }
    std::vector<std::size_t> shape = input_shape();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        shape = layer_output_shape(layers[i], shape, static_cast<int>(i));
    }
    if (shape != std::vector<std::size_t>{1}) {
        throw ConfigError("instance classifier must end in a single unit, got " +
                          shape_to_string(shape));
    }
    if (layers.back().kind != LayerKind::Sigmoid) {
        throw ConfigError("instance classifier must end with sigmoid so scores "
                          "stay in [0, 1]");
    }
}

InstanceClassifierConfig InstanceClassifierConfig::default_for_patch(int side) {
    InstanceClassifierConfig c;
    c.in_channels = 3;
    c.in_height = side;
    c.in_width = side;
    if (side >= 64) {
        c.layers = {
            LayerSpec::conv2d(3, 16, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(),
            LayerSpec::conv2d(16, 32, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
            LayerSpec::conv2d(32, 32, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
            LayerSpec::affine(128), LayerSpec::relu(), LayerSpec::dropout(0.5),
            LayerSpec::affine(1), LayerSpec::sigmoid(),
        };
    } else {
        c.layers = {
            LayerSpec::conv2d(3, 8, 5), LayerSpec::relu(), LayerSpec::maxpool2x2(),
            LayerSpec::conv2d(8, 16, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
            LayerSpec::affine(64), LayerSpec::relu(), LayerSpec::dropout(0.5),
            LayerSpec::affine(1), LayerSpec::sigmoid(),
        };
    }
    c.validate();
    return c;
}

void ModelParams::require_finite() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        layers[i].weight.require_finite("params of layer " + std::to_string(i));
        layers[i].bias.require_finite("params of layer " + std::to_string(i));
    }
}

ModelParams init_params(const InstanceClassifierConfig& config, Rng rng) {
    config.validate();
    ModelParams params;
    std::vector<std::size_t> shape = config.input_shape();
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        LayerParams p = layer_param_shapes(config.layers[i], shape);
        if (p.weight.numel() > 0) {
            // Glorot uniform; fan counts per output unit.
            double fan_in = 0.0, fan_out = 0.0;
            const LayerSpec& spec = config.layers[i];
            if (spec.kind == LayerKind::Conv2d) {
                fan_in = static_cast<double>(spec.in_channels) * spec.kernel * spec.kernel;
                fan_out = static_cast<double>(spec.out_channels) * spec.kernel * spec.kernel;
            } else {
                fan_in = static_cast<double>(p.weight.shape[1]);
                fan_out = static_cast<double>(p.weight.shape[0]);
            }
            const double bound = std::sqrt(6.0 / (fan_in + fan_out));
            Rng stream = rng.fork("init").fork(i);
            for (double& w : p.weight.data) w = stream.uniform(-bound, bound);
        }
        params.layers.push_back(std::move(p));
        shape = layer_output_shape(config.layers[i], shape, static_cast<int>(i));
    }
    return params;
}

std::size_t param_count(const ModelParams& params) {
    std::size_t n = 0;
    for (const auto& p : params.layers) n += p.weight.numel() + p.bias.numel();
    return n;
}

Tensor patch_to_tensor(const Patch& patch) {
    const std::size_t side = static_cast<std::size_t>(patch.side);
    Tensor t({3, side, side});
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const std::uint8_t* px = patch.rgb.data() + (y * side + x) * 3;
            for (std::size_t c = 0; c < 3; ++c) {
                t.at3(c, y, x) = static_cast<double>(px[c]) / 255.0;
            }
        }
    }
    return t;
}

namespace {

void check_model(const ModelParams& params, const InstanceClassifierConfig& config,
                 const Tensor& patch) {
    if (params.layers.size() != config.layers.size()) {
        throw ConfigError("model has " + std::to_string(params.layers.size()) +
                          " parameter blocks for " +
                          std::to_string(config.layers.size()) + " layers");
    }
    if (patch.shape != config.input_shape()) {
        throw ConfigError("patch shape " + shape_to_string(patch.shape) +
                          " does not match configured input " +
                          shape_to_string(config.input_shape()));
    }
}

// Single forward pass; caches are filled only when `caches` is non-null.
double forward_patch(const ModelParams& params,
                     const InstanceClassifierConfig& config, const Tensor& patch,
                     Mode mode, Rng& rng, std::vector<LayerCache>* caches) {
    Tensor act = patch;
    if (caches) caches->assign(config.layers.size(), LayerCache{});
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        act = layer_forward(config.layers[i], params.layers[i], act, mode, rng,
                            caches ? &(*caches)[i] : nullptr);
    }
    return act.data[0];
}

}  // namespace

double instance_score(const ModelParams& params,
                      const InstanceClassifierConfig& config,
                      const Tensor& patch, Mode mode, Rng rng) {
    check_model(params, config, patch);
    return forward_patch(params, config, patch, mode, rng, nullptr);
}

BagPrediction bag_probability(const ModelParams& params,
                              const InstanceClassifierConfig& config,
                              const PoolingConfig& pooling, const Bag& bag,
                              Mode mode, Rng rng) {
    if (bag.patches.empty()) throw DomainError("bag " + bag.id + " is empty");
    BagPrediction pred;
    pred.instance_scores.reserve(bag.patches.size());
    for (std::size_t k = 0; k < bag.patches.size(); ++k) {
        Rng stream = rng.fork("patch").fork(k);
        pred.instance_scores.push_back(instance_score(
            params, config, patch_to_tensor(bag.patches[k]), mode, stream));
        pred.patch_coords.emplace_back(bag.patches[k].grid_row,
                                       bag.patches[k].grid_col);
    }
    pred.theta = pool(pooling, pred.instance_scores);
    return pred;
}

double nll_loss(double theta, int y, double epsilon) {
    if (y != 0 && y != 1) {
        throw DomainError("bag label " + std::to_string(y) + " outside {0, 1}");
    }
    const double t = std::clamp(theta, epsilon, 1.0 - epsilon);
    return y == 1 ? -std::log(t) : -std::log1p(-t);
}

std::vector<LayerParams> zero_grads(const ModelParams& params) {
    std::vector<LayerParams> grads;
    grads.reserve(params.layers.size());
    for (const auto& p : params.layers) {
        LayerParams g;
        if (p.weight.numel() > 0) g.weight = Tensor::zeros(p.weight.shape);
        if (p.bias.numel() > 0) g.bias = Tensor::zeros(p.bias.shape);
        grads.push_back(std::move(g));
    }
    return grads;
}

BagGradient bag_gradient(const ModelParams& params,
                         const InstanceClassifierConfig& config,
                         const PoolingConfig& pooling, const Bag& bag, int y,
                         Rng rng, double epsilon) {
    if (bag.patches.empty()) throw DomainError("bag " + bag.id + " is empty");
    const std::size_t K = bag.patches.size();

    // Pass 1: instance scores only (no caches, flat memory).
    std::vector<Tensor> inputs;
    inputs.reserve(K);
    std::vector<double> scores(K);
    for (std::size_t k = 0; k < K; ++k) {
        inputs.push_back(patch_to_tensor(bag.patches[k]));
        Rng stream = rng.fork("patch").fork(k);
        check_model(params, config, inputs[k]);
        scores[k] = forward_patch(params, config, inputs[k], Mode::Train, stream,
                                  nullptr);
    }

    BagGradient out;
    out.theta = pool(pooling, scores);
    out.loss = nll_loss(out.theta, y, epsilon);

    // d loss / d theta at the clamped theta (clamp adjusts the value
    // only, so gradients stay useful near saturation).
    const double t = std::clamp(out.theta, epsilon, 1.0 - epsilon);
    const double dloss_dtheta = y == 1 ? -1.0 / t : 1.0 / (1.0 - t);
    const std::vector<double> dtheta_dz = pool_grad(pooling, scores, dloss_dtheta);

    // Pass 2: re-forward each patch with caches (same dropout stream,
    // hence identical activations) and backpropagate its share.
    out.grads = zero_grads(params);
    std::vector<LayerCache> caches;
    for (std::size_t k = 0; k < K; ++k) {
        Rng stream = rng.fork("patch").fork(k);
        forward_patch(params, config, inputs[k], Mode::Train, stream, &caches);
        Tensor upstream({1});
        upstream.data[0] = dtheta_dz[k];
        for (std::size_t i = config.layers.size(); i-- > 0;) {
            upstream = layer_backward(config.layers[i], params.layers[i], caches[i],
                                      upstream, out.grads[i]);
        }
    }
    return out;
}

}  // namespace mil

#include "mil/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mil/errors.hpp"
#include "mil/model.hpp"

namespace mil {

namespace {

constexpr double kPoolH = 1e-6;
constexpr double kLayerH = 1e-5;

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng, double lo,
                     double hi) {
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

double check_pooling(PoolKind kind, double r, Rng rng, int points) {
    PoolingConfig config;
    config.kind = kind;
    config.r = r;
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        Rng point_rng = rng.fork(static_cast<std::uint64_t>(p));
        const std::size_t k = 1 + point_rng.uniform_int(16);
        std::vector<double> z(k);
        // away from the clamp boundaries, where the operators are smooth
        for (double& v : z) v = point_rng.uniform(0.05, 0.95);

        const std::vector<double> analytic = pool_grad(config, z, 1.0);
        const Tensor at({k}, std::vector<double>(z));
        const Tensor numeric = finite_difference_gradient(
            [&](const Tensor& t) { return pool(config, t.data); }, at, kPoolH);
        worst = std::max(worst, max_relative_error(
                                    Tensor({k}, std::vector<double>(analytic)),
                                    numeric));
    }
    return worst;
}

struct LayerSetup {
    LayerSpec spec;
    std::vector<std::size_t> in_shape;
};

LayerSetup random_layer_setup(const std::string& kind, Rng& rng) {
    LayerSetup s;
    if (kind == "conv2d") {
        const int in_c = 1 + static_cast<int>(rng.uniform_int(3));
        const int out_c = 1 + static_cast<int>(rng.uniform_int(3));
        const int k = 1 + static_cast<int>(rng.uniform_int(3));
        const int h = k + static_cast<int>(rng.uniform_int(5));
        const int w = k + static_cast<int>(rng.uniform_int(5));
        s.spec = LayerSpec::conv2d(in_c, out_c, k);
        s.in_shape = {static_cast<std::size_t>(in_c), static_cast<std::size_t>(h),
                      static_cast<std::size_t>(w)};
    } else if (kind == "maxpool2x2") {
        const std::size_t c = 1 + rng.uniform_int(4);
        const std::size_t h = 2 + rng.uniform_int(7);
        const std::size_t w = 2 + rng.uniform_int(7);
        s.spec = LayerSpec::maxpool2x2();
        s.in_shape = {c, h, w};
    } else if (kind == "affine") {
        const int out = 1 + static_cast<int>(rng.uniform_int(8));
        const std::size_t n = 1 + rng.uniform_int(24);
        s.spec = LayerSpec::affine(out);
        s.in_shape = {n};
    } else if (kind == "dropout") {
        s.spec = LayerSpec::dropout(0.2 + 0.5 * rng.uniform());
        s.in_shape = {1 + rng.uniform_int(4), 2 + rng.uniform_int(6),
                      2 + rng.uniform_int(6)};
    } else if (kind == "relu") {
        s.spec = LayerSpec::relu();
        s.in_shape = {1 + rng.uniform_int(4), 2 + rng.uniform_int(6),
                      2 + rng.uniform_int(6)};
    } else if (kind == "sigmoid") {
        s.spec = LayerSpec::sigmoid();
        s.in_shape = {1 + rng.uniform_int(4), 2 + rng.uniform_int(6),
                      2 + rng.uniform_int(6)};
    } else {
        throw ConfigError("unknown gradcheck component '" + kind + "'");
    }
    return s;
}

double check_layer(const std::string& kind, Rng rng, int points) {
    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        Rng point_rng = rng.fork(static_cast<std::uint64_t>(p));
        const LayerSetup setup = random_layer_setup(kind, point_rng);

        Tensor input = random_tensor(setup.in_shape, point_rng, -1.0, 1.0);
        if (kind == "relu") {
            // keep inputs away from the kink at 0
            for (double& v : input.data) {
                if (std::abs(v) < 1e-3) v = v < 0.0 ? v - 1e-3 : v + 1e-3;
            }
        }
        if (kind == "maxpool2x2") {
            // well-separated values avoid argmax flips under +-h
            for (std::size_t i = 0; i < input.numel(); ++i) {
                input.data[i] += static_cast<double>(i % 97) * 1e-3;
            }
        }

        LayerParams params = layer_param_shapes(setup.spec, setup.in_shape);
        for (double& v : params.weight.data) v = point_rng.uniform(-1.0, 1.0);
        for (double& v : params.bias.data) v = point_rng.uniform(-0.5, 0.5);

        const auto out_shape = layer_output_shape(setup.spec, setup.in_shape, 0);
        Tensor upstream = random_tensor(out_shape, point_rng, -1.0, 1.0);
        const std::uint64_t mask_key = point_rng.next_u64();

        // scalar objective: sum(upstream * forward(...))
        auto objective = [&](const Tensor& in, const LayerParams& pr) {
            Rng stream(mask_key);  // same dropout mask for every probe
            LayerCache cache;
            const Tensor out =
                layer_forward(setup.spec, pr, in, Mode::Train, stream, &cache);
            double acc = 0.0;
            for (std::size_t i = 0; i < out.numel(); ++i) {
                acc += upstream.data[i] * out.data[i];
            }
            return acc;
        };

        Rng stream(mask_key);
        LayerCache cache;
        layer_forward(setup.spec, params, input, Mode::Train, stream, &cache);
        LayerParams param_grad = layer_param_shapes(setup.spec, setup.in_shape);
        const Tensor input_grad =
            layer_backward(setup.spec, params, cache, upstream, param_grad);

        const Tensor numeric_in = finite_difference_gradient(
            [&](const Tensor& t) { return objective(t, params); }, input, kLayerH);
        worst = std::max(worst, max_relative_error(input_grad, numeric_in));

        if (params.weight.numel() > 0) {
            LayerParams probe = params;
            const Tensor numeric_w = finite_difference_gradient(
                [&](const Tensor& t) {
                    probe.weight = t;
                    return objective(input, probe);
                },
                params.weight, kLayerH);
            worst = std::max(worst, max_relative_error(param_grad.weight, numeric_w));
            probe = params;
            const Tensor numeric_b = finite_difference_gradient(
                [&](const Tensor& t) {
                    probe.bias = t;
                    return objective(input, probe);
                },
                params.bias, kLayerH);
            worst = std::max(worst, max_relative_error(param_grad.bias, numeric_b));
        }
    }
    return worst;
}

// Central differences are invalid within +-h of a relu kink or a
// maxpool tie: the probe flips the branch and measures the wrong
// one-sided slope. Points whose internal activations come closer than
// `margin` to such a non-smooth spot are resampled, mirroring how the
// pooling checks stay away from the clamp boundaries.
bool bag_point_is_smooth(const ModelParams& params,
                         const InstanceClassifierConfig& config, const Bag& bag,
                         const Rng& stream, double margin) {
    for (std::size_t k = 0; k < bag.patches.size(); ++k) {
        Rng patch_stream = stream.fork("patch").fork(k);
        Tensor act = patch_to_tensor(bag.patches[k]);
        for (std::size_t i = 0; i < config.layers.size(); ++i) {
            const LayerSpec& spec = config.layers[i];
            if (spec.kind == LayerKind::Relu) {
                for (double v : act.data) {
                    if (std::abs(v) < margin) return false;
                }
            }
            if (spec.kind == LayerKind::MaxPool2x2) {
                const std::size_t c = act.shape[0], h = act.shape[1], w = act.shape[2];
                for (std::size_t ch = 0; ch < c; ++ch) {
                    for (std::size_t y = 0; y + 1 < h; y += 2) {
                        for (std::size_t x = 0; x + 1 < w; x += 2) {
                            double best = -1e300, second = -1e300;
                            for (int dy = 0; dy < 2; ++dy) {
                                for (int dx = 0; dx < 2; ++dx) {
                                    const double v =
                                        act.at3(ch, y + dy, x + dx);
                                    if (v > best) {
                                        second = best;
                                        best = v;
                                    } else if (v > second) {
                                        second = v;
                                    }
                                }
                            }
                            if (best - second < margin) return false;
                        }
                    }
                }
            }
            LayerCache cache;
            act = layer_forward(spec, params.layers[i], act, Mode::Train,
                                patch_stream, &cache);
        }
    }
    return true;
}

double check_bag(double lse_r, Rng rng, int points) {
    // tiny classifier: conv, relu, maxpool, affine, relu, dropout,
    // affine, sigmoid on 3x6x6 patches (~500 parameters)
    InstanceClassifierConfig config;
    config.in_channels = 3;
    config.in_height = 6;
    config.in_width = 6;
    config.layers = {
        LayerSpec::conv2d(3, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
        LayerSpec::affine(4),       LayerSpec::relu(), LayerSpec::dropout(0.3),
        LayerSpec::affine(1),       LayerSpec::sigmoid(),
    };
    config.validate();

    const std::array<PoolKind, 3> kinds = {PoolKind::NoisyOr, PoolKind::Isr,
                                           PoolKind::Lse};
    const std::array<std::size_t, 3> bag_sizes = {1, 3, 7};
    constexpr double kKinkMargin = 5e-4;

    double worst = 0.0;
    for (int p = 0; p < points; ++p) {
        PoolingConfig pooling;
        pooling.kind = kinds[p % kinds.size()];
        pooling.r = lse_r;

        Bag bag;
        ModelParams params;
        Rng bag_rng(0);
        bool smooth = false;
        for (std::uint64_t attempt = 0; attempt < 64 && !smooth; ++attempt) {
            Rng point_rng =
                rng.fork(static_cast<std::uint64_t>(p) * 64 + attempt);
            const std::size_t K = bag_sizes[point_rng.uniform_int(bag_sizes.size())];
            bag = Bag{};
            bag.id = "gradcheck";
            bag.label = static_cast<int>(point_rng.uniform_int(2));
            for (std::size_t k = 0; k < K; ++k) {
                Patch patch;
                patch.side = 6;
                patch.rgb.resize(6 * 6 * 3);
                for (auto& b : patch.rgb) {
                    b = static_cast<std::uint8_t>(point_rng.uniform_int(256));
                }
                bag.patches.push_back(std::move(patch));
            }
            params = init_params(config, point_rng.fork("init"));
            bag_rng = point_rng.fork("stream");
            smooth = bag_point_is_smooth(params, config, bag, bag_rng, kKinkMargin);
        }
        if (!smooth) {
            throw InternalError("gradcheck: could not sample a smooth bag point");
        }
        const BagGradient analytic = bag_gradient(params, config, pooling, bag,
                                                  bag.label, bag_rng);

        // loss-only probe for the oracle (forward passes, no backward)
        auto bag_loss = [&]() {
            std::vector<double> scores;
            scores.reserve(bag.patches.size());
            for (std::size_t k = 0; k < bag.patches.size(); ++k) {
                Rng stream = bag_rng.fork("patch").fork(k);
                scores.push_back(instance_score(params, config,
                                                patch_to_tensor(bag.patches[k]),
                                                Mode::Train, stream));
            }
            return nll_loss(pool(pooling, scores), bag.label);
        };

        for (std::size_t li = 0; li < params.layers.size(); ++li) {
            for (int which = 0; which < 2; ++which) {
                Tensor& target = which == 0 ? params.layers[li].weight
                                            : params.layers[li].bias;
                if (target.numel() == 0) continue;
                const Tensor& agrad = which == 0 ? analytic.grads[li].weight
                                                 : analytic.grads[li].bias;
                const Tensor saved = target;
                const Tensor numeric = finite_difference_gradient(
                    [&](const Tensor& t) {
                        target = t;
                        return bag_loss();
                    },
                    saved, kLayerH);
                target = saved;
                worst = std::max(worst, max_relative_error(agrad, numeric));
            }
        }
    }
    return worst;
}

}  // namespace

std::vector<GradCheckEntry> run_gradcheck(const GradCheckOptions& options) {
    static const std::vector<std::string> kAll = {
        "nor",  "isr",  "lse",     "conv2d", "maxpool2x2",
        "affine", "relu", "sigmoid", "dropout", "bag"};
    std::vector<std::string> todo =
        options.components.empty() ? kAll : options.components;
    for (const auto& name : todo) {
        if (std::find(kAll.begin(), kAll.end(), name) == kAll.end()) {
            throw ConfigError("unknown gradcheck component '" + name + "'");
        }
    }

    const Rng root(options.seed);
    std::vector<GradCheckEntry> results;
    for (const auto& name : todo) {
        GradCheckEntry entry;
        entry.component = name;
        entry.points = options.points;
        const Rng rng = root.fork(name);
        if (name == "nor") {
            entry.max_rel_error = check_pooling(PoolKind::NoisyOr, options.lse_r,
                                                rng, options.points);
        } else if (name == "isr") {
            entry.max_rel_error =
                check_pooling(PoolKind::Isr, options.lse_r, rng, options.points);
        } else if (name == "lse") {
            entry.max_rel_error =
                check_pooling(PoolKind::Lse, options.lse_r, rng, options.points);
        } else if (name == "bag") {
            entry.max_rel_error = check_bag(options.lse_r, rng, entry.points);
        } else {
            entry.max_rel_error = check_layer(name, rng, options.points);
        }
        entry.pass = entry.max_rel_error <= options.tolerance;
        results.push_back(std::move(entry));
    }
    return results;
}

}  // namespace mil

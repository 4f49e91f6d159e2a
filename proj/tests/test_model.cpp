#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "mil/errors.hpp"
#include "mil/model.hpp"

using namespace mil;

TEST_SUITE_BEGIN("model");

namespace {

InstanceClassifierConfig tiny_config(int side = 6, double dropout = 0.0) {
    InstanceClassifierConfig c;
    c.in_channels = 3;
    c.in_height = side;
    c.in_width = side;
    c.layers = {
        LayerSpec::conv2d(3, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
        LayerSpec::affine(4),       LayerSpec::relu(),
    };
    if (dropout > 0.0) c.layers.push_back(LayerSpec::dropout(dropout));
    c.layers.push_back(LayerSpec::affine(1));
    c.layers.push_back(LayerSpec::sigmoid());
    c.validate();
    return c;
}

ModelParams zero_params(const InstanceClassifierConfig& config) {
    ModelParams p = init_params(config, Rng(0));
    for (auto& layer : p.layers) {
        layer.weight.fill(0.0);
        layer.bias.fill(0.0);
    }
    return p;
}

Patch random_patch(int side, Rng& rng) {
    Patch p;
    p.side = side;
    p.rgb.resize(static_cast<std::size_t>(side) * side * 3);
    for (auto& b : p.rgb) b = static_cast<std::uint8_t>(rng.uniform_int(256));
    return p;
}

Bag random_bag(int side, std::size_t k, Rng& rng, int label = 1) {
    Bag bag;
    bag.id = "test";
    bag.label = label;
    for (std::size_t i = 0; i < k; ++i) bag.patches.push_back(random_patch(side, rng));
    return bag;
}

// Independent naive forward pass (plain loops, no shared code with the
// layer implementations) used as the oracle for instance_score.
double naive_forward(const InstanceClassifierConfig& config,
                     const ModelParams& params, const Tensor& input) {
    std::vector<double> act(input.data);
    std::vector<std::size_t> shape = input.shape;
    for (std::size_t li = 0; li < config.layers.size(); ++li) {
        const LayerSpec& spec = config.layers[li];
        const LayerParams& p = params.layers[li];
        if (spec.kind == LayerKind::Conv2d) {
            const std::size_t in_c = shape[0], in_h = shape[1], in_w = shape[2];
            const std::size_t k = static_cast<std::size_t>(spec.kernel);
            const std::size_t out_c = static_cast<std::size_t>(spec.out_channels);
            const std::size_t out_h = in_h - k + 1, out_w = in_w - k + 1;
            std::vector<double> next(out_c * out_h * out_w, 0.0);
            for (std::size_t oc = 0; oc < out_c; ++oc) {
                for (std::size_t y = 0; y < out_h; ++y) {
                    for (std::size_t x = 0; x < out_w; ++x) {
                        double acc = p.bias.data[oc];
                        for (std::size_t ic = 0; ic < in_c; ++ic) {
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    acc += p.weight.data[((oc * in_c + ic) * k + ky) * k + kx] *
                                           act[(ic * in_h + y + ky) * in_w + x + kx];
                                }
                            }
                        }
                        next[(oc * out_h + y) * out_w + x] = acc;
                    }
                }
            }
            act = std::move(next);
            shape = {out_c, out_h, out_w};
        } else if (spec.kind == LayerKind::MaxPool2x2) {
            const std::size_t c = shape[0], in_h = shape[1], in_w = shape[2];
            const std::size_t out_h = in_h / 2, out_w = in_w / 2;
            std::vector<double> next(c * out_h * out_w);
            for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t y = 0; y < out_h; ++y) {
                    for (std::size_t x = 0; x < out_w; ++x) {
                        double m = act[(ch * in_h + 2 * y) * in_w + 2 * x];
                        m = std::max(m, act[(ch * in_h + 2 * y) * in_w + 2 * x + 1]);
                        m = std::max(m, act[(ch * in_h + 2 * y + 1) * in_w + 2 * x]);
                        m = std::max(m, act[(ch * in_h + 2 * y + 1) * in_w + 2 * x + 1]);
                        next[(ch * out_h + y) * out_w + x] = m;
                    }
                }
            }
            act = std::move(next);
            shape = {c, out_h, out_w};
        } else if (spec.kind == LayerKind::Affine) {
            const std::size_t n_out = static_cast<std::size_t>(spec.out_units);
            std::vector<double> next(n_out);
            for (std::size_t o = 0; o < n_out; ++o) {
                double acc = p.bias.data[o];
                for (std::size_t i = 0; i < act.size(); ++i) {
                    acc += p.weight.data[o * act.size() + i] * act[i];
                }
                next[o] = acc;
            }
            act = std::move(next);
            shape = {n_out};
        } else if (spec.kind == LayerKind::Relu) {
            for (double& v : act) v = std::max(0.0, v);
        } else if (spec.kind == LayerKind::Sigmoid) {
            for (double& v : act) v = 1.0 / (1.0 + std::exp(-v));
        } else if (spec.kind == LayerKind::Dropout) {
            // eval mode: identity
        }
    }
    return act[0];
}

}  // namespace

TEST_CASE("all-zero parameters score 0.5 for any patch") {
    const auto config = tiny_config();
    const ModelParams params = zero_params(config);
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        const Patch p = random_patch(6, rng);
        CHECK(instance_score(params, config, patch_to_tensor(p), Mode::Eval,
                             Rng(0)) == doctest::Approx(0.5).epsilon(1e-15));
    }
}

TEST_CASE("eval mode is deterministic") {
    const auto config = tiny_config(6, 0.5);
    const ModelParams params = init_params(config, Rng(11));
    Rng rng(2);
    const Tensor x = patch_to_tensor(random_patch(6, rng));
    const double a = instance_score(params, config, x, Mode::Eval, Rng(1));
    const double b = instance_score(params, config, x, Mode::Eval, Rng(999));
    CHECK(a == b);
}

TEST_CASE("instance_score matches the naive reimplementation") {
    // 4x4 patches exercise every layer kind on the smallest grid
    InstanceClassifierConfig config;
    config.in_channels = 3;
    config.in_height = 4;
    config.in_width = 4;
    config.layers = {
        LayerSpec::conv2d(3, 2, 3), LayerSpec::relu(), LayerSpec::maxpool2x2(),
        LayerSpec::affine(4),       LayerSpec::relu(), LayerSpec::affine(1),
        LayerSpec::sigmoid(),
    };
    config.validate();
    const Rng root(21);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng = root.fork(trial);
        const ModelParams params = init_params(config, rng.fork("init"));
        const Tensor x = patch_to_tensor(random_patch(4, rng));
        const double fast = instance_score(params, config, x, Mode::Eval, Rng(0));
        const double slow = naive_forward(config, params, x);
        CHECK(fast == doctest::Approx(slow).epsilon(1e-12));
    }
}

TEST_CASE("shape mismatch raises a configuration error") {
    const auto config = tiny_config(6);
    const ModelParams params = zero_params(config);
    Rng rng(3);
    const Tensor wrong = patch_to_tensor(random_patch(8, rng));
    CHECK_THROWS_AS(instance_score(params, config, wrong, Mode::Eval, Rng(0)),
                    ConfigError);
}

TEST_CASE("zero-parameter bag probabilities compose the trivial cases") {
    const auto config = tiny_config();
    const ModelParams params = zero_params(config);
    Rng rng(4);
    const Bag bag = random_bag(6, 2, rng);

    PoolingConfig nor;
    nor.kind = PoolKind::NoisyOr;
    const BagPrediction p1 =
        bag_probability(params, config, nor, bag, Mode::Eval, Rng(0));
    CHECK(p1.theta == doctest::Approx(0.75).epsilon(1e-12));

    PoolingConfig mx;
    mx.kind = PoolKind::Max;
    const BagPrediction p2 =
        bag_probability(params, config, mx, bag, Mode::Eval, Rng(0));
    CHECK(p2.theta == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("bag probability is invariant to patch order") {
    const auto config = tiny_config();
    const Rng root(5);
    for (const auto kind :
         {PoolKind::Max, PoolKind::NoisyOr, PoolKind::Isr, PoolKind::Lse}) {
        Rng rng = root.fork(pool_kind_name(kind));
        const ModelParams params = init_params(config, rng.fork("init"));
        Bag bag = random_bag(6, 5, rng);
        PoolingConfig pooling;
        pooling.kind = kind;
        const double base =
            bag_probability(params, config, pooling, bag, Mode::Eval, Rng(0)).theta;
        std::reverse(bag.patches.begin(), bag.patches.end());
        const double reordered =
            bag_probability(params, config, pooling, bag, Mode::Eval, Rng(0)).theta;
        CHECK(std::abs(base - reordered) <= 1e-9);
    }
}

TEST_CASE("prediction theta is recomputable from its own scores") {
    const auto config = tiny_config();
    Rng rng(6);
    const ModelParams params = init_params(config, rng.fork("init"));
    const Bag bag = random_bag(6, 7, rng);
    PoolingConfig pooling;
    pooling.kind = PoolKind::Isr;
    const BagPrediction pred =
        bag_probability(params, config, pooling, bag, Mode::Eval, Rng(0));
    CHECK(std::abs(pred.theta - pool(pooling, pred.instance_scores)) <= 1e-12);
    CHECK(pred.instance_scores.size() == bag.patches.size());
}

TEST_CASE("empty bag is a domain error") {
    const auto config = tiny_config();
    const ModelParams params = zero_params(config);
    Bag bag;
    bag.id = "empty";
    PoolingConfig pooling;
    CHECK_THROWS_AS(bag_probability(params, config, pooling, bag, Mode::Eval, Rng(0)),
                    DomainError);
    CHECK_THROWS_AS(bag_gradient(params, config, pooling, bag, 1, Rng(0)),
                    DomainError);
}

TEST_CASE("identical patches get identical scores") {
    const auto config = tiny_config();
    Rng rng(7);
    const ModelParams params = init_params(config, rng.fork("init"));
    const Patch p = random_patch(6, rng);
    Bag bag;
    bag.id = "same";
    bag.label = 1;
    for (int i = 0; i < 4; ++i) bag.patches.push_back(p);
    PoolingConfig pooling;
    pooling.kind = PoolKind::NoisyOr;
    const BagPrediction pred =
        bag_probability(params, config, pooling, bag, Mode::Eval, Rng(0));
    for (double z : pred.instance_scores) {
        CHECK(z == pred.instance_scores.front());
    }
}

TEST_CASE("nll examples") {
    CHECK(nll_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(nll_loss(0.75, 0) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
    const double near_one = nll_loss(1.0 - 1e-7, 1);
    CHECK(near_one == doctest::Approx(1e-7).epsilon(1e-3));
    CHECK(std::isfinite(nll_loss(1.0, 1)));
    CHECK(std::isfinite(nll_loss(0.0, 1)));
    CHECK_THROWS_AS(nll_loss(0.5, 2), DomainError);
}

TEST_CASE("loss positivity away from the matching extreme") {
    CHECK(nll_loss(0.3, 1) > 0.0);
    CHECK(nll_loss(0.3, 0) > 0.0);
    CHECK(nll_loss(1.0, 1) > 0.0);  // clamped: tiny but positive
}

TEST_CASE("bag gradient matches finite differences end to end") {
    const auto config = tiny_config(6, 0.3);
    const Rng root(31);
    for (const auto kind : {PoolKind::NoisyOr, PoolKind::Isr, PoolKind::Lse}) {
        for (const std::size_t K : {1, 3, 7}) {
            Rng rng = root.fork(pool_kind_name(kind)).fork(K);
            ModelParams params = init_params(config, rng.fork("init"));
            const Bag bag = random_bag(6, K, rng, static_cast<int>(rng.uniform_int(2)));
            PoolingConfig pooling;
            pooling.kind = kind;
            const Rng stream = rng.fork("stream");

            const BagGradient analytic =
                bag_gradient(params, config, pooling, bag, bag.label, stream);

            auto loss_only = [&]() {
                std::vector<double> scores;
                for (std::size_t k = 0; k < bag.patches.size(); ++k) {
                    Rng s = stream.fork("patch").fork(k);
                    scores.push_back(instance_score(
                        params, config, patch_to_tensor(bag.patches[k]),
                        Mode::Train, s));
                }
                return nll_loss(pool(pooling, scores), bag.label);
            };
            CHECK(analytic.loss == doctest::Approx(loss_only()).epsilon(1e-12));

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
                            return loss_only();
                        },
                        saved, 1e-5);
                    target = saved;
                    CHECK(max_relative_error(agrad, numeric) <= 1e-4);
                }
            }
        }
    }
}

TEST_CASE("saturated NOR bag keeps gradients finite") {
    // affine + sigmoid with a huge bias pins every score at ~1
    InstanceClassifierConfig config;
    config.in_channels = 3;
    config.in_height = 2;
    config.in_width = 2;
    config.layers = {LayerSpec::affine(1), LayerSpec::sigmoid()};
    config.validate();
    ModelParams params = zero_params(config);
    params.layers[0].bias.data[0] = 50.0;

    Rng rng(8);
    const Bag bag = random_bag(2, 3, rng, 1);
    PoolingConfig pooling;
    pooling.kind = PoolKind::NoisyOr;
    const BagGradient g = bag_gradient(params, config, pooling, bag, 1, Rng(0));
    CHECK(std::isfinite(g.loss));
    for (const auto& layer : g.grads) {
        for (double v : layer.weight.data) REQUIRE(std::isfinite(v));
        for (double v : layer.bias.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("duplicating the single patch leaves the Max-pooled loss unchanged") {
    const auto config = tiny_config();
    Rng rng(9);
    const ModelParams params = init_params(config, rng.fork("init"));
    Bag one = random_bag(6, 1, rng, 1);
    Bag two = one;
    two.patches.push_back(two.patches.front());
    PoolingConfig pooling;
    pooling.kind = PoolKind::Max;
    const BagGradient g1 = bag_gradient(params, config, pooling, one, 1, Rng(0));
    const BagGradient g2 = bag_gradient(params, config, pooling, two, 1, Rng(0));
    CHECK(g1.loss == doctest::Approx(g2.loss).epsilon(1e-12));
}

TEST_CASE("default architectures shape-check for both patch scales") {
    const auto big = InstanceClassifierConfig::default_for_patch(96);
    CHECK(big.layers.size() == 14);
    const auto small = InstanceClassifierConfig::default_for_patch(32);
    CHECK(small.layers.size() == 11);
    const ModelParams params = init_params(small, Rng(1));
    CHECK(param_count(params) > 0);
}

TEST_SUITE_END();

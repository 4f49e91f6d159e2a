#include "mil/layers.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mil/errors.hpp"

namespace mil {

namespace {

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[noreturn]] void shape_error(const LayerSpec& spec, int layer_index,
                              const std::string& detail) {
    throw ConfigError("layer " + std::to_string(layer_index) + " (" +
                      layer_kind_name(spec.kind) + "): " + detail);
}

// Unrolls conv windows into a (in_c*k*k) x (out_h*out_w) matrix so the
// convolution becomes a single matrix product.
Eigen::MatrixXd im2col(const Tensor& input, int k, int out_h, int out_w) {
    const int in_c = static_cast<int>(input.shape[0]);
    const int in_w = static_cast<int>(input.shape[2]);
    Eigen::MatrixXd cols(static_cast<Eigen::Index>(in_c) * k * k,
                         static_cast<Eigen::Index>(out_h) * out_w);
    for (int c = 0; c < in_c; ++c) {
        const double* plane = input.data.data() +
                              static_cast<std::size_t>(c) * input.shape[1] * in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                for (int y = 0; y < out_h; ++y) {
                    const double* src = plane + (y + ky) * in_w + kx;
                    for (int x = 0; x < out_w; ++x) {
                        cols(row, static_cast<Eigen::Index>(y) * out_w + x) = src[x];
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_add(const Eigen::MatrixXd& cols, Tensor& input_grad, int k,
                int out_h, int out_w) {
    const int in_c = static_cast<int>(input_grad.shape[0]);
    const int in_w = static_cast<int>(input_grad.shape[2]);
    for (int c = 0; c < in_c; ++c) {
        double* plane = input_grad.data.data() +
                        static_cast<std::size_t>(c) * input_grad.shape[1] * in_w;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * k + ky) * k + kx;
                for (int y = 0; y < out_h; ++y) {
                    double* dst = plane + (y + ky) * in_w + kx;
                    for (int x = 0; x < out_w; ++x) {
                        dst[x] += cols(row, static_cast<Eigen::Index>(y) * out_w + x);
                    }
                }
            }
        }
    }
}

double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::string layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2x2: return "maxpool2x2";
        case LayerKind::Affine: return "affine";
        case LayerKind::Relu: return "relu";
        case LayerKind::Sigmoid: return "sigmoid";
        case LayerKind::Dropout: return "dropout";
    }
    return "?";
}

LayerSpec LayerSpec::conv2d(int in_c, int out_c, int k) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.in_channels = in_c;
    s.out_channels = out_c;
    s.kernel = k;
    return s;
}

LayerSpec LayerSpec::maxpool2x2() {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2x2;
    return s;
}

LayerSpec LayerSpec::affine(int out_units) {
    LayerSpec s;
    s.kind = LayerKind::Affine;
    s.out_units = out_units;
    return s;
}

LayerSpec LayerSpec::relu() {
    LayerSpec s;
    s.kind = LayerKind::Relu;
    return s;
}

LayerSpec LayerSpec::sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::Sigmoid;
    return s;
}

LayerSpec LayerSpec::dropout(double rate) {
    LayerSpec s;
    s.kind = LayerKind::Dropout;
    s.rate = rate;
    return s;
}

std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& input_shape,
                                            int layer_index) {
    switch (spec.kind) {
        case LayerKind::Conv2d: {
            if (input_shape.size() != 3) {
                shape_error(spec, layer_index,
                            "expected (channels, height, width) input, got " +
                                shape_to_string(input_shape));
            }
            if (spec.in_channels <= 0 || spec.out_channels <= 0 || spec.kernel <= 0) {
                shape_error(spec, layer_index, "channel counts and kernel must be positive");
            }
            if (input_shape[0] != static_cast<std::size_t>(spec.in_channels)) {
                shape_error(spec, layer_index,
                            "expected " + std::to_string(spec.in_channels) +
                                " input channels, got " + std::to_string(input_shape[0]));
            }
            // stride 1, no padding: out = in - k + 1
            const std::size_t k = static_cast<std::size_t>(spec.kernel);
            if (input_shape[1] < k || input_shape[2] < k) {
                shape_error(spec, layer_index,
                            "kernel " + std::to_string(spec.kernel) +
                                " larger than input " + shape_to_string(input_shape));
            }
            return {static_cast<std::size_t>(spec.out_channels),
                    input_shape[1] - k + 1, input_shape[2] - k + 1};
        }
        case LayerKind::MaxPool2x2: {
            if (input_shape.size() != 3) {
                shape_error(spec, layer_index,
                            "expected (channels, height, width) input, got " +
                                shape_to_string(input_shape));
            }
            if (input_shape[1] < 2 || input_shape[2] < 2) {
                shape_error(spec, layer_index,
                            "input " + shape_to_string(input_shape) + " too small to pool");
            }
            return {input_shape[0], input_shape[1] / 2, input_shape[2] / 2};
        }
        case LayerKind::Affine: {
            if (spec.out_units <= 0) {
                shape_error(spec, layer_index, "out_units must be positive");
            }
            if (shape_numel(input_shape) == 0) {
                shape_error(spec, layer_index, "empty input");
            }
            return {static_cast<std::size_t>(spec.out_units)};
        }
        case LayerKind::Relu:
        case LayerKind::Sigmoid:
            return input_shape;
        case LayerKind::Dropout: {
            if (spec.rate < 0.0 || spec.rate >= 1.0) {
                shape_error(spec, layer_index, "dropout rate must be in [0, 1)");
            }
            return input_shape;
        }
    }
    throw InternalError("unknown layer kind");
}

LayerParams layer_param_shapes(const LayerSpec& spec,
                               const std::vector<std::size_t>& input_shape) {
    LayerParams p;
    switch (spec.kind) {
        case LayerKind::Conv2d:
            p.weight = Tensor::zeros({static_cast<std::size_t>(spec.out_channels),
                                      static_cast<std::size_t>(spec.in_channels),
                                      static_cast<std::size_t>(spec.kernel),
                                      static_cast<std::size_t>(spec.kernel)});
            p.bias = Tensor::zeros({static_cast<std::size_t>(spec.out_channels)});
            break;
        case LayerKind::Affine:
            p.weight = Tensor::zeros({static_cast<std::size_t>(spec.out_units),
                                      shape_numel(input_shape)});
            p.bias = Tensor::zeros({static_cast<std::size_t>(spec.out_units)});
            break;
        default:
            break;
    }
    return p;
}

Tensor layer_forward(const LayerSpec& spec, const LayerParams& params,
                     const Tensor& input, Mode mode, Rng& rng,
                     LayerCache* cache) {
    const auto out_shape = layer_output_shape(spec, input.shape, -1);
    Tensor output(out_shape);
    if (cache) {
        *cache = LayerCache{};
        cache->kind = spec.kind;
        cache->input_shape = input.shape;
        cache->output_shape = out_shape;
    }

    switch (spec.kind) {
        case LayerKind::Conv2d: {
            const int out_c = spec.out_channels;
            const int k = spec.kernel;
            const int out_h = static_cast<int>(out_shape[1]);
            const int out_w = static_cast<int>(out_shape[2]);
            const Eigen::MatrixXd cols = im2col(input, k, out_h, out_w);
            Eigen::Map<const MatrixRM> w(params.weight.data.data(), out_c,
                                         cols.rows());
            Eigen::Map<MatrixRM> out(output.data.data(), out_c,
                                     static_cast<Eigen::Index>(out_h) * out_w);
            out.noalias() = w * cols;
            for (int c = 0; c < out_c; ++c) {
                out.row(c).array() += params.bias[static_cast<std::size_t>(c)];
            }
            if (cache) cache->input = input;
            break;
        }
        case LayerKind::MaxPool2x2: {
            const std::size_t channels = input.shape[0];
            const std::size_t in_h = input.shape[1];
            const std::size_t in_w = input.shape[2];
            const std::size_t out_h = out_shape[1];
            const std::size_t out_w = out_shape[2];
            if (cache) cache->argmax.resize(output.numel());
            std::size_t oi = 0;
            for (std::size_t c = 0; c < channels; ++c) {
                for (std::size_t y = 0; y < out_h; ++y) {
                    for (std::size_t x = 0; x < out_w; ++x, ++oi) {
                        std::size_t best = (c * in_h + 2 * y) * in_w + 2 * x;
                        double best_v = input.data[best];
                        for (int dy = 0; dy < 2; ++dy) {
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::size_t idx =
                                    (c * in_h + 2 * y + dy) * in_w + 2 * x + dx;
                                if (input.data[idx] > best_v) {
                                    best_v = input.data[idx];
                                    best = idx;
                                }
                            }
                        }
                        output.data[oi] = best_v;
                        if (cache) cache->argmax[oi] = best;
                    }
                }
            }
            break;
        }
        case LayerKind::Affine: {
            const Eigen::Index n_in = static_cast<Eigen::Index>(input.numel());
            const Eigen::Index n_out = spec.out_units;
            Eigen::Map<const MatrixRM> w(params.weight.data.data(), n_out, n_in);
            Eigen::Map<const Eigen::VectorXd> x(input.data.data(), n_in);
            Eigen::Map<const Eigen::VectorXd> b(params.bias.data.data(), n_out);
            Eigen::Map<Eigen::VectorXd> y(output.data.data(), n_out);
            y.noalias() = w * x + b;
            if (cache) cache->input = input;
            break;
        }
        case LayerKind::Relu: {
            for (std::size_t i = 0; i < input.numel(); ++i) {
                output.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
            }
            if (cache) cache->input = input;
            break;
        }
        case LayerKind::Sigmoid: {
            for (std::size_t i = 0; i < input.numel(); ++i) {
                output.data[i] = stable_sigmoid(input.data[i]);
            }
            if (cache) cache->output = output;
            break;
        }
        case LayerKind::Dropout: {
            if (mode == Mode::Eval || spec.rate == 0.0) {
                output.data = input.data;
                if (cache) cache->mask = Tensor::full(input.shape, 1.0);
                break;
            }
            const double keep_scale = 1.0 / (1.0 - spec.rate);
            Tensor mask(input.shape);
            for (std::size_t i = 0; i < input.numel(); ++i) {
                mask.data[i] = rng.uniform() < spec.rate ? 0.0 : keep_scale;
                output.data[i] = input.data[i] * mask.data[i];
            }
            if (cache) cache->mask = std::move(mask);
            break;
        }
    }
    return output;
}

Tensor layer_backward(const LayerSpec& spec, const LayerParams& params,
                      const LayerCache& cache, const Tensor& upstream,
                      LayerParams& param_grad) {
    if (cache.kind != spec.kind || upstream.shape != cache.output_shape) {
        throw InternalError("layer_backward: cache does not match forward call");
    }
    Tensor input_grad = Tensor::zeros(cache.input_shape);

    switch (spec.kind) {
        case LayerKind::Conv2d: {
            const int out_c = spec.out_channels;
            const int k = spec.kernel;
            const int out_h = static_cast<int>(cache.output_shape[1]);
            const int out_w = static_cast<int>(cache.output_shape[2]);
            const Eigen::Index patch = static_cast<Eigen::Index>(cache.input_shape[0]) * k * k;
            const Eigen::Index cols_n = static_cast<Eigen::Index>(out_h) * out_w;

            const Eigen::MatrixXd cols = im2col(cache.input, k, out_h, out_w);
            Eigen::Map<const MatrixRM> up(upstream.data.data(), out_c, cols_n);
            Eigen::Map<MatrixRM> dw(param_grad.weight.data.data(), out_c, patch);
            dw.noalias() += up * cols.transpose();
            for (int c = 0; c < out_c; ++c) {
                param_grad.bias[static_cast<std::size_t>(c)] += up.row(c).sum();
            }
            Eigen::Map<const MatrixRM> w(params.weight.data.data(), out_c, patch);
            const Eigen::MatrixXd dcols = w.transpose() * up;
            col2im_add(dcols, input_grad, k, out_h, out_w);
            break;
        }
        case LayerKind::MaxPool2x2: {
            for (std::size_t i = 0; i < upstream.numel(); ++i) {
                input_grad.data[cache.argmax[i]] += upstream.data[i];
            }
            break;
        }
        case LayerKind::Affine: {
            const Eigen::Index n_in = static_cast<Eigen::Index>(cache.input.numel());
            const Eigen::Index n_out = spec.out_units;
            Eigen::Map<const Eigen::VectorXd> up(upstream.data.data(), n_out);
            Eigen::Map<const Eigen::VectorXd> x(cache.input.data.data(), n_in);
            Eigen::Map<MatrixRM> dw(param_grad.weight.data.data(), n_out, n_in);
            dw.noalias() += up * x.transpose();
            Eigen::Map<Eigen::VectorXd> db(param_grad.bias.data.data(), n_out);
            db.noalias() += up;
            Eigen::Map<const MatrixRM> w(params.weight.data.data(), n_out, n_in);
            Eigen::Map<Eigen::VectorXd> dx(input_grad.data.data(), n_in);
            dx.noalias() = w.transpose() * up;
            break;
        }
        case LayerKind::Relu: {
            // derivative at exactly 0 is defined as 0
            for (std::size_t i = 0; i < upstream.numel(); ++i) {
                input_grad.data[i] =
                    cache.input.data[i] > 0.0 ? upstream.data[i] : 0.0;
            }
            break;
        }
        case LayerKind::Sigmoid: {
            for (std::size_t i = 0; i < upstream.numel(); ++i) {
                const double y = cache.output.data[i];
                input_grad.data[i] = upstream.data[i] * y * (1.0 - y);
            }
            break;
        }
        case LayerKind::Dropout: {
            for (std::size_t i = 0; i < upstream.numel(); ++i) {
                input_grad.data[i] = upstream.data[i] * cache.mask.data[i];
            }
            break;
        }
    }
    return input_grad;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& at, double h) {
    if (h <= 0.0) throw DomainError("finite differences need h > 0");
    Tensor grad = Tensor::zeros(at.shape);
    Tensor point = at;
    for (std::size_t i = 0; i < at.numel(); ++i) {
        const double orig = point.data[i];
        point.data[i] = orig + h;
        const double fp = f(point);
        point.data[i] = orig - h;
        const double fm = f(point);
        point.data[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw DomainError("finite-difference oracle hit a non-finite value");
        }
        grad.data[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
    if (!analytic.same_shape(numeric)) {
        throw InternalError("max_relative_error: shape mismatch");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.numel(); ++i) {
        const double denom = std::max(1.0, std::abs(numeric.data[i]));
        worst = std::max(worst, std::abs(analytic.data[i] - numeric.data[i]) / denom);
    }
    return worst;
}

}  // namespace mil

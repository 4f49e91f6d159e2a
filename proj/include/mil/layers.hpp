#ifndef MIL_LAYERS_HPP
#define MIL_LAYERS_HPP

#include <functional>
#include <string>
#include <vector>

#include "mil/rng.hpp"
#include "mil/tensor.hpp"

namespace mil {

enum class Mode { Train, Eval };

enum class LayerKind { Conv2d, MaxPool2x2, Affine, Relu, Sigmoid, Dropout };

std::string layer_kind_name(LayerKind kind);

// One entry of the instance-classifier layer chain. Only the fields for
// the given kind are meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int in_channels = 0;   // conv2d
    int out_channels = 0;  // conv2d
    int kernel = 0;        // conv2d, square, stride 1, no padding
    int out_units = 0;     // affine (input is flattened implicitly)
    double rate = 0.0;     // dropout, p in [0, 1)

    static LayerSpec conv2d(int in_c, int out_c, int k);
    static LayerSpec maxpool2x2();
    static LayerSpec affine(int out_units);
    static LayerSpec relu();
    static LayerSpec sigmoid();
    static LayerSpec dropout(double rate);
};

// Learnable tensors of one layer; empty tensors for parameter-free kinds.
// conv2d: weight (out_c, in_c, k, k), bias (out_c).
// affine: weight (out_units, in_units), bias (out_units).
struct LayerParams {
    Tensor weight;
    Tensor bias;
};

// Everything the matching backward pass needs from a forward call.
struct LayerCache {
    LayerKind kind = LayerKind::Relu;
    std::vector<std::size_t> input_shape;
    std::vector<std::size_t> output_shape;
    Tensor input;                     // conv2d, affine, relu
    Tensor output;                    // sigmoid
    Tensor mask;                      // dropout (0 or 1/(1-p) per unit)
    std::vector<std::size_t> argmax;  // maxpool: flat input index per output
};

// Output shape of `spec` applied to `input_shape`; throws ConfigError
// naming `layer_index` on any incompatibility (conv kernel larger than
// the input, affine after nothing, dropout rate >= 1, ...).
std::vector<std::size_t> layer_output_shape(const LayerSpec& spec,
                                            const std::vector<std::size_t>& input_shape,
                                            int layer_index);

// Expected parameter shapes for `spec` given its input shape. Empty
// tensors for parameter-free layers.
LayerParams layer_param_shapes(const LayerSpec& spec,
                               const std::vector<std::size_t>& input_shape);

// In train mode dropout zeroes units with probability `rate` and scales
// survivors by 1/(1-rate); in eval mode dropout is the identity. `cache`
// may be null when no backward pass will follow.
Tensor layer_forward(const LayerSpec& spec, const LayerParams& params,
                     const Tensor& input, Mode mode, Rng& rng,
                     LayerCache* cache);

// Chain-rule gradients for the stored forward. `param_grad` must arrive
// zero-initialized with the layer's parameter shapes; gradients are
// accumulated into it so shared parameters can sum over instances.
Tensor layer_backward(const LayerSpec& spec, const LayerParams& params,
                      const LayerCache& cache, const Tensor& upstream,
                      LayerParams& param_grad);

// Central-difference gradient oracle: (f(x + h e_i) - f(x - h e_i)) / 2h
// per coordinate. Ground truth for every analytic gradient in the
// project; keep it independent of the backward passes it checks.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& at, double h);

// max_i |analytic_i - numeric_i| / max(1, |numeric_i|)
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace mil

#endif

#ifndef MIL_TRAIN_CONFIG_HPP
#define MIL_TRAIN_CONFIG_HPP

#include <cstdint>

#include "mil/augment.hpp"
#include "mil/pooling.hpp"

namespace mil {

enum class OptimizerKind { SgdMomentum, Adam };

OptimizerKind optimizer_from_string(const std::string& name);  // ConfigError
std::string optimizer_name(OptimizerKind kind);

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-4;
    double momentum = 0.9;       // sgd_momentum
    double beta1 = 0.9;          // adam
    double beta2 = 0.999;        // adam
    double adam_epsilon = 1e-8;  // adam
    double weight_decay = 5e-4;  // L2, added to gradients
    int max_epochs = 100;
    int patience = 10;  // early-stop epochs without val-loss improvement
    int batch_bags = 1;
    std::uint64_t seed = 42;
    double nll_epsilon = 1e-7;
    bool augment_enabled = true;
    PoolingConfig pooling;
    AugmentConfig augment;

    void validate() const;  // throws ConfigError
};

}  // namespace mil

#endif

#include "mil/pooling.hpp"

#include <algorithm>
#include <cmath>

#include "mil/errors.hpp"

namespace mil {

namespace {

void check_scores(const std::vector<double>& scores) {
    if (scores.empty()) throw DomainError("pooling: empty score list");
    for (double z : scores) {
        if (!(z >= 0.0 && z <= 1.0)) {
            throw DomainError("pooling: score " + std::to_string(z) +
                              " outside [0, 1]");
        }
    }
}

double clamp_score(double z, double eps) {
    return std::clamp(z, eps, 1.0 - eps);
}

}  // namespace

void PoolingConfig::validate() const {
    if (!(epsilon > 0.0 && epsilon <= 0.01)) {
        throw ConfigError("pooling epsilon must be in (0, 0.01], got " +
                          std::to_string(epsilon));
    }
    if (kind == PoolKind::Lse && !(r > 0.0)) {
        throw ConfigError("LSE pooling requires r > 0, got " + std::to_string(r));
    }
}

PoolKind pool_kind_from_string(const std::string& name) {
    if (name == "max") return PoolKind::Max;
    if (name == "nor") return PoolKind::NoisyOr;
    if (name == "isr") return PoolKind::Isr;
    if (name == "lse") return PoolKind::Lse;
    throw ConfigError("unknown pooling operator '" + name +
                      "' (expected one of max, nor, isr, lse)");
}

std::string pool_kind_name(PoolKind kind) {
    switch (kind) {
        case PoolKind::Max: return "max";
        case PoolKind::NoisyOr: return "nor";
        case PoolKind::Isr: return "isr";
        case PoolKind::Lse: return "lse";
    }
    return "?";
}

double pool(const PoolingConfig& config, const std::vector<double>& scores) {
    config.validate();
    check_scores(scores);
    const std::size_t n = scores.size();

    switch (config.kind) {
        case PoolKind::Max:
            return *std::max_element(scores.begin(), scores.end());

        case PoolKind::NoisyOr: {
            // 1 - prod(1 - z) computed as 1 - exp(sum log1p(-z))
            double log_prod = 0.0;
            for (double z : scores) {
                log_prod += std::log1p(-clamp_score(z, config.epsilon));
            }
            return 1.0 - std::exp(log_prod);
        }

        case PoolKind::Isr: {
            double s = 0.0;
            for (double z : scores) {
                const double zc = clamp_score(z, config.epsilon);
                s += zc / (1.0 - zc);
            }
            return s / (1.0 + s);
        }

        case PoolKind::Lse: {
            const double m = config.r *
                             *std::max_element(scores.begin(), scores.end());
            double acc = 0.0;
            for (double z : scores) {
                acc += std::exp(config.r * z - m);
            }
            return (m + std::log(acc / static_cast<double>(n))) / config.r;
        }
    }
    throw InternalError("unknown pooling kind");
}

std::vector<double> pool_grad(const PoolingConfig& config,
                              const std::vector<double>& scores,
                              double upstream) {
    config.validate();
    check_scores(scores);
    const std::size_t n = scores.size();
    std::vector<double> grad(n, 0.0);

    switch (config.kind) {
        case PoolKind::Max: {
            const std::size_t j = static_cast<std::size_t>(
                std::max_element(scores.begin(), scores.end()) - scores.begin());
            grad[j] = upstream;
            return grad;
        }

        case PoolKind::NoisyOr: {
            // d theta / d z_j = prod_{k != j} (1 - z_k) = exp(log_prod) / (1 - z_j)
            double log_prod = 0.0;
            for (double z : scores) {
                log_prod += std::log1p(-clamp_score(z, config.epsilon));
            }
            const double prod = std::exp(log_prod);
            for (std::size_t j = 0; j < n; ++j) {
                grad[j] = upstream * prod /
                          (1.0 - clamp_score(scores[j], config.epsilon));
            }
            return grad;
        }

        case PoolKind::Isr: {
            double s = 0.0;
            for (double z : scores) {
                const double zc = clamp_score(z, config.epsilon);
                s += zc / (1.0 - zc);
            }
            const double denom = (1.0 + s) * (1.0 + s);
            for (std::size_t j = 0; j < n; ++j) {
                const double zc = clamp_score(scores[j], config.epsilon);
                grad[j] = upstream / (denom * (1.0 - zc) * (1.0 - zc));
            }
            return grad;
        }

        case PoolKind::Lse: {
            // softmax weights over r z_k
            const double m = config.r *
                             *std::max_element(scores.begin(), scores.end());
            double acc = 0.0;
            for (double z : scores) {
                acc += std::exp(config.r * z - m);
            }
            for (std::size_t j = 0; j < n; ++j) {
                grad[j] = upstream * std::exp(config.r * scores[j] - m) / acc;
            }
            return grad;
        }
    }
    throw InternalError("unknown pooling kind");
}

}  // namespace mil

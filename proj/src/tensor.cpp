#include "mil/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mil/errors.hpp"

namespace mil {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return shape.empty() ? 0 : n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shp)
    : shape(std::move(shp)), data(shape_numel(shape), 0.0) {
    for (std::size_t e : shape) {
        if (e == 0) throw InternalError("tensor extent must be positive");
    }
}

Tensor::Tensor(std::vector<std::size_t> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
    if (data.size() != shape_numel(shape)) {
        throw InternalError("tensor data length " + std::to_string(data.size()) +
                            " does not match shape " + shape_to_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shp) { return Tensor(std::move(shp)); }

Tensor Tensor::full(std::vector<std::size_t> shp, double value) {
    Tensor t(std::move(shp));
    t.fill(value);
    return t;
}

Tensor Tensor::vector1d(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

double& Tensor::at3(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * shape[1] + h) * shape[2] + w];
}

double Tensor::at3(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * shape[1] + h) * shape[2] + w];
}

void Tensor::fill(double value) {
    for (double& v : data) v = value;
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::require_finite(const std::string& context) const {
    if (!all_finite()) {
        throw InternalError("non-finite value in " + context);
    }
}

}  // namespace mil

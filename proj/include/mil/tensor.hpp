#ifndef MIL_TENSOR_HPP
#define MIL_TENSOR_HPP

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace mil {

// Dense row-major tensor of 64-bit floats. Desk-scale sizes; no views,
// no broadcasting, just contiguous storage plus shape bookkeeping.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shp);
    Tensor(std::vector<std::size_t> shp, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shp);
    static Tensor full(std::vector<std::size_t> shp, double value);
    static Tensor vector1d(std::initializer_list<double> values);

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    // 3-D (c, h, w) accessors; caller guarantees rank 3.
    double& at3(std::size_t c, std::size_t h, std::size_t w);
    double at3(std::size_t c, std::size_t h, std::size_t w) const;

    void fill(double value);
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    // Throws InternalError naming `context` if any element is NaN/Inf.
    void require_finite(const std::string& context) const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace mil

#endif

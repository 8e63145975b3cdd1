#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace weightlab {

/// Dense row-major tensor of 64-bit floats.
struct TensorF {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    TensorF() = default;
    explicit TensorF(std::vector<std::size_t> s);

    static TensorF zeros(std::vector<std::size_t> s) { return TensorF(std::move(s)); }

    std::size_t numel() const;
    bool same_shape(const TensorF& other) const { return shape == other.shape; }

    double& at(std::size_t i) { return values[i]; }
    double at(std::size_t i) const { return values[i]; }

    /// Throws std::invalid_argument if product(shape) != values.size()
    /// or any value is non-finite.
    void validate(const std::string& what) const;

    std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace weightlab

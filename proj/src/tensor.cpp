#include "weightlab/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace weightlab {

TensorF::TensorF(std::vector<std::size_t> s) : shape(std::move(s)) {
    values.assign(shape_numel(shape), 0.0);
}

std::size_t TensorF::numel() const {
    return shape_numel(shape);
}

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
}

void TensorF::validate(const std::string& what) const {
    if (values.size() != numel()) {
        throw std::invalid_argument(what + ": shape " + shape_str() + " implies " +
                                    std::to_string(numel()) + " values, got " +
                                    std::to_string(values.size()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument(what + ": non-finite value");
        }
    }
}

std::string TensorF::shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

}  // namespace weightlab

#include "lp/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lp {

std::int64_t shape_numel(const Shape& dims) {
    std::int64_t n = 1;
    for (int d : dims) n *= d;
    return n;
}

std::string shape_str(const Shape& dims) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ',';
        os << dims[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape d, std::vector<double> values) : dims(std::move(d)), data(std::move(values)) {
    for (int e : dims) {
        if (e <= 0) throw std::invalid_argument("Tensor: non-positive extent in " + shape_str(dims));
    }
    if (shape_numel(dims) != static_cast<std::int64_t>(data.size()))
        throw std::invalid_argument("Tensor: " + shape_str(dims) + " does not match " +
                                    std::to_string(data.size()) + " values");
}

Tensor Tensor::zeros(Shape d) {
    std::int64_t n = shape_numel(d);
    return Tensor(std::move(d), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(Shape d, double value) {
    std::int64_t n = shape_numel(d);
    return Tensor(std::move(d), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{1}, {value}); }

double Tensor::scalar_value() const {
    if (size() != 1) throw std::logic_error("Tensor: scalar_value on " + shape_str(dims));
    return data[0];
}

void ensure_finite(const std::vector<double>& v, const std::string& context) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw std::domain_error(context + ": non-finite value at flat index " + std::to_string(i));
    }
}

void ensure_finite(const Tensor& t, const std::string& context) { ensure_finite(t.data, context); }

}  // namespace lp

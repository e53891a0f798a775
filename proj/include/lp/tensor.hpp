#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace lp {

/// Ordered list of positive extents, row-major storage order.
using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& dims);
std::string shape_str(const Shape& dims);

/// Dense 64-bit real tensor. Value semantics; safe to share by const ref.
struct Tensor {
    Shape dims;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape d, std::vector<double> values);

    static Tensor zeros(Shape d);
    static Tensor full(Shape d, double value);
    static Tensor scalar(double value);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    int rank() const { return static_cast<int>(dims.size()); }
    bool same_shape(const Tensor& other) const { return dims == other.dims; }

    double scalar_value() const;  // requires size() == 1
};

/// Throws std::domain_error naming `context` if any value is NaN/Inf.
void ensure_finite(const Tensor& t, const std::string& context);
void ensure_finite(const std::vector<double>& v, const std::string& context);

}  // namespace lp

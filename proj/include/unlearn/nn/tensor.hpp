#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace unlearn {

/// Raised when an operation produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Dense row-major float64 array. `grad`, when present, mirrors `values`.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), values(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
        if (values.size() != shape_size(shape))
            throw ShapeError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                             shape_string(shape));
    }

    std::size_t size() const { return values.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    std::size_t rank() const { return shape.size(); }

    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }

    std::span<double> row(std::size_t i) {
        const std::size_t stride = size() / shape.at(0);
        return {values.data() + i * stride, stride};
    }
    std::span<const double> row(std::size_t i) const {
        const std::size_t stride = size() / shape.at(0);
        return {values.data() + i * stride, stride};
    }

    void enable_grad() { grad.emplace(values.size(), 0.0); }
    void zero_grad() {
        if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    }
};

inline bool all_finite(std::span<const double> xs) {
    for (double x : xs)
        if (!std::isfinite(x)) return false;
    return true;
}

inline void require_finite(const Tensor& t, const std::string& where) {
    if (!all_finite(t.values)) throw NonFiniteError("non-finite value produced by " + where);
}

} // namespace unlearn

#include "sern/tensor.hpp"

#include <sstream>

namespace sern {

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) os << 'x';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_size(shape)) {
        throw ShapeError("tensor value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

Tensor Tensor::zeros(const Shape& shape) {
    return Tensor(shape, std::vector<double>(shape_size(shape), 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vec(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

Tensor Tensor::uniform(const Shape& shape, double lo, double hi, std::mt19937& rng) {
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = uniform_in(rng, lo, hi);
    return Tensor(shape, std::move(v));
}

std::size_t Tensor::rows() const {
    if (!is_matrix()) throw ShapeError("rows() on non-matrix tensor " + shape_str(shape));
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (!is_matrix()) throw ShapeError("cols() on non-matrix tensor " + shape_str(shape));
    return shape[1];
}

void Tensor::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() { grad.assign(values.size(), 0.0); }

double uniform01(std::mt19937& rng) {
    // 53 random bits -> double in [0, 1)
    const std::uint64_t hi = rng() >> 5;  // 27 bits
    const std::uint64_t lo = rng() >> 6;  // 26 bits
    return (static_cast<double>(hi) * 67108864.0 + static_cast<double>(lo)) *
           (1.0 / 9007199254740992.0);
}

double uniform_in(std::mt19937& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

}  // namespace sern

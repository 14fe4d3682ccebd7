#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sern/error.hpp"

namespace sern {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);

/// Dense real array with an optional same-shape gradient buffer.
///
/// All model math runs on doubles; gradient checks are only meaningful at
/// 64-bit tolerances. `grad` is empty until `ensure_grad()` or a backward
/// pass touches the tensor.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty = absent

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);

    static Tensor zeros(const Shape& shape);
    static Tensor scalar(double v);
    static Tensor vec(std::vector<double> v);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
    /// Entries drawn uniformly from [lo, hi) under `rng`.
    static Tensor uniform(const Shape& shape, double lo, double hi, std::mt19937& rng);

    std::size_t size() const { return values.size(); }
    bool is_scalar() const { return shape.empty() || (shape.size() == 1 && shape[0] == 1); }
    bool is_vector() const { return shape.size() == 1; }
    bool is_matrix() const { return shape.size() == 2; }
    std::size_t rows() const;
    std::size_t cols() const;

    double at(std::size_t i) const { return values[i]; }
    double& at(std::size_t i) { return values[i]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }

    bool has_grad() const { return !grad.empty(); }
    void ensure_grad();
    void zero_grad();
};

std::size_t shape_size(const Shape& shape);

/// Portable uniform double in [0, 1): derived from the raw mt19937 stream so
/// results do not depend on the standard library's distribution internals.
double uniform01(std::mt19937& rng);

/// Uniform double in [lo, hi).
double uniform_in(std::mt19937& rng, double lo, double hi);

}  // namespace sern

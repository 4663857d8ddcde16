#pragma once

#include "noisemod/error.hpp"

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace noisemod {

/// Dense n-dimensional array of doubles, row-major flat layout.
/// A rank-0 tensor (empty shape) holds a single scalar.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() : data(1, 0.0) {}
    explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);

    static Tensor scalar(double v);
    static Tensor from(std::vector<std::size_t> s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    bool is_scalar() const { return shape.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    const double& operator[](std::size_t i) const { return data[i]; }

    /// Row-major element access, e.g. t.at({c, y, x}).
    double& at(std::initializer_list<std::size_t> idx);
    const double& at(std::initializer_list<std::size_t> idx) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;

    std::string shape_str() const; // "[2,3]"
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// --- elementwise -------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b); // every divisor entry must be nonzero

Tensor add(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor sign(const Tensor& a); // sign(0) = 0
Tensor abs(const Tensor& a);

// --- linear algebra ----------------------------------------------------

/// Standard matrix product of a [m x k] and b [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Cross-correlation of input [c_in x h x w] with kernels
/// [c_out x c_in x kh x kw]; output [c_out x h' x w'] with
/// h' = (h + 2*padding - kh)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding);

// --- reductions --------------------------------------------------------

enum class ReduceOp { Sum, Mean, Max, Argmax };

/// Reduce over the given axes (removed from the output shape); reducing
/// all axes yields a rank-0 scalar. Argmax ties break to the lowest index.
Tensor reduce(ReduceOp op, const Tensor& a, const std::vector<std::size_t>& axes);

double sum(const Tensor& a);
double mean(const Tensor& a);
double max_value(const Tensor& a);
std::size_t argmax(const Tensor& a);

} // namespace noisemod

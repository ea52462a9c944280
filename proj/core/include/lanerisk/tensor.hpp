#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "lanerisk/error.hpp"

namespace lanerisk {

/// Dense n-dimensional array of doubles, flat row-major storage.
///
/// All free functions below are pure: inputs are never modified and
/// identical inputs give bit-identical outputs. Accumulations run
/// left-to-right over the contraction index so results are reproducible.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t dim) const { return shape_[dim]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double& at(std::initializer_list<std::size_t> idx);
    double at(std::initializer_list<std::size_t> idx) const;

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    void fill(double v);

private:
    std::size_t flat_index(std::initializer_list<std::size_t> idx) const;

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

/// Standard matrix product of two rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);

enum class Elementwise { Add, Sub, Hadamard };

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);

enum class Activation { Sigmoid, Tanh, Relu, Identity };

Tensor activation(Activation kind, const Tensor& x);

/// Derivative of the activation expressed in terms of its *output* y.
Tensor activation_grad_from_output(Activation kind, const Tensor& y);

/// Numerically stable softmax (max subtraction) over a rank-1 tensor.
Tensor softmax(const Tensor& x);

double sigmoid(double v);

}  // namespace lanerisk

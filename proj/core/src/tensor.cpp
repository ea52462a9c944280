#include "lanerisk/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lanerisk {

namespace {

std::size_t checked_volume(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw DimensionError("tensor rank must be >= 1");
    }
    std::size_t n = 1;
    for (std::size_t e : shape) {
        if (e == 0) {
            throw DimensionError("tensor extents must be >= 1, got shape " + shape_str(shape));
        }
        n *= e;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_volume(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size()) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
        throw DimensionError("index rank " + std::to_string(idx.size()) +
                             " vs tensor rank " + std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    std::size_t dim = 0;
    for (std::size_t i : idx) {
        flat = flat * shape_[dim] + i;
        ++dim;
    }
    return flat;
}

double& Tensor::at(std::initializer_list<std::size_t> idx) { return data_[flat_index(idx)]; }
double Tensor::at(std::initializer_list<std::size_t> idx) const { return data_[flat_index(idx)]; }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    Tensor out(std::move(shape), data_);
    return out;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    // i-k-j order: each out element accumulates in ascending k, and the
    // inner j loop runs over contiguous rows of b and out.
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = po + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw DimensionError("elementwise: shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
        case Elementwise::Add:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
            break;
        case Elementwise::Sub:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
            break;
        case Elementwise::Hadamard:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
            break;
    }
    return out;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Tensor activation(Activation kind, const Tensor& x) {
    Tensor out(x.shape());
    const double* px = x.data();
    double* po = out.data();
    const std::size_t n = x.size();
    switch (kind) {
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) po[i] = sigmoid(px[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(px[i]);
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) po[i] = px[i] > 0.0 ? px[i] : 0.0;
            break;
        case Activation::Identity:
            for (std::size_t i = 0; i < n; ++i) po[i] = px[i];
            break;
    }
    return out;
}

Tensor activation_grad_from_output(Activation kind, const Tensor& y) {
    Tensor out(y.shape());
    const double* py = y.data();
    double* po = out.data();
    const std::size_t n = y.size();
    switch (kind) {
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < n; ++i) po[i] = py[i] * (1.0 - py[i]);
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < n; ++i) po[i] = 1.0 - py[i] * py[i];
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < n; ++i) po[i] = py[i] > 0.0 ? 1.0 : 0.0;
            break;
        case Activation::Identity:
            for (std::size_t i = 0; i < n; ++i) po[i] = 1.0;
            break;
    }
    return out;
}

Tensor softmax(const Tensor& x) {
    if (x.rank() != 1) {
        throw DimensionError("softmax expects rank-1 input, got " + shape_str(x.shape()));
    }
    const std::size_t n = x.size();
    Tensor out({n});
    double mx = x[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
    return out;
}

}  // namespace lanerisk

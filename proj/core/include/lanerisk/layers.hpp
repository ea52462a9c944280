#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lanerisk/tensor.hpp"

namespace lanerisk {

struct ParamRef {
    std::string name;
    Tensor* value;
    Tensor* grad;
};

/// Base class for layers with explicit forward/backward passes.
///
/// Each forward call pushes its cache onto an internal stack and each
/// backward call pops the most recent one, so time-distributed use
/// (forward frames 1..q, then backward q..1) works without copies.
/// Parameter gradients accumulate across backward calls until
/// zero_grads(). Instances are single-threaded.
class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    Layer(const Layer&) = delete;
    Layer& operator=(const Layer&) = delete;

    /// rng is only consumed by stochastic layers in train mode.
    virtual Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual void collect_params(std::vector<ParamRef>& out) { (void)out; }
    virtual void clear_cache() {}

    void zero_grads();
    std::size_t param_count();
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

/// Glorot uniform initialization U(+-sqrt(6/(fan_in+fan_out))).
void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

/// 2-D cross-correlation with "same" zero padding, stride s.
/// Output spatial extents are ceil(H/s) x ceil(W/s).
class Conv2D : public Layer {
public:
    Conv2D(std::string name, std::size_t in_channels, std::size_t filters, std::size_t window,
           std::size_t stride, std::mt19937_64& init_rng);

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void clear_cache() override;

    std::size_t in_channels() const { return in_channels_; }
    std::size_t filters() const { return filters_; }

    Tensor weights;  // [filters x window x window x in_channels]
    Tensor bias;     // [filters]
    Tensor grad_weights;
    Tensor grad_bias;

private:
    struct Cache {
        Tensor col;  // [out_h*out_w x window*window*in_channels]
        std::size_t in_h, in_w, out_h, out_w;
    };

    std::size_t in_channels_, filters_, window_, stride_;
    std::vector<Cache> cache_;
};

/// 2x2 max pooling with stride 2; trailing odd rows/columns are dropped.
/// Ties route the gradient to the first maximum in row-major scan order.
class MaxPool : public Layer {
public:
    explicit MaxPool(std::string name) : Layer(std::move(name)) {}

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    void clear_cache() override;

private:
    struct Cache {
        std::vector<std::size_t> argmax;  // flat input index per output element
        std::vector<std::size_t> in_shape;
    };
    std::vector<Cache> cache_;
};

/// Fully connected affine map plus activation. Inputs of any rank are
/// flattened; grad_in is reshaped back to the input shape.
class Dense : public Layer {
public:
    Dense(std::string name, std::size_t in_dim, std::size_t out_dim, Activation act,
          std::mt19937_64& init_rng);

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void clear_cache() override;

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }

    Tensor weights;  // [in_dim x out_dim]
    Tensor bias;     // [out_dim]
    Tensor grad_weights;
    Tensor grad_bias;

private:
    struct Cache {
        Tensor input_flat;
        Tensor output;  // post-activation, for the activation derivative
        std::vector<std::size_t> in_shape;
    };

    std::size_t in_dim_, out_dim_;
    Activation act_;
    std::vector<Cache> cache_;
};

/// Inverted dropout: train mode zeroes with probability p and scales
/// survivors by 1/(1-p); infer mode is the exact identity.
class Dropout : public Layer {
public:
    Dropout(std::string name, double p);

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    Tensor backward(const Tensor& grad_out) override;
    void clear_cache() override;

    double drop_probability() const { return p_; }

private:
    double p_;
    std::vector<Tensor> masks_;
};

}  // namespace lanerisk

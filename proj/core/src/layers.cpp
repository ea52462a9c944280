#include "lanerisk/layers.hpp"

#include <algorithm>
#include <cmath>

namespace lanerisk {

void Layer::zero_grads() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (auto& r : refs) r.grad->fill(0.0);
}

std::size_t Layer::param_count() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    std::size_t n = 0;
    for (auto& r : refs) n += r.value->size();
    return n;
}

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

namespace {

// out[M x N] += a[M x K] * b[N x K]^T is avoided on purpose: all products
// below are arranged so the inner loop writes contiguous output and each
// output element accumulates in ascending k.

// out [M x N] = a [K x M]^T * b [K x N], accumulated into out.
void matmul_tn_acc(const double* a, const double* b, double* out, std::size_t K, std::size_t M,
                   std::size_t N) {
    for (std::size_t k = 0; k < K; ++k) {
        const double* arow = a + k * M;
        const double* brow = b + k * N;
        for (std::size_t i = 0; i < M; ++i) {
            const double av = arow[i];
            double* orow = out + i * N;
            for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
        }
    }
}

// out [M x N] = a [M x K] * b [K x N]
void matmul_nn(const double* a, const double* b, double* out, std::size_t M, std::size_t K,
               std::size_t N) {
    std::fill(out, out + M * N, 0.0);
    for (std::size_t i = 0; i < M; ++i) {
        double* orow = out + i * N;
        const double* arow = a + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = arow[k];
            const double* brow = b + k * N;
            for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
        }
    }
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

Conv2D::Conv2D(std::string name, std::size_t in_channels, std::size_t filters, std::size_t window,
               std::size_t stride, std::mt19937_64& init_rng)
    : Layer(std::move(name)),
      weights({filters, window, window, in_channels}),
      bias({filters}),
      grad_weights({filters, window, window, in_channels}),
      grad_bias({filters}),
      in_channels_(in_channels),
      filters_(filters),
      window_(window),
      stride_(stride) {
    if (window < 1 || stride < 1 || filters < 1 || in_channels < 1) {
        throw ConfigError("conv2d: filters, window, stride, channels must all be >= 1");
    }
    glorot_init(weights, window * window * in_channels, window * window * filters, init_rng);
}

Tensor Conv2D::forward(const Tensor& x, bool /*train*/, std::mt19937_64* /*rng*/) {
    if (x.rank() != 3 || x.extent(2) != in_channels_) {
        throw DimensionError("conv2d '" + name() + "': expected [HxWx" +
                             std::to_string(in_channels_) + "], got " + shape_str(x.shape()));
    }
    const std::size_t H = x.extent(0), W = x.extent(1), C = in_channels_;
    if (H < window_ || W < window_) {
        throw DimensionError("conv2d '" + name() + "': input " + shape_str(x.shape()) +
                             " smaller than window " + std::to_string(window_));
    }
    const std::size_t oh = ceil_div(H, stride_), ow = ceil_div(W, stride_);
    const std::size_t pad_h = std::max<std::size_t>((oh - 1) * stride_ + window_, H) - H;
    const std::size_t pad_w = std::max<std::size_t>((ow - 1) * stride_ + window_, W) - W;
    const std::size_t pad_top = pad_h / 2, pad_left = pad_w / 2;

    const std::size_t K = window_ * window_ * C;
    const std::size_t P = oh * ow;
    Tensor col({P, K});
    double* pc = col.data();
    const double* px = x.data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            double* crow = pc + (oy * ow + ox) * K;
            for (std::size_t dy = 0; dy < window_; ++dy) {
                const long iy = static_cast<long>(oy * stride_ + dy) - static_cast<long>(pad_top);
                for (std::size_t dx = 0; dx < window_; ++dx) {
                    const long ix =
                        static_cast<long>(ox * stride_ + dx) - static_cast<long>(pad_left);
                    double* dst = crow + (dy * window_ + dx) * C;
                    if (iy >= 0 && iy < static_cast<long>(H) && ix >= 0 &&
                        ix < static_cast<long>(W)) {
                        const double* src = px + (static_cast<std::size_t>(iy) * W +
                                                  static_cast<std::size_t>(ix)) *
                                                     C;
                        for (std::size_t c = 0; c < C; ++c) dst[c] = src[c];
                    }
                    // padded positions stay zero
                }
            }
        }
    }

    // weights flat layout [filters x K] matches the col row layout, so
    // out = col * weights^T; transpose once to keep the kernel i-k-j.
    Tensor wt({K, filters_});
    {
        const double* pw = weights.data();
        double* pt = wt.data();
        for (std::size_t f = 0; f < filters_; ++f)
            for (std::size_t k = 0; k < K; ++k) pt[k * filters_ + f] = pw[f * K + k];
    }
    Tensor out({oh, ow, filters_});
    matmul_nn(col.data(), wt.data(), out.data(), P, K, filters_);
    double* po = out.data();
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t f = 0; f < filters_; ++f) po[p * filters_ + f] += bias[f];

    cache_.push_back(Cache{std::move(col), H, W, oh, ow});
    return out;
}

Tensor Conv2D::backward(const Tensor& grad_out) {
    if (cache_.empty()) {
        throw StateError("conv2d '" + name() + "': backward without cached forward");
    }
    Cache cache = std::move(cache_.back());
    cache_.pop_back();
    const std::size_t oh = cache.out_h, ow = cache.out_w;
    if (grad_out.rank() != 3 || grad_out.extent(0) != oh || grad_out.extent(1) != ow ||
        grad_out.extent(2) != filters_) {
        throw DimensionError("conv2d '" + name() + "': grad_out shape " +
                             shape_str(grad_out.shape()) + " does not match forward output");
    }
    const std::size_t H = cache.in_h, W = cache.in_w, C = in_channels_;
    const std::size_t K = window_ * window_ * C;
    const std::size_t P = oh * ow;
    const double* pg = grad_out.data();

    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t f = 0; f < filters_; ++f) grad_bias[f] += pg[p * filters_ + f];

    // grad_w [filters x K] += grad_out [P x filters]^T * col [P x K]
    matmul_tn_acc(pg, cache.col.data(), grad_weights.data(), P, filters_, K);

    // dcol [P x K] = grad_out [P x filters] * weights [filters x K]
    Tensor dcol({P, K});
    matmul_nn(pg, weights.data(), dcol.data(), P, filters_, K);

    const std::size_t pad_h = std::max<std::size_t>((oh - 1) * stride_ + window_, H) - H;
    const std::size_t pad_w = std::max<std::size_t>((ow - 1) * stride_ + window_, W) - W;
    const std::size_t pad_top = pad_h / 2, pad_left = pad_w / 2;

    Tensor grad_in({H, W, C});
    double* pi = grad_in.data();
    const double* pd = dcol.data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            const double* drow = pd + (oy * ow + ox) * K;
            for (std::size_t dy = 0; dy < window_; ++dy) {
                const long iy = static_cast<long>(oy * stride_ + dy) - static_cast<long>(pad_top);
                if (iy < 0 || iy >= static_cast<long>(H)) continue;
                for (std::size_t dx = 0; dx < window_; ++dx) {
                    const long ix =
                        static_cast<long>(ox * stride_ + dx) - static_cast<long>(pad_left);
                    if (ix < 0 || ix >= static_cast<long>(W)) continue;
                    const double* src = drow + (dy * window_ + dx) * C;
                    double* dst =
                        pi + (static_cast<std::size_t>(iy) * W + static_cast<std::size_t>(ix)) * C;
                    for (std::size_t c = 0; c < C; ++c) dst[c] += src[c];
                }
            }
        }
    }
    return grad_in;
}

void Conv2D::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name() + ".W", &weights, &grad_weights});
    out.push_back({name() + ".b", &bias, &grad_bias});
}

void Conv2D::clear_cache() { cache_.clear(); }

Tensor MaxPool::forward(const Tensor& x, bool /*train*/, std::mt19937_64* /*rng*/) {
    if (x.rank() != 3 || x.extent(0) < 2 || x.extent(1) < 2) {
        throw DimensionError("maxpool '" + name() + "': need [HxWxC] with H,W >= 2, got " +
                             shape_str(x.shape()));
    }
    const std::size_t H = x.extent(0), W = x.extent(1), C = x.extent(2);
    const std::size_t oh = H / 2, ow = W / 2;
    Tensor out({oh, ow, C});
    Cache cache;
    cache.argmax.resize(oh * ow * C);
    cache.in_shape = x.shape();
    const double* px = x.data();
    double* po = out.data();
    for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
            for (std::size_t c = 0; c < C; ++c) {
                std::size_t best = (2 * oy * W + 2 * ox) * C + c;
                double bv = px[best];
                for (std::size_t dy = 0; dy < 2; ++dy) {
                    for (std::size_t dx = 0; dx < 2; ++dx) {
                        const std::size_t idx = ((2 * oy + dy) * W + (2 * ox + dx)) * C + c;
                        if (px[idx] > bv) {
                            bv = px[idx];
                            best = idx;
                        }
                    }
                }
                const std::size_t oidx = (oy * ow + ox) * C + c;
                po[oidx] = bv;
                cache.argmax[oidx] = best;
            }
        }
    }
    cache_.push_back(std::move(cache));
    return out;
}

Tensor MaxPool::backward(const Tensor& grad_out) {
    if (cache_.empty()) {
        throw StateError("maxpool '" + name() + "': backward without cached forward");
    }
    Cache cache = std::move(cache_.back());
    cache_.pop_back();
    if (grad_out.size() != cache.argmax.size()) {
        throw DimensionError("maxpool '" + name() + "': grad_out shape " +
                             shape_str(grad_out.shape()) + " does not match forward output");
    }
    Tensor grad_in(cache.in_shape);
    for (std::size_t i = 0; i < cache.argmax.size(); ++i) {
        grad_in[cache.argmax[i]] += grad_out[i];
    }
    return grad_in;
}

void MaxPool::clear_cache() { cache_.clear(); }

Dense::Dense(std::string name, std::size_t in_dim, std::size_t out_dim, Activation act,
             std::mt19937_64& init_rng)
    : Layer(std::move(name)),
      weights({in_dim, out_dim}),
      bias({out_dim}),
      grad_weights({in_dim, out_dim}),
      grad_bias({out_dim}),
      in_dim_(in_dim),
      out_dim_(out_dim),
      act_(act) {
    glorot_init(weights, in_dim, out_dim, init_rng);
}

Tensor Dense::forward(const Tensor& x, bool /*train*/, std::mt19937_64* /*rng*/) {
    if (x.size() != in_dim_) {
        throw DimensionError("dense '" + name() + "': input " + shape_str(x.shape()) +
                             " does not flatten to " + std::to_string(in_dim_));
    }
    Tensor flat = x.reshaped({in_dim_});
    Tensor pre({out_dim_});
    const double* pw = weights.data();
    double* pp = pre.data();
    for (std::size_t j = 0; j < out_dim_; ++j) pp[j] = bias[j];
    for (std::size_t k = 0; k < in_dim_; ++k) {
        const double xv = flat[k];
        const double* wrow = pw + k * out_dim_;
        for (std::size_t j = 0; j < out_dim_; ++j) pp[j] += xv * wrow[j];
    }
    Tensor out = activation(act_, pre);
    cache_.push_back(Cache{std::move(flat), out, x.shape()});
    return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
    if (cache_.empty()) {
        throw StateError("dense '" + name() + "': backward without cached forward");
    }
    Cache cache = std::move(cache_.back());
    cache_.pop_back();
    if (grad_out.size() != out_dim_) {
        throw DimensionError("dense '" + name() + "': grad_out shape " +
                             shape_str(grad_out.shape()) + " vs out_dim " +
                             std::to_string(out_dim_));
    }
    Tensor act_grad = activation_grad_from_output(act_, cache.output);
    Tensor dpre({out_dim_});
    for (std::size_t j = 0; j < out_dim_; ++j) dpre[j] = grad_out[j] * act_grad[j];

    for (std::size_t j = 0; j < out_dim_; ++j) grad_bias[j] += dpre[j];
    double* gw = grad_weights.data();
    for (std::size_t k = 0; k < in_dim_; ++k) {
        const double xv = cache.input_flat[k];
        double* grow = gw + k * out_dim_;
        for (std::size_t j = 0; j < out_dim_; ++j) grow[j] += xv * dpre[j];
    }
    Tensor grad_in({in_dim_});
    const double* pw = weights.data();
    for (std::size_t k = 0; k < in_dim_; ++k) {
        const double* wrow = pw + k * out_dim_;
        double acc = 0.0;
        for (std::size_t j = 0; j < out_dim_; ++j) acc += wrow[j] * dpre[j];
        grad_in[k] = acc;
    }
    return grad_in.reshaped(cache.in_shape);
}

void Dense::collect_params(std::vector<ParamRef>& out) {
    out.push_back({name() + ".W", &weights, &grad_weights});
    out.push_back({name() + ".b", &bias, &grad_bias});
}

void Dense::clear_cache() { cache_.clear(); }

Dropout::Dropout(std::string name, double p) : Layer(std::move(name)), p_(p) {
    if (p < 0.0 || p >= 1.0) {
        throw ConfigError("dropout '" + this->name() + "': p must be in [0,1), got " +
                          std::to_string(p));
    }
}

Tensor Dropout::forward(const Tensor& x, bool train, std::mt19937_64* rng) {
    if (!train || p_ == 0.0) {
        Tensor mask(x.shape());
        mask.fill(1.0);
        masks_.push_back(std::move(mask));
        return x;
    }
    if (rng == nullptr) {
        throw StateError("dropout '" + name() + "': train mode needs a random source");
    }
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const double scale = 1.0 / (1.0 - p_);
    Tensor mask(x.shape());
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = dist(*rng) >= p_ ? scale : 0.0;
        mask[i] = keep;
        out[i] = x[i] * keep;
    }
    masks_.push_back(std::move(mask));
    return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
    if (masks_.empty()) {
        throw StateError("dropout '" + name() + "': backward without cached forward");
    }
    Tensor mask = std::move(masks_.back());
    masks_.pop_back();
    if (!mask.same_shape(grad_out)) {
        throw DimensionError("dropout '" + name() + "': grad_out shape " +
                             shape_str(grad_out.shape()) + " does not match forward input");
    }
    return elementwise(Elementwise::Hadamard, grad_out, mask);
}

void Dropout::clear_cache() { masks_.clear(); }

}  // namespace lanerisk

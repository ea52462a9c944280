#include "lanerisk/lstm.hpp"

#include <cmath>

namespace lanerisk {

namespace {

// y [m] = W [m x n] * x [n] + y
void matvec_acc(const Tensor& W, const Tensor& x, Tensor& y) {
    const std::size_t m = W.extent(0), n = W.extent(1);
    const double* pw = W.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* wrow = pw + i * n;
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += wrow[j] * x[j];
        y[i] += acc;
    }
}

// grad for the pre-activation of one branch: dW += da x^T, dU += da h^T,
// db += da, and the chained input/state gradients.
void branch_backward(const Tensor& da, const Tensor& z, const Tensor& h_prev, const Tensor& W,
                     const Tensor& U, Tensor& dW, Tensor& dU, Tensor& db, Tensor& dz,
                     Tensor& dh_prev) {
    const std::size_t h = da.size(), d = z.size();
    double* pdW = dW.data();
    double* pdU = dU.data();
    const double* pW = W.data();
    const double* pU = U.data();
    for (std::size_t i = 0; i < h; ++i) {
        const double a = da[i];
        db[i] += a;
        double* dWrow = pdW + i * d;
        for (std::size_t j = 0; j < d; ++j) dWrow[j] += a * z[j];
        double* dUrow = pdU + i * h;
        for (std::size_t j = 0; j < h; ++j) dUrow[j] += a * h_prev[j];
        const double* Wrow = pW + i * d;
        for (std::size_t j = 0; j < d; ++j) dz[j] += Wrow[j] * a;
        const double* Urow = pU + i * h;
        for (std::size_t j = 0; j < h; ++j) dh_prev[j] += Urow[j] * a;
    }
}

}  // namespace

std::size_t count_lstm_params(std::size_t input_dim, std::size_t hidden) {
    if (input_dim < 1 || hidden < 1) {
        throw ConfigError("lstm: input_dim and hidden must be >= 1");
    }
    return 4 * (input_dim * hidden + hidden * hidden + hidden);
}

LstmLayer::LstmLayer(std::string name, std::size_t steps, std::size_t input_dim,
                     std::size_t hidden, std::mt19937_64& init_rng)
    : Layer(std::move(name)),
      Wg({hidden, input_dim}), Ug({hidden, hidden}), bg({hidden}),
      Wi({hidden, input_dim}), Ui({hidden, hidden}), bi({hidden}),
      Wo({hidden, input_dim}), Uo({hidden, hidden}), bo({hidden}),
      Wc({hidden, input_dim}), Uc({hidden, hidden}), bc({hidden}),
      gWg({hidden, input_dim}), gUg({hidden, hidden}), gbg({hidden}),
      gWi({hidden, input_dim}), gUi({hidden, hidden}), gbi({hidden}),
      gWo({hidden, input_dim}), gUo({hidden, hidden}), gbo({hidden}),
      gWc({hidden, input_dim}), gUc({hidden, hidden}), gbc({hidden}),
      steps_(steps), input_dim_(input_dim), hidden_(hidden) {
    if (steps < 1) throw ConfigError("lstm '" + this->name() + "': steps must be >= 1");
    (void)count_lstm_params(input_dim, hidden);  // validates dims
    for (Tensor* w : {&Wg, &Wi, &Wo, &Wc}) glorot_init(*w, input_dim, hidden, init_rng);
    for (Tensor* u : {&Ug, &Ui, &Uo, &Uc}) glorot_init(*u, hidden, hidden, init_rng);
    // biases stay zero
}

std::pair<Tensor, Tensor> LstmLayer::step(const Tensor& z_t, const Tensor& h_prev,
                                          const Tensor& c_prev) const {
    if (z_t.size() != input_dim_ || h_prev.size() != hidden_ || c_prev.size() != hidden_) {
        throw DimensionError("lstm '" + name() + "': step shapes z=" + shape_str(z_t.shape()) +
                             " h=" + shape_str(h_prev.shape()) + " c=" +
                             shape_str(c_prev.shape()) + " vs (d=" + std::to_string(input_dim_) +
                             ", h=" + std::to_string(hidden_) + ")");
    }
    Tensor ag = bg, ai = bi, ao = bo, ac = bc;
    matvec_acc(Wg, z_t, ag); matvec_acc(Ug, h_prev, ag);
    matvec_acc(Wi, z_t, ai); matvec_acc(Ui, h_prev, ai);
    matvec_acc(Wo, z_t, ao); matvec_acc(Uo, h_prev, ao);
    matvec_acc(Wc, z_t, ac); matvec_acc(Uc, h_prev, ac);
    Tensor c_t({hidden_}), h_t({hidden_});
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double g = sigmoid(ag[j]);
        const double i = sigmoid(ai[j]);
        const double o = sigmoid(ao[j]);
        const double u = std::tanh(ac[j]);
        c_t[j] = g * c_prev[j] + i * u;
        h_t[j] = o * std::tanh(c_t[j]);
    }
    return {std::move(h_t), std::move(c_t)};
}

Tensor LstmLayer::forward(const Tensor& sequence, bool /*train*/, std::mt19937_64* /*rng*/) {
    if (sequence.rank() != 2 || sequence.extent(0) != steps_ || sequence.extent(1) != input_dim_) {
        throw DimensionError("lstm '" + name() + "': expected [" + std::to_string(steps_) + "x" +
                             std::to_string(input_dim_) + "] sequence, got " +
                             shape_str(sequence.shape()));
    }
    Cache cache;
    cache.steps.reserve(steps_);
    Tensor h({hidden_}), c({hidden_});
    for (std::size_t t = 0; t < steps_; ++t) {
        Tensor z({input_dim_});
        for (std::size_t j = 0; j < input_dim_; ++j) z[j] = sequence[t * input_dim_ + j];

        Tensor ag = bg, ai = bi, ao = bo, ac = bc;
        matvec_acc(Wg, z, ag); matvec_acc(Ug, h, ag);
        matvec_acc(Wi, z, ai); matvec_acc(Ui, h, ai);
        matvec_acc(Wo, z, ao); matvec_acc(Uo, h, ao);
        matvec_acc(Wc, z, ac); matvec_acc(Uc, h, ac);

        StepCache sc;
        sc.z = std::move(z);
        sc.h_prev = h;
        sc.c_prev = c;
        sc.g = Tensor({hidden_}); sc.i = Tensor({hidden_});
        sc.o = Tensor({hidden_}); sc.u = Tensor({hidden_});
        sc.c = Tensor({hidden_}); sc.tanh_c = Tensor({hidden_});
        for (std::size_t j = 0; j < hidden_; ++j) {
            sc.g[j] = sigmoid(ag[j]);
            sc.i[j] = sigmoid(ai[j]);
            sc.o[j] = sigmoid(ao[j]);
            sc.u[j] = std::tanh(ac[j]);
            sc.c[j] = sc.g[j] * c[j] + sc.i[j] * sc.u[j];
            sc.tanh_c[j] = std::tanh(sc.c[j]);
        }
        c = sc.c;
        for (std::size_t j = 0; j < hidden_; ++j) h[j] = sc.o[j] * sc.tanh_c[j];
        cache.steps.push_back(std::move(sc));
    }
    cache_.push_back(std::move(cache));
    return h;
}

Tensor LstmLayer::backward(const Tensor& grad_out) {
    if (cache_.empty()) {
        throw StateError("lstm '" + name() + "': backward without cached forward");
    }
    Cache cache = std::move(cache_.back());
    cache_.pop_back();
    if (grad_out.size() != hidden_) {
        throw DimensionError("lstm '" + name() + "': grad on h_T has shape " +
                             shape_str(grad_out.shape()) + ", expected [" +
                             std::to_string(hidden_) + "]");
    }
    Tensor grad_seq({steps_, input_dim_});
    Tensor dh = grad_out;
    Tensor dc({hidden_});
    for (std::size_t t = steps_; t-- > 0;) {
        const StepCache& sc = cache.steps[t];
        Tensor dag({hidden_}), dai({hidden_}), dao({hidden_}), dac({hidden_});
        Tensor dc_prev({hidden_});
        for (std::size_t j = 0; j < hidden_; ++j) {
            const double o = sc.o[j];
            dao[j] = dh[j] * sc.tanh_c[j] * o * (1.0 - o);
            const double dcj = dc[j] + dh[j] * o * (1.0 - sc.tanh_c[j] * sc.tanh_c[j]);
            const double g = sc.g[j], i = sc.i[j], u = sc.u[j];
            dag[j] = dcj * sc.c_prev[j] * g * (1.0 - g);
            dai[j] = dcj * u * i * (1.0 - i);
            dac[j] = dcj * i * (1.0 - u * u);
            dc_prev[j] = dcj * g;
        }
        Tensor dz({input_dim_});
        Tensor dh_prev({hidden_});
        branch_backward(dag, sc.z, sc.h_prev, Wg, Ug, gWg, gUg, gbg, dz, dh_prev);
        branch_backward(dai, sc.z, sc.h_prev, Wi, Ui, gWi, gUi, gbi, dz, dh_prev);
        branch_backward(dao, sc.z, sc.h_prev, Wo, Uo, gWo, gUo, gbo, dz, dh_prev);
        branch_backward(dac, sc.z, sc.h_prev, Wc, Uc, gWc, gUc, gbc, dz, dh_prev);
        for (std::size_t j = 0; j < input_dim_; ++j) grad_seq[t * input_dim_ + j] = dz[j];
        dh = std::move(dh_prev);
        dc = std::move(dc_prev);
    }
    return grad_seq;
}

void LstmLayer::collect_params(std::vector<ParamRef>& out) {
    const std::string& n = name();
    out.push_back({n + ".g.W", &Wg, &gWg});
    out.push_back({n + ".g.U", &Ug, &gUg});
    out.push_back({n + ".g.b", &bg, &gbg});
    out.push_back({n + ".i.W", &Wi, &gWi});
    out.push_back({n + ".i.U", &Ui, &gUi});
    out.push_back({n + ".i.b", &bi, &gbi});
    out.push_back({n + ".o.W", &Wo, &gWo});
    out.push_back({n + ".o.U", &Uo, &gUo});
    out.push_back({n + ".o.b", &bo, &gbo});
    out.push_back({n + ".c.W", &Wc, &gWc});
    out.push_back({n + ".c.U", &Uc, &gUc});
    out.push_back({n + ".c.b", &bc, &gbc});
}

void LstmLayer::clear_cache() { cache_.clear(); }

}  // namespace lanerisk

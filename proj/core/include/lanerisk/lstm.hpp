#pragma once

#include <utility>

#include "lanerisk/layers.hpp"

namespace lanerisk {

/// Many-to-one LSTM layer: forward consumes a [q x d] sequence and
/// returns the final hidden vector h_T; backward runs exact BPTT from
/// a gradient on h_T back through all q steps.
///
/// Gates: g (forget), i (input), o (output), plus the candidate branch c.
/// Per step, with u = tanh(W_c z + U_c h_prev + b_c):
///   g,i,o = sigmoid(W z + U h_prev + b)      (their own parameter sets)
///   c_t   = g o c_prev + i o u
///   h_t   = o o tanh(c_t)
class LstmLayer : public Layer {
public:
    LstmLayer(std::string name, std::size_t steps, std::size_t input_dim, std::size_t hidden,
              std::mt19937_64& init_rng);

    /// Single recurrence step; does not touch the BPTT cache.
    std::pair<Tensor, Tensor> step(const Tensor& z_t, const Tensor& h_prev,
                                   const Tensor& c_prev) const;

    /// sequence: [q x d], initial states h0 = c0 = 0. Returns h_T.
    Tensor forward(const Tensor& sequence, bool train, std::mt19937_64* rng) override;

    /// grad_out: gradient on h_T. Returns the [q x d] sequence gradient.
    Tensor backward(const Tensor& grad_out) override;

    void collect_params(std::vector<ParamRef>& out) override;
    void clear_cache() override;

    std::size_t steps() const { return steps_; }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t hidden() const { return hidden_; }

    // W_*: [h x d], U_*: [h x h], b_*: [h]
    Tensor Wg, Ug, bg;
    Tensor Wi, Ui, bi;
    Tensor Wo, Uo, bo;
    Tensor Wc, Uc, bc;
    Tensor gWg, gUg, gbg, gWi, gUi, gbi, gWo, gUo, gbo, gWc, gUc, gbc;

private:
    struct StepCache {
        Tensor z, h_prev, c_prev;
        Tensor g, i, o, u;  // gate activations and tanh candidate
        Tensor c, tanh_c;
    };
    struct Cache {
        std::vector<StepCache> steps;
    };

    std::size_t steps_, input_dim_, hidden_;
    std::vector<Cache> cache_;
};

/// Trainable parameter count of an LSTM layer: 4*(d*h + h*h + h).
std::size_t count_lstm_params(std::size_t input_dim, std::size_t hidden);

}  // namespace lanerisk

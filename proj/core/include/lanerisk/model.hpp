#pragma once

#include <filesystem>
#include <memory>

#include "lanerisk/layers.hpp"
#include "lanerisk/lstm.hpp"

namespace lanerisk {

/// A classifier assembled from layers, ending in a 2-way softmax.
///
/// forward returns class probabilities; backward takes the gradient on
/// the *logits* (with categorical cross-entropy that is probs - target).
class Model {
public:
    virtual ~Model() = default;

    /// Frame-level models take one frame (or feature vector); sequence
    /// models take the whole [T x ...] clip tensor.
    virtual Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) = 0;
    virtual void backward(const Tensor& grad_logits) = 0;
    virtual void collect_params(std::vector<ParamRef>& out) = 0;
    virtual void clear_caches() = 0;

    /// True for FbF/FT-Softmax families, which classify frames independently.
    virtual bool frame_level() const = 0;

    void zero_grads();
    std::size_t param_count();

    /// Checkpoint: named raw tensor records (u32 name length, UTF-8 name,
    /// TNSR blob) in declared layer order.
    void save_checkpoint(const std::filesystem::path& path);
    void load_checkpoint(const std::filesystem::path& path);
};

/// Per-frame classifier: a plain layer stack whose last layer emits logits.
class FrameModel : public Model {
public:
    explicit FrameModel(std::vector<std::unique_ptr<Layer>> layers);

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    void backward(const Tensor& grad_logits) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void clear_caches() override;
    bool frame_level() const override { return true; }

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Sequence classifier: a (possibly empty) per-frame trunk applied with
/// shared weights to each of the q frames, an LSTM over the resulting
/// feature sequence, and a logits head on h_T.
class SeqModel : public Model {
public:
    SeqModel(std::vector<std::unique_ptr<Layer>> trunk, std::unique_ptr<LstmLayer> lstm,
             std::unique_ptr<Dense> head);

    Tensor forward(const Tensor& x, bool train, std::mt19937_64* rng) override;
    void backward(const Tensor& grad_logits) override;
    void collect_params(std::vector<ParamRef>& out) override;
    void clear_caches() override;
    bool frame_level() const override { return false; }

    std::size_t steps() const { return lstm_->steps(); }

private:
    std::vector<std::unique_ptr<Layer>> trunk_;
    std::unique_ptr<LstmLayer> lstm_;
    std::unique_ptr<Dense> head_;
};

/// View of one frame: drops the leading axis of a [T x ...] tensor.
Tensor slice_frame(const Tensor& x, std::size_t t);

}  // namespace lanerisk

#pragma once

#include <filesystem>
#include <vector>

#include "lanerisk/model.hpp"
#include "lanerisk/sample.hpp"

namespace lanerisk {

struct AdamConfig {
    double lr = 0.0001;
    double decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-parameter Adam state. The effective rate at step t (t counted
/// from 0 before the update) is lr/(1 + decay*t); bias correction uses
/// the post-increment step number t+1.
class AdamState {
public:
    void update(Tensor& param, const Tensor& grad, const AdamConfig& cfg);
    std::size_t step_count() const { return t_; }

private:
    Tensor m_, v_;
    std::size_t t_ = 0;
    bool initialized_ = false;
};

/// Categorical cross-entropy; probs clamped to [1e-12, 1] before log.
double cross_entropy(const Tensor& probs, const Tensor& target);

/// Frame-by-frame training replicates the clip label to every frame.
std::vector<Tensor> replicate_frame_labels(const Tensor& clip_label, std::size_t frames);

struct TrainConfig {
    std::size_t batch = 32;
    std::size_t epochs = 1000;
    double split = 0.9;
    std::uint64_t seed = 0;
    AdamConfig adam;

    void validate() const;
};

struct EpochStats {
    double train_loss;
    double val_loss;  // NaN when the validation split is empty
};

/// Supervised training: seeded stratified shuffle-split at `split`,
/// mini-batches with batch-averaged gradients, Adam updates, dropout in
/// train mode during fitting and infer mode during validation.
/// Frame-level models see each clip expanded into per-frame samples with
/// the replicated label. Deterministic given (seed, data, config).
std::vector<EpochStats> train(Model& model, const std::vector<Sample>& samples,
                              const TrainConfig& config);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

}  // namespace lanerisk

#pragma once

#include <memory>
#include <string>

#include "lanerisk/model.hpp"

namespace lanerisk {

enum class Family { FbfCnn, CnnLstm, FtSoftmax, FtLstm };
enum class InputMode { Raw, Masked, Features };

std::string family_name(Family f);
std::string input_mode_name(InputMode m);
Family parse_family(const std::string& s);
InputMode parse_input_mode(const std::string& s);

/// Everything needed to instantiate one architecture family.
/// frames is T, the subsampled clip length (FbF families classify each
/// frame independently and use T only for evaluation aggregation).
struct ModelSpec {
    Family family = Family::CnnLstm;
    InputMode input = InputMode::Raw;
    std::size_t frames = 10;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t feature_dim = 0;  // features mode only

    void validate() const;
    std::string describe() const;  // e.g. "cnn-lstm" for reports
};

/// C(64,5,1) -> P -> C(32,5,1) -> P -> FC(1000) -> Softmax(2),
/// per-frame classification with the clip label replicated.
std::unique_ptr<Model> build_fbf_cnn(std::size_t height, std::size_t width, std::uint64_t seed);

/// C(16,3,1) -> C(16,3,1) -> P -> D(0.2) -> FC(200) -> FC(50) -> z_j
/// -> LSTM(q,20) -> Softmax(2), trunk time-distributed with shared weights.
std::unique_ptr<Model> build_cnn_lstm(std::size_t height, std::size_t width, std::size_t q,
                                      std::uint64_t seed);

/// Single dense-softmax(2) over externally computed features z_j.
std::unique_ptr<Model> build_ft_softmax(std::size_t feature_dim, std::uint64_t seed);

/// LSTM(q,20) over the feature sequence, then dense-softmax(2).
std::unique_ptr<Model> build_ft_lstm(std::size_t feature_dim, std::size_t q, std::uint64_t seed);

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed);

/// Clip-level risk score in [0,1]: the softmax probability of the risky
/// class; frame-level models average the per-frame risky probabilities.
double predict_clip(Model& model, const Tensor& clip_x);

/// Sum of element counts over all trainable tensors.
std::size_t count_params(Model& model);

}  // namespace lanerisk

#include "lanerisk/architectures.hpp"

namespace lanerisk {

std::string family_name(Family f) {
    switch (f) {
        case Family::FbfCnn: return "fbf-cnn";
        case Family::CnnLstm: return "cnn-lstm";
        case Family::FtSoftmax: return "ft-softmax";
        case Family::FtLstm: return "ft-lstm";
    }
    return "?";
}

std::string input_mode_name(InputMode m) {
    switch (m) {
        case InputMode::Raw: return "raw";
        case InputMode::Masked: return "masked";
        case InputMode::Features: return "features";
    }
    return "?";
}

Family parse_family(const std::string& s) {
    if (s == "fbf-cnn") return Family::FbfCnn;
    if (s == "cnn-lstm") return Family::CnnLstm;
    if (s == "ft-softmax") return Family::FtSoftmax;
    if (s == "ft-lstm") return Family::FtLstm;
    throw ConfigError("unknown architecture '" + s +
                      "' (expected fbf-cnn, cnn-lstm, ft-softmax or ft-lstm)");
}

InputMode parse_input_mode(const std::string& s) {
    if (s == "raw") return InputMode::Raw;
    if (s == "masked") return InputMode::Masked;
    if (s == "features") return InputMode::Features;
    throw ConfigError("unknown input mode '" + s + "' (expected raw, masked or features)");
}

void ModelSpec::validate() const {
    const bool ft = family == Family::FtSoftmax || family == Family::FtLstm;
    if (ft && input != InputMode::Features) {
        throw ConfigError("feature-transfer families require input mode 'features'");
    }
    if (!ft && input == InputMode::Features) {
        throw ConfigError("from-scratch families take raw or masked input, not features");
    }
    if (input == InputMode::Features && feature_dim < 1) {
        throw ConfigError("features mode needs feature_dim >= 1");
    }
    if (frames < 1) throw ConfigError("frames per clip must be >= 1");
    if (family == Family::FbfCnn && (height % 4 != 0 || width % 4 != 0)) {
        throw ConfigError("fbf-cnn needs resolution divisible by 4 (two 2x pools), got " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
    if (family == Family::CnnLstm && (height % 2 != 0 || width % 2 != 0)) {
        throw ConfigError("cnn-lstm needs resolution divisible by 2, got " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
}

std::string ModelSpec::describe() const { return family_name(family); }

std::unique_ptr<Model> build_fbf_cnn(std::size_t height, std::size_t width, std::uint64_t seed) {
    if (height % 4 != 0 || width % 4 != 0) {
        throw ConfigError("fbf-cnn needs resolution divisible by 4, got " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
    std::mt19937_64 rng(seed);
    std::vector<std::unique_ptr<Layer>> layers;
    layers.push_back(std::make_unique<Conv2D>("conv1", 3, 64, 5, 1, rng));
    layers.push_back(std::make_unique<MaxPool>("pool1"));
    layers.push_back(std::make_unique<Conv2D>("conv2", 64, 32, 5, 1, rng));
    layers.push_back(std::make_unique<MaxPool>("pool2"));
    const std::size_t flat = (height / 4) * (width / 4) * 32;
    layers.push_back(std::make_unique<Dense>("fc1", flat, 1000, Activation::Sigmoid, rng));
    layers.push_back(std::make_unique<Dense>("logits", 1000, 2, Activation::Identity, rng));
    return std::make_unique<FrameModel>(std::move(layers));
}

std::unique_ptr<Model> build_cnn_lstm(std::size_t height, std::size_t width, std::size_t q,
                                      std::uint64_t seed) {
    if (height % 2 != 0 || width % 2 != 0) {
        throw ConfigError("cnn-lstm needs resolution divisible by 2, got " +
                          std::to_string(height) + "x" + std::to_string(width));
    }
    if (q < 1) throw ConfigError("cnn-lstm needs q >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::unique_ptr<Layer>> trunk;
    trunk.push_back(std::make_unique<Conv2D>("conv1", 3, 16, 3, 1, rng));
    trunk.push_back(std::make_unique<Conv2D>("conv2", 16, 16, 3, 1, rng));
    trunk.push_back(std::make_unique<MaxPool>("pool"));
    trunk.push_back(std::make_unique<Dropout>("drop", 0.2));
    const std::size_t flat = (height / 2) * (width / 2) * 16;
    trunk.push_back(std::make_unique<Dense>("fc1", flat, 200, Activation::Sigmoid, rng));
    trunk.push_back(std::make_unique<Dense>("fc2", 200, 50, Activation::Sigmoid, rng));
    auto lstm = std::make_unique<LstmLayer>("lstm", q, 50, 20, rng);
    auto head = std::make_unique<Dense>("logits", 20, 2, Activation::Identity, rng);
    return std::make_unique<SeqModel>(std::move(trunk), std::move(lstm), std::move(head));
}

std::unique_ptr<Model> build_ft_softmax(std::size_t feature_dim, std::uint64_t seed) {
    if (feature_dim < 1) throw ConfigError("ft-softmax needs feature_dim >= 1");
    std::mt19937_64 rng(seed);
    std::vector<std::unique_ptr<Layer>> layers;
    layers.push_back(std::make_unique<Dense>("logits", feature_dim, 2, Activation::Identity, rng));
    return std::make_unique<FrameModel>(std::move(layers));
}

std::unique_ptr<Model> build_ft_lstm(std::size_t feature_dim, std::size_t q, std::uint64_t seed) {
    if (feature_dim < 1) throw ConfigError("ft-lstm needs feature_dim >= 1");
    if (q < 1) throw ConfigError("ft-lstm needs q >= 1");
    std::mt19937_64 rng(seed);
    auto lstm = std::make_unique<LstmLayer>("lstm", q, feature_dim, 20, rng);
    auto head = std::make_unique<Dense>("logits", 20, 2, Activation::Identity, rng);
    return std::make_unique<SeqModel>(std::vector<std::unique_ptr<Layer>>{}, std::move(lstm),
                                      std::move(head));
}

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    switch (spec.family) {
        case Family::FbfCnn:
            return build_fbf_cnn(spec.height, spec.width, seed);
        case Family::CnnLstm:
            return build_cnn_lstm(spec.height, spec.width, spec.frames, seed);
        case Family::FtSoftmax:
            return build_ft_softmax(spec.feature_dim, seed);
        case Family::FtLstm:
            return build_ft_lstm(spec.feature_dim, spec.frames, seed);
    }
    throw ConfigError("unknown architecture family");
}

double predict_clip(Model& model, const Tensor& clip_x) {
    if (clip_x.rank() < 2) {
        throw DimensionError("predict_clip: expected [T x ...] input, got " +
                             shape_str(clip_x.shape()));
    }
    if (model.frame_level()) {
        const std::size_t T = clip_x.extent(0);
        double sum = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            Tensor probs = model.forward(slice_frame(clip_x, t), false, nullptr);
            sum += probs[1];
        }
        model.clear_caches();
        return sum / static_cast<double>(T);
    }
    Tensor probs = model.forward(clip_x, false, nullptr);
    model.clear_caches();
    return probs[1];
}

std::size_t count_params(Model& model) { return model.param_count(); }

}  // namespace lanerisk

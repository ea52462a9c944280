#include "lanerisk/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

namespace lanerisk {

void AdamState::update(Tensor& param, const Tensor& grad, const AdamConfig& cfg) {
    if (!param.same_shape(grad)) {
        throw DimensionError("adam: param " + shape_str(param.shape()) + " vs grad " +
                             shape_str(grad.shape()));
    }
    if (!initialized_) {
        m_ = Tensor(param.shape());
        v_ = Tensor(param.shape());
        initialized_ = true;
    } else if (!m_.same_shape(param)) {
        throw DimensionError("adam: state shape " + shape_str(m_.shape()) +
                             " vs param " + shape_str(param.shape()));
    }
    const double lr_t = cfg.lr / (1.0 + cfg.decay * static_cast<double>(t_));
    const std::size_t step = t_ + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
        m_[i] = cfg.beta1 * m_[i] + (1.0 - cfg.beta1) * grad[i];
        v_[i] = cfg.beta2 * v_[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        param[i] -= lr_t * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    ++t_;
}

double cross_entropy(const Tensor& probs, const Tensor& target) {
    if (!probs.same_shape(target)) {
        throw DimensionError("cross_entropy: probs " + shape_str(probs.shape()) + " vs target " +
                             shape_str(target.shape()));
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], 1e-12, 1.0);
        loss -= target[i] * std::log(p);
    }
    return loss;
}

std::vector<Tensor> replicate_frame_labels(const Tensor& clip_label, std::size_t frames) {
    return std::vector<Tensor>(frames, clip_label);
}

void TrainConfig::validate() const {
    if (batch < 1) throw ConfigError("batch size must be >= 1");
    if (split <= 0.0 || split >= 1.0) throw ConfigError("split ratio must be in (0,1)");
}

namespace {

// Expand [T x ...] clip samples into independent per-frame samples for
// frame-level models, carrying the replicated clip label.
std::vector<Sample> expand_frames(const std::vector<Sample>& samples) {
    std::vector<Sample> out;
    for (const auto& s : samples) {
        const std::size_t T = s.x.extent(0);
        const auto labels = replicate_frame_labels(s.y, T);
        for (std::size_t t = 0; t < T; ++t) {
            out.push_back(Sample{slice_frame(s.x, t), labels[t], s.clip_id});
        }
    }
    return out;
}

}  // namespace

std::vector<EpochStats> train(Model& model, const std::vector<Sample>& samples,
                              const TrainConfig& config) {
    config.validate();
    if (samples.size() < 2) throw ConfigError("training needs at least 2 samples");

    std::vector<Sample> pool =
        model.frame_level() ? expand_frames(samples) : samples;

    std::mt19937_64 rng(config.seed);

    // Stratified shuffle-split so both classes appear on both sides.
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        (pool[i].risky() ? pos : neg).push_back(i);
    }
    if (pos.empty() || neg.empty()) {
        throw ConfigError("training split would be single-class: " + std::to_string(pos.size()) +
                          " risky vs " + std::to_string(neg.size()) + " safe samples");
    }
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    std::vector<std::size_t> train_idx, val_idx;
    for (const auto* cls : {&pos, &neg}) {
        const std::size_t n = cls->size();
        std::size_t keep = static_cast<std::size_t>(std::floor(config.split * static_cast<double>(n) + 1e-9));
        keep = std::max<std::size_t>(keep, 1);
        for (std::size_t i = 0; i < n; ++i) {
            (i < keep ? train_idx : val_idx).push_back((*cls)[i]);
        }
    }

    std::vector<ParamRef> params;
    model.collect_params(params);
    std::vector<AdamState> opt(params.size());

    std::vector<EpochStats> history;
    history.reserve(config.epochs);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double train_loss = 0.0;
        for (std::size_t start = 0; start < train_idx.size(); start += config.batch) {
            const std::size_t end = std::min(start + config.batch, train_idx.size());
            const double inv_n = 1.0 / static_cast<double>(end - start);
            model.zero_grads();
            for (std::size_t b = start; b < end; ++b) {
                const Sample& s = pool[train_idx[b]];
                Tensor probs = model.forward(s.x, true, &rng);
                train_loss += cross_entropy(probs, s.y);
                Tensor grad_logits = elementwise(Elementwise::Sub, probs, s.y);
                for (std::size_t i = 0; i < grad_logits.size(); ++i) grad_logits[i] *= inv_n;
                model.backward(grad_logits);
            }
            for (std::size_t p = 0; p < params.size(); ++p) {
                opt[p].update(*params[p].value, *params[p].grad, config.adam);
            }
        }
        train_loss /= static_cast<double>(train_idx.size());

        double val_loss = std::numeric_limits<double>::quiet_NaN();
        if (!val_idx.empty()) {
            val_loss = 0.0;
            for (std::size_t i : val_idx) {
                const Sample& s = pool[i];
                Tensor probs = model.forward(s.x, false, nullptr);
                val_loss += cross_entropy(probs, s.y);
            }
            val_loss /= static_cast<double>(val_idx.size());
            model.clear_caches();
        }
        history.push_back(EpochStats{train_loss, val_loss});
    }
    return history;
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open history csv for writing: " + path.string());
    os << "epoch,train_loss,val_loss\n";
    char buf[96];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", e + 1, history[e].train_loss,
                      history[e].val_loss);
        os << buf;
    }
    if (!os) throw IoError("history csv write failed: " + path.string());
}

}  // namespace lanerisk

#include "lanerisk/model.hpp"

#include <cstdint>
#include <fstream>

#include "lanerisk/tensor_io.hpp"

namespace lanerisk {

void Model::zero_grads() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (auto& r : refs) r.grad->fill(0.0);
}

std::size_t Model::param_count() {
    std::vector<ParamRef> refs;
    collect_params(refs);
    std::size_t n = 0;
    for (auto& r : refs) n += r.value->size();
    return n;
}

void Model::save_checkpoint(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (auto& r : refs) {
        const std::uint32_t len = static_cast<std::uint32_t>(r.name.size());
        unsigned char buf[4] = {static_cast<unsigned char>(len & 0xff),
                                static_cast<unsigned char>((len >> 8) & 0xff),
                                static_cast<unsigned char>((len >> 16) & 0xff),
                                static_cast<unsigned char>((len >> 24) & 0xff)};
        os.write(reinterpret_cast<const char*>(buf), 4);
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        write_tensor(os, *r.value);
    }
    if (!os) throw IoError("checkpoint write failed: " + path.string());
}

void Model::load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint for reading: " + path.string());
    std::vector<ParamRef> refs;
    collect_params(refs);
    for (auto& r : refs) {
        unsigned char buf[4];
        if (!is.read(reinterpret_cast<char*>(buf), 4)) {
            throw FormatError("checkpoint truncated before record '" + r.name + "'");
        }
        const std::uint32_t len = static_cast<std::uint32_t>(buf[0]) |
                                  (static_cast<std::uint32_t>(buf[1]) << 8) |
                                  (static_cast<std::uint32_t>(buf[2]) << 16) |
                                  (static_cast<std::uint32_t>(buf[3]) << 24);
        std::string name(len, '\0');
        if (!is.read(name.data(), len)) {
            throw FormatError("checkpoint truncated in name of record '" + r.name + "'");
        }
        if (name != r.name) {
            throw FormatError("checkpoint record '" + name + "' does not match expected '" +
                              r.name + "'");
        }
        Tensor t = read_tensor(is);
        if (!t.same_shape(*r.value)) {
            throw FormatError("checkpoint record '" + name + "' has shape " +
                              shape_str(t.shape()) + ", expected " +
                              shape_str(r.value->shape()));
        }
        *r.value = std::move(t);
    }
}

Tensor slice_frame(const Tensor& x, std::size_t t) {
    if (x.rank() < 2) {
        throw DimensionError("slice_frame: need rank >= 2, got " + shape_str(x.shape()));
    }
    const std::size_t T = x.extent(0);
    if (t >= T) {
        throw DimensionError("slice_frame: index " + std::to_string(t) + " out of " +
                             std::to_string(T));
    }
    std::vector<std::size_t> fshape(x.shape().begin() + 1, x.shape().end());
    std::size_t stride = 1;
    for (std::size_t e : fshape) stride *= e;
    std::vector<double> data(x.data() + t * stride, x.data() + (t + 1) * stride);
    return Tensor(std::move(fshape), std::move(data));
}

FrameModel::FrameModel(std::vector<std::unique_ptr<Layer>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("model needs at least one layer");
}

Tensor FrameModel::forward(const Tensor& x, bool train, std::mt19937_64* rng) {
    Tensor v = x;
    for (auto& l : layers_) v = l->forward(v, train, rng);
    return softmax(v);
}

void FrameModel::backward(const Tensor& grad_logits) {
    Tensor g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
}

void FrameModel::collect_params(std::vector<ParamRef>& out) {
    for (auto& l : layers_) l->collect_params(out);
}

void FrameModel::clear_caches() {
    for (auto& l : layers_) l->clear_cache();
}

SeqModel::SeqModel(std::vector<std::unique_ptr<Layer>> trunk, std::unique_ptr<LstmLayer> lstm,
                   std::unique_ptr<Dense> head)
    : trunk_(std::move(trunk)), lstm_(std::move(lstm)), head_(std::move(head)) {}

Tensor SeqModel::forward(const Tensor& x, bool train, std::mt19937_64* rng) {
    const std::size_t q = lstm_->steps();
    if (x.rank() < 2 || x.extent(0) != q) {
        throw DimensionError("sequence model: expected " + std::to_string(q) + " frames, got " +
                             shape_str(x.shape()));
    }
    Tensor z_seq({q, lstm_->input_dim()});
    for (std::size_t t = 0; t < q; ++t) {
        Tensor v = slice_frame(x, t);
        for (auto& l : trunk_) v = l->forward(v, train, rng);
        if (v.size() != lstm_->input_dim()) {
            throw DimensionError("trunk output " + shape_str(v.shape()) +
                                 " does not match LSTM input dim " +
                                 std::to_string(lstm_->input_dim()));
        }
        for (std::size_t j = 0; j < v.size(); ++j) z_seq[t * v.size() + j] = v[j];
    }
    Tensor h_T = lstm_->forward(z_seq, train, rng);
    Tensor logits = head_->forward(h_T, train, rng);
    return softmax(logits);
}

void SeqModel::backward(const Tensor& grad_logits) {
    Tensor grad_hT = head_->backward(grad_logits);
    Tensor grad_seq = lstm_->backward(grad_hT);
    // trunk caches were pushed for t = 0..q-1; pop them in reverse
    const std::size_t q = lstm_->steps();
    const std::size_t d = lstm_->input_dim();
    for (std::size_t t = q; t-- > 0;) {
        Tensor g({d});
        for (std::size_t j = 0; j < d; ++j) g[j] = grad_seq[t * d + j];
        for (auto it = trunk_.rbegin(); it != trunk_.rend(); ++it) g = (*it)->backward(g);
    }
}

void SeqModel::collect_params(std::vector<ParamRef>& out) {
    for (auto& l : trunk_) l->collect_params(out);
    lstm_->collect_params(out);
    head_->collect_params(out);
}

void SeqModel::clear_caches() {
    for (auto& l : trunk_) l->clear_cache();
    lstm_->clear_cache();
    head_->clear_cache();
}

}  // namespace lanerisk

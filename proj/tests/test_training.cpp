#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include <limits>

#include "lanerisk/architectures.hpp"
#include "lanerisk/datapipe.hpp"
#include "lanerisk/training.hpp"
#include "testutil.hpp"

using namespace lanerisk;
using testutil::random_tensor;

namespace {

// Linearly separable feature clips: safe clips live around -1, risky
// clips around +1, with a margin that keeps every draw on its own side.
std::vector<Sample> toy_samples(std::size_t n_per_class, std::size_t frames, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::vector<Sample> out;
    for (std::size_t c = 0; c < 2; ++c) {
        const double center = c == 0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n_per_class; ++i) {
            Tensor x({frames, 2});
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = center + jitter(rng);
            out.push_back(Sample{x, one_hot(c == 1),
                                 (c == 1 ? "r" : "s") + std::to_string(i)});
        }
    }
    return out;
}

}  // namespace

TEST_CASE("adam matches a scalar reference implementation") {
    AdamConfig cfg;
    cfg.lr = 0.01;
    cfg.decay = 0.1;
    AdamState state;
    Tensor p({1}, {1.0});
    const std::vector<double> grads{1.0, -0.5, 2.0, 0.25, -1.5};

    double ref = 1.0, m = 0.0, v = 0.0;
    for (std::size_t t = 0; t < grads.size(); ++t) {
        Tensor g({1}, {grads[t]});
        state.update(p, g, cfg);

        const double lr_t = cfg.lr / (1.0 + cfg.decay * static_cast<double>(t));
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grads[t];
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grads[t] * grads[t];
        const double mhat = m / (1.0 - std::pow(cfg.beta1, static_cast<double>(t + 1)));
        const double vhat = v / (1.0 - std::pow(cfg.beta2, static_cast<double>(t + 1)));
        ref -= lr_t * mhat / (std::sqrt(vhat) + cfg.eps);

        CHECK(p[0] == doctest::Approx(ref).epsilon(1e-15));
        CHECK(state.step_count() == t + 1);
    }
}

TEST_CASE("adam first step magnitude is about lr, independent of grad scale") {
    AdamConfig cfg;
    cfg.lr = 0.001;
    cfg.decay = 0.0;
    for (double scale : {1e-3, 1.0, 1e3}) {
        AdamState state;
        Tensor p({1}, {0.0});
        Tensor g({1}, {scale});
        state.update(p, g, cfg);
        CHECK(p[0] == doctest::Approx(-cfg.lr).epsilon(1e-4));
    }
}

TEST_CASE("adam rejects mismatched shapes") {
    AdamState state;
    Tensor p({2}), g({3});
    CHECK_THROWS_AS(state.update(p, g, AdamConfig{}), DimensionError);
}

TEST_CASE("cross entropy") {
    Tensor p({2}, {0.25, 0.75});
    CHECK(cross_entropy(p, one_hot(true)) == doctest::Approx(-std::log(0.75)).epsilon(1e-15));
    CHECK(cross_entropy(p, one_hot(false)) == doctest::Approx(-std::log(0.25)).epsilon(1e-15));
    Tensor degenerate({2}, {1.0, 0.0});
    const double clamped = cross_entropy(degenerate, one_hot(true));
    CHECK(std::isfinite(clamped));
    CHECK(clamped == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("frame label replication") {
    auto labels = replicate_frame_labels(one_hot(true), 4);
    CHECK(labels.size() == 4);
    for (const auto& l : labels) {
        CHECK(l[0] == 0.0);
        CHECK(l[1] == 1.0);
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.batch = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.batch = 8;
    cfg.split = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.split = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training refuses single-class data") {
    auto samples = toy_samples(4, 3, 1);
    samples.resize(4);  // only safe clips remain
    auto model = build_ft_softmax(2, 0);
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(*model, samples, cfg), ConfigError);
}

TEST_CASE("training is deterministic in the seed") {
    const auto samples = toy_samples(8, 3, 2);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch = 4;
    cfg.seed = 42;
    cfg.adam.lr = 0.001;

    auto m1 = build_ft_softmax(2, 7);
    auto m2 = build_ft_softmax(2, 7);
    const auto h1 = train(*m1, samples, cfg);
    const auto h2 = train(*m2, samples, cfg);
    REQUIRE(h1.size() == h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) {
        CHECK(h1[i].train_loss == h2[i].train_loss);
        CHECK(h1[i].val_loss == h2[i].val_loss);
    }
    for (const auto& s : samples) {
        CHECK(predict_clip(*m1, s.x) == predict_clip(*m2, s.x));
    }

    auto m3 = build_ft_softmax(2, 7);
    cfg.seed = 43;
    const auto h3 = train(*m3, samples, cfg);
    bool any_differs = false;
    for (std::size_t i = 0; i < h1.size(); ++i) {
        any_differs = any_differs || h1[i].train_loss != h3[i].train_loss;
    }
    CHECK(any_differs);
}

TEST_CASE("zero epochs leaves the model at initialization") {
    const auto samples = toy_samples(4, 3, 3);
    auto m1 = build_ft_softmax(2, 9);
    auto m2 = build_ft_softmax(2, 9);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto history = train(*m1, samples, cfg);
    CHECK(history.empty());
    for (const auto& s : samples) {
        CHECK(predict_clip(*m1, s.x) == predict_clip(*m2, s.x));
    }
}

TEST_CASE("adam training descends on the separable toy set") {
    const auto samples = toy_samples(20, 4, 4);
    auto model = build_ft_softmax(2, 11);
    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.batch = 16;
    cfg.seed = 1;
    cfg.adam.lr = 0.001;  // base rate scaled x10 for the toy
    const auto history = train(*model, samples, cfg);
    REQUIRE(history.size() == 200);

    // Monotone descent over 20-epoch window averages.
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t w = 0; w < 10; ++w) {
        double mean = 0.0;
        for (std::size_t e = 0; e < 20; ++e) mean += history[w * 20 + e].train_loss;
        mean /= 20.0;
        CHECK(mean < prev);
        prev = mean;
    }

    // Full classification accuracy afterwards.
    for (const auto& s : samples) {
        const double score = predict_clip(*model, s.x);
        CHECK((score > 0.5) == s.risky());
    }
}

TEST_CASE("history csv is written with one row per epoch") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "lanerisk_history_test.csv";
    std::vector<EpochStats> history{{0.5, 0.6}, {0.25, 0.3}};
    write_history_csv(path, history);
    std::ifstream is(path);
    std::string line;
    REQUIRE(std::getline(is, line));
    CHECK(line == "epoch,train_loss,val_loss");
    REQUIRE(std::getline(is, line));
    CHECK(line.substr(0, 2) == "1,");
    REQUIRE(std::getline(is, line));
    CHECK(line.substr(0, 2) == "2,");
    CHECK(!std::getline(is, line));
    fs::remove(path);
}

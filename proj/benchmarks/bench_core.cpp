#include <benchmark/benchmark.h>

#include <random>

#include "lanerisk/layers.hpp"
#include "lanerisk/lstm.hpp"
#include "lanerisk/tensor.hpp"

using namespace lanerisk;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    Tensor a = random_tensor({n, n}, rng);
    Tensor b = random_tensor({n, n}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_ConvForward(benchmark::State& state) {
    std::mt19937_64 rng(2);
    Conv2D conv("c", 3, 16, 3, 1, rng);
    Tensor x = random_tensor({32, 32, 3}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(conv.forward(x, false, nullptr));
        conv.clear_cache();
    }
}
BENCHMARK(BM_ConvForward);

void BM_ConvBackward(benchmark::State& state) {
    std::mt19937_64 rng(3);
    Conv2D conv("c", 3, 16, 3, 1, rng);
    Tensor x = random_tensor({32, 32, 3}, rng);
    Tensor g = random_tensor({32, 32, 16}, rng);
    for (auto _ : state) {
        conv.forward(x, false, nullptr);
        benchmark::DoNotOptimize(conv.backward(g));
    }
}
BENCHMARK(BM_ConvBackward);

void BM_LstmForward(benchmark::State& state) {
    const std::size_t q = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(4);
    LstmLayer lstm("l", q, 50, 20, rng);
    Tensor x = random_tensor({q, 50}, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lstm.forward(x, false, nullptr));
        lstm.clear_cache();
    }
}
BENCHMARK(BM_LstmForward)->Arg(10)->Arg(50);

void BM_LstmBackward(benchmark::State& state) {
    const std::size_t q = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(5);
    LstmLayer lstm("l", q, 50, 20, rng);
    Tensor x = random_tensor({q, 50}, rng);
    Tensor g = random_tensor({20}, rng);
    for (auto _ : state) {
        lstm.forward(x, false, nullptr);
        benchmark::DoNotOptimize(lstm.backward(g));
        lstm.zero_grads();
    }
}
BENCHMARK(BM_LstmBackward)->Arg(10)->Arg(50);

}  // namespace

BENCHMARK_MAIN();

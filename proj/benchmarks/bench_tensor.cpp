#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

#include <benchmark/benchmark.h>

using namespace noisemod;

namespace {

Tensor random_tensor(const std::vector<std::size_t>& shape, std::uint64_t seed) {
    RngStream rng(seed);
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(-1, 1);
    return t;
}

void BM_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_tensor({n, n}, 1);
    const Tensor b = random_tensor({n, n}, 2);
    for (auto _ : state) {
        Tensor c = matmul(a, b);
        benchmark::DoNotOptimize(c.data.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_matmul)->Arg(64)->Arg(128)->Arg(256);

// The six layer shapes the default CNN runs on a 28x28 input.
void BM_conv2d_cnn_layer(benchmark::State& state) {
    const std::size_t layer = static_cast<std::size_t>(state.range(0));
    struct Shape {
        std::size_t ci, h, w, co, stride;
    };
    const Shape shapes[] = {{1, 28, 28, 16, 1},  {16, 28, 28, 16, 2}, {16, 14, 14, 32, 1},
                            {32, 14, 14, 32, 2}, {32, 7, 7, 64, 1},   {64, 7, 7, 10, 2}};
    const Shape s = shapes[layer];
    const Tensor x = random_tensor({s.ci, s.h, s.w}, 3);
    const Tensor k = random_tensor({s.co, s.ci, 3, 3}, 4);
    for (auto _ : state) {
        Tensor y = conv2d(x, k, s.stride, 1);
        benchmark::DoNotOptimize(y.data.data());
    }
}
BENCHMARK(BM_conv2d_cnn_layer)->DenseRange(0, 5);

} // namespace

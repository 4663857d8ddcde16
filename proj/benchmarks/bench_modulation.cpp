#include "noisemod/modulation.hpp"
#include "noisemod/rng.hpp"

#include <benchmark/benchmark.h>

using namespace noisemod;

namespace {

// Carrier sampling plus the full transform on one 28x28 image, per noise
// kind; this is the entire per-example overhead of the noise_mod regime.
void BM_carrier_and_modulate(benchmark::State& state) {
    const NoiseKind kind = static_cast<NoiseKind>(state.range(0));
    const NoiseDistribution dist = NoiseDistribution::standard(kind);
    RngStream rng(7);
    Tensor x({1, 28, 28});
    for (double& v : x.data) v = rng.uniform();

    std::uint64_t i = 0;
    for (auto _ : state) {
        RngStream crng = rng.derive({i++});
        const Carrier carrier = make_carrier(0.5, dist, x.shape, crng);
        Tensor out = modulate(x, carrier);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_carrier_and_modulate)->DenseRange(0, 5);

void BM_modulate_only(benchmark::State& state) {
    RngStream rng(9);
    const Carrier carrier =
        make_carrier(0.5, NoiseDistribution::standard(NoiseKind::Gaussian), {1, 28, 28}, rng);
    Tensor x({1, 28, 28});
    for (double& v : x.data) v = rng.uniform();
    for (auto _ : state) {
        Tensor out = modulate(x, carrier);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_modulate_only);

} // namespace

#include "noisemod/adversarial.hpp"
#include "noisemod/data.hpp"
#include "noisemod/train.hpp"

#include <benchmark/benchmark.h>

using namespace noisemod;

namespace {

struct Fixture {
    LabeledDataset data;
    ModelSpec spec;

    Fixture() {
        SyntheticSpec sspec;
        sspec.classes = 10;
        sspec.count = 64;
        sspec.noise = 0.05;
        RngStream rng(1);
        data = synthetic_dataset(sspec, rng);
        compute_normalization(data);
        spec = ModelSpec::make(Arch::Fcnn6, 1, 28, 28, 10);
        spec.norm_mean = data.norm_mean;
        spec.norm_std = data.norm_std;
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

void BM_train_step_standard(benchmark::State& state) {
    const Fixture& f = fixture();
    RngStream rng(2);
    Checkpoint ckpt = build(f.spec, rng);
    const std::vector<Tensor> xs(f.data.images.begin(), f.data.images.begin() + 16);
    const std::vector<int> ys(f.data.labels.begin(), f.data.labels.begin() + 16);
    for (auto _ : state) train_step(ckpt, xs, ys);
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 16);
}
BENCHMARK(BM_train_step_standard)->Unit(benchmark::kMillisecond);

void BM_train_step_adversarial(benchmark::State& state) {
    const Fixture& f = fixture();
    RngStream rng(2);
    Checkpoint ckpt = build(f.spec, rng);
    const std::vector<Tensor> xs(f.data.images.begin(), f.data.images.begin() + 16);
    const std::vector<int> ys(f.data.labels.begin(), f.data.labels.begin() + 16);
    AttackConfig cfg;
    cfg.steps = static_cast<int>(state.range(0));
    std::uint64_t i = 0;
    for (auto _ : state) {
        RngStream arng(1000 + i++);
        adversarial_train_step(ckpt, xs, ys, cfg, arng);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 16);
}
BENCHMARK(BM_train_step_adversarial)->Arg(1)->Arg(7)->Unit(benchmark::kMillisecond);

void BM_predict(benchmark::State& state) {
    const Fixture& f = fixture();
    RngStream rng(2);
    const Checkpoint ckpt = build(f.spec, rng);
    for (auto _ : state) {
        Tensor logits = predict(ckpt, f.data.images[0]);
        benchmark::DoNotOptimize(logits.data.data());
    }
}
BENCHMARK(BM_predict)->Unit(benchmark::kMicrosecond);

} // namespace

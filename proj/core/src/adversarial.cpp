#include "noisemod/adversarial.hpp"

#include "noisemod/error.hpp"
#include "noisemod/parallel.hpp"
#include "noisemod/train.hpp"

#include <algorithm>
#include <cmath>

namespace noisemod {

namespace {

void validate(const AttackConfig& cfg) {
    if (cfg.epsilon < 0.0) throw ConfigError("attack: epsilon must be nonnegative");
    if (cfg.alpha <= 0.0) throw ConfigError("attack: alpha must be positive");
    if (cfg.steps < 1) throw ConfigError("attack: steps must be >= 1");
}

Tensor model_input_grad(const Checkpoint& ckpt, const Tensor& x, int label) {
    Tape tape;
    const LossGraph g = build_loss(tape, ckpt, x, label, /*input_grad=*/true);
    GradientBundle bundle = tape.backward(g.loss, {.param_grads = false});
    return std::move(*bundle.input);
}

} // namespace

Tensor pgd_attack(const InputGradFn& grad_at, const Tensor& x, const AttackConfig& cfg,
                  RngStream& rng) {
    validate(cfg);
    const double eps = cfg.epsilon;

    Tensor delta(x.shape);
    if (cfg.random_init)
        for (double& d : delta.data) d = rng.uniform(-eps, eps);

    auto project = [&](Tensor& d) {
        for (std::size_t i = 0; i < d.size(); ++i)
            d.data[i] = std::clamp(d.data[i], -eps, eps);
        if (cfg.box_clamp) {
            for (std::size_t i = 0; i < d.size(); ++i)
                d.data[i] = std::clamp(x.data[i] + d.data[i], 0.0, 1.0) - x.data[i];
        }
    };
    project(delta);

    for (int t = 0; t < cfg.steps; ++t) {
        const Tensor grad = grad_at(add(x, delta));
        if (!grad.same_shape(x))
            throw ShapeError("pgd: gradient " + grad.shape_str() + " vs input " + x.shape_str());
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double g = grad.data[i];
            const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
            delta.data[i] += cfg.alpha * s;
        }
        project(delta);
    }
    return add(x, delta);
}

Tensor pgd(const Checkpoint& ckpt, const Tensor& x, int label, const AttackConfig& cfg,
           RngStream& rng) {
    return pgd_attack(
        [&](const Tensor& xt) { return model_input_grad(ckpt, xt, label); }, x, cfg, rng);
}

Tensor fgsm(const Checkpoint& ckpt, const Tensor& x, int label, const AttackConfig& cfg,
            RngStream& rng) {
    if (cfg.steps != 1)
        throw ConfigError("fgsm: requires steps == 1, got " + std::to_string(cfg.steps));
    return pgd(ckpt, x, label, cfg, rng);
}

BatchGradients adversarial_train_step(Checkpoint& ckpt, const std::vector<Tensor>& xs,
                                      const std::vector<int>& ys, const AttackConfig& cfg,
                                      RngStream& rng, unsigned threads) {
    if (xs.empty() || xs.size() != ys.size())
        throw Error("adversarial_train_step: bad batch");
    validate(cfg);

    // Parameters stay frozen during the inner maximization; each example
    // owns a derived stream so results are independent of thread layout.
    std::vector<Tensor> perturbed(xs.size());
    parallel_for(xs.size(), threads, [&](std::size_t i) {
        RngStream ex_rng = rng.derive({static_cast<std::uint64_t>(i)});
        perturbed[i] = pgd(ckpt, xs[i], ys[i], cfg, ex_rng);
    });

    return train_step(ckpt, perturbed, ys, threads);
}

} // namespace noisemod

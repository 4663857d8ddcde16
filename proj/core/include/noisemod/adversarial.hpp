#pragma once

#include "noisemod/model.hpp"
#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"
#include "noisemod/train.hpp"

#include <functional>
#include <vector>

namespace noisemod {

/// l-inf attack configuration, in [0,1] pixel units.
struct AttackConfig {
    double epsilon = 8.0 / 255.0;
    double alpha = 2.0 / 255.0;
    int steps = 7;
    bool random_init = true;
    /// Clamp perturbed inputs back into [0,1] after each projection.
    bool box_clamp = true;
};

/// Gradient of some scalar loss w.r.t. the input, evaluated at a point.
using InputGradFn = std::function<Tensor(const Tensor&)>;

/// Iterated signed-gradient ascent with projection onto the epsilon ball:
/// delta <- P(delta + alpha * sign(grad)), delta0 ~ U(-eps, eps) when
/// random_init. Generic over the loss via grad_at (tests use closed-form
/// losses).
Tensor pgd_attack(const InputGradFn& grad_at, const Tensor& x, const AttackConfig& cfg,
                  RngStream& rng);

/// PGD against a model's cross-entropy at (x, y).
Tensor pgd(const Checkpoint& ckpt, const Tensor& x, int label, const AttackConfig& cfg,
           RngStream& rng);

/// One-step approximation; requires cfg.steps == 1.
Tensor fgsm(const Checkpoint& ckpt, const Tensor& x, int label, const AttackConfig& cfg,
            RngStream& rng);

/// Attack every example with PGD, then take one optimizer step on the
/// perturbed batch: T backward passes per example plus 1 training pass.
/// Per-example attack streams are derived from rng by batch position.
BatchGradients adversarial_train_step(Checkpoint& ckpt, const std::vector<Tensor>& xs,
                                      const std::vector<int>& ys, const AttackConfig& cfg,
                                      RngStream& rng, unsigned threads = 0);

} // namespace noisemod

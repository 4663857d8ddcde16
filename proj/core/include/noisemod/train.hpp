#pragma once

#include "noisemod/autodiff.hpp"
#include "noisemod/model.hpp"
#include "noisemod/tensor.hpp"

#include <cstddef>
#include <vector>

namespace noisemod {

struct BatchGradients {
    GradientBundle grads; // averaged over the batch
    double mean_loss = 0.0;
    std::size_t correct = 0;
};

/// Per-example forward+backward over the batch (parallel, one tape per
/// worker), averaged in example order so the result is independent of the
/// thread layout. Throws NumericError on a non-finite loss.
BatchGradients batch_gradients(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
                               const std::vector<int>& ys, unsigned threads = 0);

/// batch_gradients + one Adam update.
BatchGradients train_step(Checkpoint& ckpt, const std::vector<Tensor>& xs,
                          const std::vector<int>& ys, unsigned threads = 0);

/// Numerically stable -log softmax(logits)[label] without a tape.
double cross_entropy(const Tensor& logits, int label);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
    std::size_t count = 0;
};

/// Forward-only accuracy/loss on clean inputs.
EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
                    const std::vector<int>& ys, unsigned threads = 0);

} // namespace noisemod

#include "noisemod/train.hpp"

#include "noisemod/error.hpp"
#include "noisemod/parallel.hpp"

#include <cmath>

namespace noisemod {

namespace {

struct ExampleResult {
    GradientBundle grads;
    double loss = 0.0;
    bool correct = false;
};

} // namespace

BatchGradients batch_gradients(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
                               const std::vector<int>& ys, unsigned threads) {
    if (xs.empty() || xs.size() != ys.size())
        throw Error("batch_gradients: batch of " + std::to_string(xs.size()) + " inputs vs " +
                    std::to_string(ys.size()) + " labels");

    std::vector<ExampleResult> results(xs.size());
    parallel_for(xs.size(), threads, [&](std::size_t i) {
        Tape tape;
        const LossGraph g = build_loss(tape, ckpt, xs[i], ys[i]);
        const double loss = tape.value(g.loss).data[0];
        if (!std::isfinite(loss))
            throw NumericError("batch_gradients: non-finite loss at batch position " +
                               std::to_string(i));
        results[i].grads = tape.backward(g.loss);
        results[i].loss = loss;
        results[i].correct =
            argmax(tape.value(g.logits)) == static_cast<std::size_t>(ys[i]);
    });

    // Deterministic reduction in example order.
    BatchGradients out;
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (const auto& p : ckpt.params) out.grads.params.emplace(p.name, Tensor(p.value.shape));
    for (std::size_t i = 0; i < results.size(); ++i) {
        out.mean_loss += results[i].loss;
        out.correct += results[i].correct ? 1 : 0;
        for (auto& [name, acc] : out.grads.params) {
            const Tensor& g = results[i].grads.params.at(name);
            for (std::size_t j = 0; j < acc.size(); ++j) acc.data[j] += g.data[j];
        }
    }
    out.mean_loss *= inv;
    for (auto& [name, acc] : out.grads.params)
        for (double& v : acc.data) v *= inv;
    return out;
}

BatchGradients train_step(Checkpoint& ckpt, const std::vector<Tensor>& xs,
                          const std::vector<int>& ys, unsigned threads) {
    BatchGradients bg = batch_gradients(ckpt, xs, ys, threads);
    adam_step(ckpt, bg.grads);
    return bg;
}

double cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1 || label < 0 ||
        static_cast<std::size_t>(label) >= logits.shape[0])
        throw Error("cross_entropy: bad logits/label");
    const double m = max_value(logits);
    double z = 0.0;
    for (double v : logits.data) z += std::exp(v - m);
    return std::log(z) + m - logits.data[static_cast<std::size_t>(label)];
}

EvalResult evaluate(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
                    const std::vector<int>& ys, unsigned threads) {
    if (xs.size() != ys.size()) throw Error("evaluate: inputs vs labels size mismatch");
    EvalResult res;
    res.count = xs.size();
    if (xs.empty()) return res;

    std::vector<double> losses(xs.size());
    std::vector<char> correct(xs.size());
    parallel_for(xs.size(), threads, [&](std::size_t i) {
        const Tensor logits = predict(ckpt, xs[i]);
        losses[i] = cross_entropy(logits, ys[i]);
        correct[i] = argmax(logits) == static_cast<std::size_t>(ys[i]) ? 1 : 0;
    });
    double loss_sum = 0.0;
    std::size_t ncorrect = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        loss_sum += losses[i];
        ncorrect += correct[i];
    }
    res.accuracy = static_cast<double>(ncorrect) / static_cast<double>(xs.size());
    res.mean_loss = loss_sum / static_cast<double>(xs.size());
    return res;
}

} // namespace noisemod

#include "noisemod/interpretability.hpp"

#include "noisemod/error.hpp"
#include "noisemod/parallel.hpp"

#include <cmath>

namespace noisemod {

Tensor input_gradient(const Checkpoint& ckpt, const Tensor& x, int label) {
    Tape tape;
    const LossGraph g = build_loss(tape, ckpt, x, label, /*input_grad=*/true);
    GradientBundle bundle = tape.backward(g.loss, {.param_grads = false});
    return std::move(*bundle.input);
}

double sign_cosine(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeError("sign_cosine: " + a.shape_str() + " vs " + b.shape_str());
    double dot = 0.0;
    std::size_t nz_a = 0, nz_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double sa = a.data[i] > 0.0 ? 1.0 : (a.data[i] < 0.0 ? -1.0 : 0.0);
        const double sb = b.data[i] > 0.0 ? 1.0 : (b.data[i] < 0.0 ? -1.0 : 0.0);
        dot += sa * sb;
        nz_a += sa != 0.0;
        nz_b += sb != 0.0;
    }
    if (nz_a == 0 || nz_b == 0) return 0.0; // zero-norm sign vector scores 0
    return std::fabs(dot) /
           (std::sqrt(static_cast<double>(nz_a)) * std::sqrt(static_cast<double>(nz_b)));
}

ViiReport vii(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
              const std::vector<int>& ys, unsigned threads) {
    if (xs.empty()) throw Error("vii: empty dataset");
    if (xs.size() != ys.size()) throw Error("vii: inputs vs labels size mismatch");

    ViiReport report;
    report.count = xs.size();
    report.labels = ys;

    // Per-pixel mean image over the evaluation dataset itself.
    report.mean_image = Tensor(xs[0].shape);
    for (const Tensor& x : xs) {
        if (!x.same_shape(report.mean_image))
            throw ShapeError("vii: ragged dataset shapes");
        for (std::size_t i = 0; i < x.size(); ++i) report.mean_image.data[i] += x.data[i];
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (double& v : report.mean_image.data) v *= inv;

    report.per_example.assign(xs.size(), 0.0);
    parallel_for(xs.size(), threads, [&](std::size_t i) {
        const Tensor grad = input_gradient(ckpt, xs[i], ys[i]);
        const Tensor diff = sub(xs[i], report.mean_image);
        report.per_example[i] = sign_cosine(diff, grad);
    });

    double total = 0.0;
    for (double v : report.per_example) total += v;
    report.mean_vii = total * inv;
    return report;
}

Tensor gradient_image(const Tensor& grad) {
    if (grad.data.empty()) throw ShapeError("gradient_image: empty gradient");
    double lo = grad.data[0], hi = grad.data[0];
    for (double v : grad.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor out(grad.shape);
    if (hi == lo) {
        for (double& v : out.data) v = 0.5;
        return out;
    }
    // Divide rather than multiply by a reciprocal so the extremes map to
    // exactly 0 and 1.
    const double range = hi - lo;
    for (std::size_t i = 0; i < grad.size(); ++i) out.data[i] = (grad.data[i] - lo) / range;
    return out;
}

} // namespace noisemod

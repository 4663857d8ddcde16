#pragma once

#include "noisemod/model.hpp"
#include "noisemod/tensor.hpp"

#include <string>
#include <vector>

namespace noisemod {

/// Per-example and aggregate visual interpretability of input-gradients:
/// vii_x = |<sign(x - xbar), sign(grad_x L)>| / (||sign(x - xbar)|| * ||sign(grad_x L)||),
/// averaged over a dataset. xbar is the per-pixel mean image of that same
/// dataset. Zero-norm sign vectors score 0 and are counted.
struct ViiReport {
    std::vector<double> per_example; // each in [0,1]
    std::vector<int> labels;
    double mean_vii = 0.0;
    Tensor mean_image;
    std::size_t count = 0;
    std::string loss_tag = "cross_entropy";
};

/// Gradient of the cross-entropy at (x, y) w.r.t. the input, same shape
/// as x.
Tensor input_gradient(const Checkpoint& ckpt, const Tensor& x, int label);

/// Absolute sign-cosine between two equally shaped tensors (the vii of a
/// single example, given x - xbar and the raw input-gradient).
double sign_cosine(const Tensor& a, const Tensor& b);

ViiReport vii(const Checkpoint& ckpt, const std::vector<Tensor>& xs,
              const std::vector<int>& ys, unsigned threads = 0);

/// Min-max rescaling of a gradient into [0,1] for visualization; a
/// constant gradient maps to all 0.5.
Tensor gradient_image(const Tensor& grad);

} // namespace noisemod

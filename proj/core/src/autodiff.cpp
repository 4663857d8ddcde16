#include "noisemod/autodiff.hpp"

#include "noisemod/error.hpp"

#include <atomic>
#include <cmath>
#include <utility>

namespace noisemod {

namespace {
std::atomic<std::uint64_t> g_backward_passes{0};
}

Tape::NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId n) const {
    if (n < 0 || static_cast<std::size_t>(n) >= nodes_.size())
        throw Error("Tape: invalid node id " + std::to_string(n));
    return nodes_[static_cast<std::size_t>(n)];
}

const Tensor& Tape::value(NodeId n) const { return node(n).value; }

Tape::NodeId Tape::leaf(Tensor value, std::string id, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.leaf_id = std::move(id);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

Tape::NodeId Tape::input_leaf(Tensor value, bool requires_grad) {
    NodeId id = leaf(std::move(value), "input", requires_grad);
    nodes_.back().is_input = true;
    return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Add;
    n.in = {a, b, -1};
    n.value = noisemod::add(value(a), value(b));
    return push(std::move(n));
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Sub;
    n.in = {a, b, -1};
    n.value = noisemod::sub(value(a), value(b));
    return push(std::move(n));
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    Node n;
    n.op = Op::Mul;
    n.in = {a, b, -1};
    n.value = noisemod::mul(value(a), value(b));
    return push(std::move(n));
}

Tape::NodeId Tape::scale(NodeId a, double s) {
    Node n;
    n.op = Op::Scale;
    n.in = {a, -1, -1};
    n.scalar = s;
    n.value = noisemod::scale(value(a), s);
    return push(std::move(n));
}

Tape::NodeId Tape::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.in = {a, -1, -1};
    const Tensor& v = value(a);
    n.value = Tensor(v.shape);
    for (std::size_t i = 0; i < v.size(); ++i)
        n.value.data[i] = v.data[i] > 0.0 ? v.data[i] : 0.0;
    return push(std::move(n));
}

Tape::NodeId Tape::reshape(NodeId a, std::vector<std::size_t> new_shape) {
    const Tensor& v = value(a);
    if (shape_numel(new_shape) != v.size())
        throw ShapeError("reshape: cannot view " + v.shape_str() + " as " +
                         Tensor(new_shape).shape_str());
    Node n;
    n.op = Op::Reshape;
    n.in = {a, -1, -1};
    n.value = v;
    n.value.shape = std::move(new_shape);
    return push(std::move(n));
}

Tape::NodeId Tape::dense(NodeId w, NodeId x, NodeId b) {
    const Tensor& wv = value(w);
    const Tensor& xv = value(x);
    const Tensor& bv = value(b);
    if (wv.rank() != 2 || xv.rank() != 1 || bv.rank() != 1)
        throw ShapeError("dense: want w[m,k], x[k], b[m]; got " + wv.shape_str() + ", " +
                         xv.shape_str() + ", " + bv.shape_str());
    const std::size_t m = wv.shape[0], k = wv.shape[1];
    if (xv.shape[0] != k || bv.shape[0] != m)
        throw ShapeError("dense: inconsistent shapes " + wv.shape_str() + ", " +
                         xv.shape_str() + ", " + bv.shape_str());

    Node n;
    n.op = Op::Dense;
    n.in = {w, x, b};
    n.value = Tensor({m});
    for (std::size_t i = 0; i < m; ++i) {
        const double* wrow = wv.data.data() + i * k;
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += wrow[j] * xv.data[j];
        n.value.data[i] = acc + bv.data[i];
    }
    return push(std::move(n));
}

Tape::NodeId Tape::conv(NodeId kernels, NodeId x, NodeId b, std::size_t stride,
                        std::size_t padding) {
    const Tensor& kv = value(kernels);
    const Tensor& bv = value(b);
    Node n;
    n.op = Op::Conv;
    n.in = {kernels, x, b};
    n.stride = stride;
    n.padding = padding;
    n.value = conv2d(value(x), kv, stride, padding);
    if (bv.rank() != 1 || bv.shape[0] != n.value.shape[0])
        throw ShapeError("conv: bias " + bv.shape_str() + " does not match output " +
                         n.value.shape_str());
    const std::size_t plane = n.value.shape[1] * n.value.shape[2];
    for (std::size_t oc = 0; oc < n.value.shape[0]; ++oc) {
        double* p = n.value.data.data() + oc * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += bv.data[oc];
    }
    return push(std::move(n));
}

Tape::NodeId Tape::avg_pool2(NodeId a) {
    const Tensor& v = value(a);
    if (v.rank() != 3) throw ShapeError("avg_pool2: want [c,h,w], got " + v.shape_str());
    const std::size_t c = v.shape[0], h = v.shape[1], w = v.shape[2];
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("avg_pool2: spatial dims must be even, got " + v.shape_str());
    Node n;
    n.op = Op::AvgPool2;
    n.in = {a, -1, -1};
    n.value = Tensor({c, h / 2, w / 2});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h / 2; ++y)
            for (std::size_t x = 0; x < w / 2; ++x) {
                const double s = v.at({ch, 2 * y, 2 * x}) + v.at({ch, 2 * y, 2 * x + 1}) +
                                 v.at({ch, 2 * y + 1, 2 * x}) + v.at({ch, 2 * y + 1, 2 * x + 1});
                n.value.at({ch, y, x}) = 0.25 * s;
            }
    return push(std::move(n));
}

Tape::NodeId Tape::global_avg_pool(NodeId a) {
    const Tensor& v = value(a);
    if (v.rank() != 3) throw ShapeError("global_avg_pool: want [c,h,w], got " + v.shape_str());
    const std::size_t c = v.shape[0], plane = v.shape[1] * v.shape[2];
    Node n;
    n.op = Op::GlobalAvgPool;
    n.in = {a, -1, -1};
    n.value = Tensor({c});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* p = v.data.data() + ch * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
        n.value.data[ch] = acc / static_cast<double>(plane);
    }
    return push(std::move(n));
}

Tape::NodeId Tape::normalize(NodeId a, std::vector<double> mean, std::vector<double> stddev) {
    const Tensor& v = value(a);
    if (v.rank() != 3) throw ShapeError("normalize: want [c,h,w], got " + v.shape_str());
    const std::size_t c = v.shape[0], plane = v.shape[1] * v.shape[2];
    if (mean.size() != c || stddev.size() != c)
        throw ShapeError("normalize: " + std::to_string(mean.size()) + " channel stats for " +
                         v.shape_str());
    for (double s : stddev)
        if (s <= 0.0) throw NumericError("normalize: nonpositive stddev");
    Node n;
    n.op = Op::Normalize;
    n.in = {a, -1, -1};
    n.ch_mean = std::move(mean);
    n.ch_std = std::move(stddev);
    n.value = Tensor(v.shape);
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double m = n.ch_mean[ch], s = n.ch_std[ch];
        const double* p = v.data.data() + ch * plane;
        double* q = n.value.data.data() + ch * plane;
        for (std::size_t i = 0; i < plane; ++i) q[i] = (p[i] - m) / s;
    }
    return push(std::move(n));
}

Tape::NodeId Tape::sum_all(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.in = {a, -1, -1};
    n.value = Tensor::scalar(noisemod::sum(value(a)));
    return push(std::move(n));
}

Tape::NodeId Tape::mean_all(NodeId a) {
    Node n;
    n.op = Op::Mean;
    n.in = {a, -1, -1};
    n.value = Tensor::scalar(noisemod::mean(value(a)));
    return push(std::move(n));
}

Tape::NodeId Tape::softmax_cross_entropy(NodeId logits, int label) {
    const Tensor& lv = value(logits);
    if (lv.rank() != 1 || lv.shape[0] < 2)
        throw ShapeError("softmax_cross_entropy: want logits[k], k >= 2; got " + lv.shape_str());
    if (label < 0 || static_cast<std::size_t>(label) >= lv.shape[0])
        throw Error("softmax_cross_entropy: label " + std::to_string(label) +
                    " out of range [0," + std::to_string(lv.shape[0]) + ")");
    const std::size_t k = lv.shape[0];
    const double m = max_value(lv);
    double z = 0.0;
    Tensor probs({k});
    for (std::size_t i = 0; i < k; ++i) {
        probs.data[i] = std::exp(lv.data[i] - m);
        z += probs.data[i];
    }
    for (std::size_t i = 0; i < k; ++i) probs.data[i] /= z;

    Node n;
    n.op = Op::SoftmaxXent;
    n.in = {logits, -1, -1};
    n.label = label;
    n.cached = std::move(probs);
    n.value = Tensor::scalar(std::log(z) + m - lv.data[static_cast<std::size_t>(label)]);
    return push(std::move(n));
}

Tensor& Tape::grad_slot(NodeId n) {
    const std::size_t i = static_cast<std::size_t>(n);
    if (!has_grad_[i]) {
        grads_[i] = Tensor(nodes_[i].value.shape);
        has_grad_[i] = 1;
    }
    return grads_[i];
}

GradientBundle Tape::backward(NodeId loss, BackwardOptions opts) {
    if (nodes_.empty()) throw Error("backward: empty tape");
    const Node& ln = node(loss);
    if (ln.value.size() != 1)
        throw Error("backward: loss must be scalar, got " + ln.value.shape_str());

    grads_.assign(nodes_.size(), Tensor());
    has_grad_.assign(nodes_.size(), 0);
    grad_slot(loss).data[0] = 1.0;

    for (NodeId i = loss; i >= 0; --i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        if (!has_grad_[ui]) continue;
        const Node& n = nodes_[ui];
        const Tensor& g = grads_[ui];
        switch (n.op) {
            case Op::Leaf: break;
            case Op::Add: {
                Tensor& ga = grad_slot(n.in[0]);
                Tensor& gb = grad_slot(n.in[1]);
                for (std::size_t j = 0; j < g.size(); ++j) {
                    ga.data[j] += g.data[j];
                    gb.data[j] += g.data[j];
                }
                break;
            }
            case Op::Sub: {
                Tensor& ga = grad_slot(n.in[0]);
                Tensor& gb = grad_slot(n.in[1]);
                for (std::size_t j = 0; j < g.size(); ++j) {
                    ga.data[j] += g.data[j];
                    gb.data[j] -= g.data[j];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& av = nodes_[static_cast<std::size_t>(n.in[0])].value;
                const Tensor& bv = nodes_[static_cast<std::size_t>(n.in[1])].value;
                Tensor& ga = grad_slot(n.in[0]);
                Tensor& gb = grad_slot(n.in[1]);
                for (std::size_t j = 0; j < g.size(); ++j) {
                    ga.data[j] += g.data[j] * bv.data[j];
                    gb.data[j] += g.data[j] * av.data[j];
                }
                break;
            }
            case Op::Scale: {
                Tensor& ga = grad_slot(n.in[0]);
                for (std::size_t j = 0; j < g.size(); ++j) ga.data[j] += g.data[j] * n.scalar;
                break;
            }
            case Op::Relu: {
                const Tensor& av = nodes_[static_cast<std::size_t>(n.in[0])].value;
                Tensor& ga = grad_slot(n.in[0]);
                // subgradient at 0 is 0
                for (std::size_t j = 0; j < g.size(); ++j)
                    if (av.data[j] > 0.0) ga.data[j] += g.data[j];
                break;
            }
            case Op::Reshape: {
                Tensor& ga = grad_slot(n.in[0]);
                for (std::size_t j = 0; j < g.size(); ++j) ga.data[j] += g.data[j];
                break;
            }
            case Op::Dense: {
                const Tensor& wv = nodes_[static_cast<std::size_t>(n.in[0])].value;
                const Tensor& xv = nodes_[static_cast<std::size_t>(n.in[1])].value;
                const std::size_t m = wv.shape[0], k = wv.shape[1];
                Tensor& gx = grad_slot(n.in[1]);
                for (std::size_t i2 = 0; i2 < m; ++i2) {
                    const double gi = g.data[i2];
                    if (gi == 0.0) continue;
                    const double* wrow = wv.data.data() + i2 * k;
                    for (std::size_t j = 0; j < k; ++j) gx.data[j] += gi * wrow[j];
                }
                if (opts.param_grads) {
                    Tensor& gw = grad_slot(n.in[0]);
                    Tensor& gb = grad_slot(n.in[2]);
                    for (std::size_t i2 = 0; i2 < m; ++i2) {
                        const double gi = g.data[i2];
                        gb.data[i2] += gi;
                        if (gi == 0.0) continue;
                        double* gwrow = gw.data.data() + i2 * k;
                        for (std::size_t j = 0; j < k; ++j) gwrow[j] += gi * xv.data[j];
                    }
                }
                break;
            }
            case Op::Conv: {
                const Tensor& kv = nodes_[static_cast<std::size_t>(n.in[0])].value;
                const Tensor& xv = nodes_[static_cast<std::size_t>(n.in[1])].value;
                const std::size_t co = kv.shape[0], ci = kv.shape[1];
                const std::size_t kh = kv.shape[2], kw = kv.shape[3];
                const std::size_t h = xv.shape[1], w = xv.shape[2];
                const std::size_t oh = n.value.shape[1], ow = n.value.shape[2];
                const long pad = static_cast<long>(n.padding);
                const long st = static_cast<long>(n.stride);

                auto tap_range = [st](long d, std::size_t extent, std::size_t out_extent) {
                    const long lo = d < 0 ? (-d + st - 1) / st : 0;
                    const long num = static_cast<long>(extent) - 1 - d;
                    long hi = num < 0 ? -1 : num / st;
                    if (hi >= static_cast<long>(out_extent))
                        hi = static_cast<long>(out_extent) - 1;
                    return std::pair<long, long>(lo, hi);
                };

                Tensor& gx = grad_slot(n.in[1]);
                Tensor* gk = nullptr;
                Tensor* gb = nullptr;
                if (opts.param_grads) {
                    gk = &grad_slot(n.in[0]);
                    gb = &grad_slot(n.in[2]);
                }

                for (std::size_t oc = 0; oc < co; ++oc) {
                    const double* gchan = g.data.data() + oc * oh * ow;
                    if (gb) {
                        double acc = 0.0;
                        for (std::size_t i2 = 0; i2 < oh * ow; ++i2) acc += gchan[i2];
                        gb->data[oc] += acc;
                    }
                    for (std::size_t ic = 0; ic < ci; ++ic) {
                        const double* xchan = xv.data.data() + ic * h * w;
                        double* gxchan = gx.data.data() + ic * h * w;
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const long dy = static_cast<long>(ky) - pad;
                            const auto [ylo, yhi] = tap_range(dy, h, oh);
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long dx = static_cast<long>(kx) - pad;
                                const auto [xlo, xhi] = tap_range(dx, w, ow);
                                const std::size_t kidx = ((oc * ci + ic) * kh + ky) * kw + kx;
                                const double kval = kv.data[kidx];
                                double kacc = 0.0;
                                for (long y = ylo; y <= yhi; ++y) {
                                    const long ibase = (y * st + dy) * static_cast<long>(w) + dx;
                                    const double* grow = gchan + y * ow;
                                    const double* xrow = xchan + ibase;
                                    double* gxrow = gxchan + ibase;
                                    for (long x = xlo; x <= xhi; ++x) {
                                        const double gv = grow[x];
                                        gxrow[x * st] += kval * gv;
                                        kacc += gv * xrow[x * st];
                                    }
                                }
                                if (gk) gk->data[kidx] += kacc;
                            }
                        }
                    }
                }
                break;
            }
            case Op::AvgPool2: {
                const Tensor& av = nodes_[static_cast<std::size_t>(n.in[0])].value;
                const std::size_t c = av.shape[0], h = av.shape[1], w = av.shape[2];
                Tensor& ga = grad_slot(n.in[0]);
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t y = 0; y < h / 2; ++y)
                        for (std::size_t x = 0; x < w / 2; ++x) {
                            const double gv = 0.25 * g.data[(ch * (h / 2) + y) * (w / 2) + x];
                            ga.at({ch, 2 * y, 2 * x}) += gv;
                            ga.at({ch, 2 * y, 2 * x + 1}) += gv;
                            ga.at({ch, 2 * y + 1, 2 * x}) += gv;
                            ga.at({ch, 2 * y + 1, 2 * x + 1}) += gv;
                        }
                break;
            }
            case Op::GlobalAvgPool: {
                const Tensor& av = nodes_[static_cast<std::size_t>(n.in[0])].value;
                const std::size_t c = av.shape[0], plane = av.shape[1] * av.shape[2];
                Tensor& ga = grad_slot(n.in[0]);
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double gv = g.data[ch] / static_cast<double>(plane);
                    double* p = ga.data.data() + ch * plane;
                    for (std::size_t i2 = 0; i2 < plane; ++i2) p[i2] += gv;
                }
                break;
            }
            case Op::Normalize: {
                const std::size_t c = n.value.shape[0];
                const std::size_t plane = n.value.shape[1] * n.value.shape[2];
                Tensor& ga = grad_slot(n.in[0]);
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double inv = 1.0 / n.ch_std[ch];
                    const double* gp = g.data.data() + ch * plane;
                    double* p = ga.data.data() + ch * plane;
                    for (std::size_t i2 = 0; i2 < plane; ++i2) p[i2] += gp[i2] * inv;
                }
                break;
            }
            case Op::Sum: {
                Tensor& ga = grad_slot(n.in[0]);
                const double gv = g.data[0];
                for (double& v : ga.data) v += gv;
                break;
            }
            case Op::Mean: {
                Tensor& ga = grad_slot(n.in[0]);
                const double gv = g.data[0] / static_cast<double>(ga.size());
                for (double& v : ga.data) v += gv;
                break;
            }
            case Op::SoftmaxXent: {
                Tensor& ga = grad_slot(n.in[0]);
                const double gv = g.data[0];
                for (std::size_t j = 0; j < ga.size(); ++j) {
                    const double onehot = (static_cast<int>(j) == n.label) ? 1.0 : 0.0;
                    ga.data[j] += gv * (n.cached.data[j] - onehot);
                }
                break;
            }
        }
    }

    backward_done_ = true;
    g_backward_passes.fetch_add(1, std::memory_order_relaxed);

    GradientBundle bundle;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        if (n.op != Op::Leaf || !n.requires_grad) continue;
        Tensor gleaf = has_grad_[i] ? grads_[i] : Tensor(n.value.shape);
        if (n.is_input)
            bundle.input = std::move(gleaf);
        else if (opts.param_grads)
            bundle.params.emplace(n.leaf_id, std::move(gleaf));
    }
    return bundle;
}

const Tensor& Tape::grad(NodeId n) {
    if (!backward_done_) throw Error("grad: backward() has not run");
    node(n); // bounds check
    // A node that never influenced the loss has a zero gradient.
    return grad_slot(n);
}

std::uint64_t Tape::backward_pass_count() {
    return g_backward_passes.load(std::memory_order_relaxed);
}

void Tape::reset_backward_pass_count() {
    g_backward_passes.store(0, std::memory_order_relaxed);
}

} // namespace noisemod

#include "noisemod/model.hpp"

#include "noisemod/error.hpp"

#include <algorithm>
#include <cmath>

namespace noisemod {

Arch parse_arch(const std::string& name) {
    if (name == "mlp3") return Arch::Mlp3;
    if (name == "fcnn6") return Arch::Fcnn6;
    if (name == "lenet") return Arch::LeNet;
    throw ConfigError("unknown architecture: " + name);
}

std::string to_string(Arch arch) {
    switch (arch) {
        case Arch::Mlp3: return "mlp3";
        case Arch::Fcnn6: return "fcnn6";
        case Arch::LeNet: return "lenet";
    }
    return "?";
}

ModelSpec ModelSpec::make(Arch arch, std::size_t c, std::size_t h, std::size_t w, int classes) {
    ModelSpec spec;
    spec.arch = arch;
    spec.in_c = c;
    spec.in_h = h;
    spec.in_w = w;
    spec.classes = classes;
    switch (arch) {
        case Arch::Mlp3: spec.widths = {256, 256}; break;
        case Arch::Fcnn6: spec.widths = {16, 16, 32, 32, 64}; break;
        case Arch::LeNet: spec.widths = {}; break;
    }
    spec.norm_mean.assign(c, 0.0);
    spec.norm_std.assign(c, 1.0);
    return spec;
}

namespace {

// LeNet geometry: conv 5x5 pad 2, pool, conv 5x5 pad 0, pool, then dense.
struct LeNetDims {
    std::size_t after_pool1_h, after_pool1_w;
    std::size_t after_conv2_h, after_conv2_w;
    std::size_t after_pool2_h, after_pool2_w;
    std::size_t flat;
};

LeNetDims lenet_dims(const ModelSpec& spec) {
    LeNetDims d{};
    if (spec.in_h % 2 != 0 || spec.in_w % 2 != 0)
        throw ConfigError("lenet: input spatial dims must be even");
    d.after_pool1_h = spec.in_h / 2;
    d.after_pool1_w = spec.in_w / 2;
    if (d.after_pool1_h < 5 || d.after_pool1_w < 5)
        throw ConfigError("lenet: input too small");
    d.after_conv2_h = d.after_pool1_h - 4;
    d.after_conv2_w = d.after_pool1_w - 4;
    if (d.after_conv2_h % 2 != 0 || d.after_conv2_w % 2 != 0)
        throw ConfigError("lenet: conv2 output dims must be even");
    d.after_pool2_h = d.after_conv2_h / 2;
    d.after_pool2_w = d.after_conv2_w / 2;
    d.flat = 16 * d.after_pool2_h * d.after_pool2_w;
    return d;
}

std::size_t fcnn6_stride(std::size_t layer) {
    // stride 2 every other layer: 1,2,1,2,1,2
    return layer % 2 == 1 ? 2 : 1;
}

} // namespace

void ModelSpec::validate() const {
    if (classes < 2) throw ConfigError("ModelSpec: need at least 2 classes");
    if (in_c == 0 || in_h == 0 || in_w == 0) throw ConfigError("ModelSpec: zero input extent");
    if (norm_mean.size() != in_c || norm_std.size() != in_c)
        throw ConfigError("ModelSpec: normalization stats must have one entry per channel");
    for (double s : norm_std)
        if (s <= 0.0) throw ConfigError("ModelSpec: nonpositive normalization std");
    switch (arch) {
        case Arch::Mlp3:
            if (widths.size() != 2) throw ConfigError("mlp3: expected 2 hidden widths");
            break;
        case Arch::Fcnn6:
            if (widths.size() != 5) throw ConfigError("fcnn6: expected 5 channel counts");
            break;
        case Arch::LeNet:
            if (!widths.empty()) throw ConfigError("lenet: widths are fixed");
            lenet_dims(*this);
            break;
    }
    for (std::size_t w : widths)
        if (w == 0) throw ConfigError("ModelSpec: zero layer width");
    if (arch == Arch::Fcnn6) {
        // spatial extent must survive the three stride-2 layers
        std::size_t h = in_h, w = in_w;
        for (std::size_t l = 0; l < 6; ++l) {
            const std::size_t s = fcnn6_stride(l);
            h = (h + 2 - 3) / s + 1;
            w = (w + 2 - 3) / s + 1;
            if (h == 0 || w == 0) throw ConfigError("fcnn6: input too small");
        }
    }
}

const Tensor& Checkpoint::param(const std::string& name) const {
    for (const auto& p : params)
        if (p.name == name) return p.value;
    throw Error("Checkpoint: no parameter named " + name);
}

std::size_t Checkpoint::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

namespace {

Tensor kaiming_uniform(const std::vector<std::size_t>& shape, std::size_t fan_in,
                       RngStream& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor t(shape);
    for (double& v : t.data) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace

Checkpoint build(const ModelSpec& spec, RngStream& rng) {
    spec.validate();
    Checkpoint ckpt;
    ckpt.spec = spec;

    auto push = [&](const std::string& name, Tensor t) {
        ckpt.params.push_back({name, std::move(t)});
    };
    auto conv_layer = [&](const std::string& name, std::size_t co, std::size_t ci,
                          std::size_t k) {
        push(name + ".w", kaiming_uniform({co, ci, k, k}, ci * k * k, rng));
        push(name + ".b", Tensor({co}));
    };
    auto dense_layer = [&](const std::string& name, std::size_t out, std::size_t in) {
        push(name + ".w", kaiming_uniform({out, in}, in, rng));
        push(name + ".b", Tensor({out}));
    };

    const std::size_t flat = spec.in_c * spec.in_h * spec.in_w;
    switch (spec.arch) {
        case Arch::Mlp3:
            dense_layer("fc1", spec.widths[0], flat);
            dense_layer("fc2", spec.widths[1], spec.widths[0]);
            dense_layer("fc3", static_cast<std::size_t>(spec.classes), spec.widths[1]);
            break;
        case Arch::Fcnn6: {
            std::size_t ci = spec.in_c;
            for (std::size_t l = 0; l < 6; ++l) {
                const std::size_t co =
                    l < 5 ? spec.widths[l] : static_cast<std::size_t>(spec.classes);
                conv_layer("conv" + std::to_string(l + 1), co, ci, 3);
                ci = co;
            }
            break;
        }
        case Arch::LeNet: {
            const LeNetDims d = lenet_dims(spec);
            conv_layer("conv1", 6, spec.in_c, 5);
            conv_layer("conv2", 16, 6, 5);
            dense_layer("fc1", 120, d.flat);
            dense_layer("fc2", 84, 120);
            dense_layer("fc3", static_cast<std::size_t>(spec.classes), 84);
            break;
        }
    }

    ckpt.opt.m.reserve(ckpt.params.size());
    ckpt.opt.v.reserve(ckpt.params.size());
    for (const auto& p : ckpt.params) {
        ckpt.opt.m.emplace_back(p.value.shape);
        ckpt.opt.v.emplace_back(p.value.shape);
    }
    return ckpt;
}

Tape::NodeId build_logits(Tape& tape, const Checkpoint& ckpt, Tape::NodeId input) {
    const ModelSpec& spec = ckpt.spec;
    auto leaf = [&](const std::string& name) {
        return tape.leaf(ckpt.param(name), name, true);
    };

    Tape::NodeId x = tape.normalize(input, spec.norm_mean, spec.norm_std);
    switch (spec.arch) {
        case Arch::Mlp3: {
            x = tape.reshape(x, {spec.in_c * spec.in_h * spec.in_w});
            x = tape.relu(tape.dense(leaf("fc1.w"), x, leaf("fc1.b")));
            x = tape.relu(tape.dense(leaf("fc2.w"), x, leaf("fc2.b")));
            return tape.dense(leaf("fc3.w"), x, leaf("fc3.b"));
        }
        case Arch::Fcnn6: {
            for (std::size_t l = 0; l < 6; ++l) {
                const std::string name = "conv" + std::to_string(l + 1);
                x = tape.conv(leaf(name + ".w"), x, leaf(name + ".b"), fcnn6_stride(l), 1);
                if (l < 5) x = tape.relu(x); // last conv feeds the pooled logits directly
            }
            return tape.global_avg_pool(x);
        }
        case Arch::LeNet: {
            const LeNetDims d = lenet_dims(spec);
            x = tape.relu(tape.conv(leaf("conv1.w"), x, leaf("conv1.b"), 1, 2));
            x = tape.avg_pool2(x);
            x = tape.relu(tape.conv(leaf("conv2.w"), x, leaf("conv2.b"), 1, 0));
            x = tape.avg_pool2(x);
            x = tape.reshape(x, {d.flat});
            x = tape.relu(tape.dense(leaf("fc1.w"), x, leaf("fc1.b")));
            x = tape.relu(tape.dense(leaf("fc2.w"), x, leaf("fc2.b")));
            return tape.dense(leaf("fc3.w"), x, leaf("fc3.b"));
        }
    }
    throw Error("build_logits: unknown arch");
}

LossGraph build_loss(Tape& tape, const Checkpoint& ckpt, const Tensor& x, int label,
                     bool input_grad) {
    if (x.shape != ckpt.spec.input_shape())
        throw ShapeError("build_loss: input " + x.shape_str() + " does not match model " +
                         Tensor(ckpt.spec.input_shape()).shape_str());
    const Tape::NodeId input = tape.input_leaf(x, input_grad);
    const Tape::NodeId logits = build_logits(tape, ckpt, input);
    const Tape::NodeId loss = tape.softmax_cross_entropy(logits, label);
    return {input, logits, loss};
}

Tensor predict(const Checkpoint& ckpt, const Tensor& x) {
    if (x.shape != ckpt.spec.input_shape())
        throw ShapeError("predict: input " + x.shape_str() + " does not match model " +
                         Tensor(ckpt.spec.input_shape()).shape_str());
    Tape tape;
    const Tape::NodeId input = tape.input_leaf(x, false);
    const Tape::NodeId logits = build_logits(tape, ckpt, input);
    return tape.value(logits);
}

void adam_step(Checkpoint& ckpt, const GradientBundle& grads) {
    AdamState& opt = ckpt.opt;
    opt.t += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        NamedTensor& p = ckpt.params[i];
        auto it = grads.params.find(p.name);
        if (it == grads.params.end())
            throw Error("adam_step: missing gradient for parameter " + p.name);
        const Tensor& g = it->second;
        if (!g.same_shape(p.value))
            throw ShapeError("adam_step: gradient shape " + g.shape_str() +
                             " does not match parameter " + p.name);
        Tensor& m = opt.m[i];
        Tensor& v = opt.v[i];
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double gj = g.data[j];
            m.data[j] = opt.beta1 * m.data[j] + (1.0 - opt.beta1) * gj;
            v.data[j] = opt.beta2 * v.data[j] + (1.0 - opt.beta2) * gj * gj;
            const double mhat = m.data[j] / bc1;
            const double vhat = v.data[j] / bc2;
            p.value.data[j] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
    }
}

} // namespace noisemod

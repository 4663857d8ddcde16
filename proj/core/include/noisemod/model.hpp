#pragma once

#include "noisemod/autodiff.hpp"
#include "noisemod/rng.hpp"
#include "noisemod/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace noisemod {

enum class Arch { Mlp3, Fcnn6, LeNet };

Arch parse_arch(const std::string& name);
std::string to_string(Arch arch);

/// Architecture description. `widths` are the hidden layer sizes for mlp3
/// (default 256,256) or the conv channel counts for the first five fcnn6
/// layers (default 16,16,32,32,64; the sixth layer always maps to
/// `classes`). LeNet ignores widths. Normalization stats are the fixed
/// per-channel mean/std applied inside the model.
struct ModelSpec {
    Arch arch = Arch::Mlp3;
    std::size_t in_c = 1, in_h = 28, in_w = 28;
    int classes = 10;
    std::vector<std::size_t> widths;
    std::vector<double> norm_mean, norm_std;

    static ModelSpec make(Arch arch, std::size_t c, std::size_t h, std::size_t w, int classes);

    void validate() const; // throws ConfigError on inconsistency
    std::vector<std::size_t> input_shape() const { return {in_c, in_h, in_w}; }
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

struct AdamState {
    std::vector<Tensor> m, v;
    std::uint64_t t = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Model parameters plus optimizer state and training progress.
struct Checkpoint {
    ModelSpec spec;
    std::vector<NamedTensor> params;
    AdamState opt;
    std::uint32_t epoch = 0;
    double best_val_accuracy = 0.0;

    const Tensor& param(const std::string& name) const;
    std::size_t param_count() const;
};

/// Fresh model with Kaiming-uniform weights and zero biases; deterministic
/// given the stream.
Checkpoint build(const ModelSpec& spec, RngStream& rng);

/// Adds the model graph (normalize -> layers -> logits) on top of an input
/// node; parameter leaves are named after Checkpoint::params entries.
Tape::NodeId build_logits(Tape& tape, const Checkpoint& ckpt, Tape::NodeId input);

struct LossGraph {
    Tape::NodeId input;
    Tape::NodeId logits;
    Tape::NodeId loss;
};

/// Input leaf + model graph + cross-entropy.
LossGraph build_loss(Tape& tape, const Checkpoint& ckpt, const Tensor& x, int label,
                     bool input_grad = false);

/// Logits for one [0,1]-scaled input; inference never modulates.
Tensor predict(const Checkpoint& ckpt, const Tensor& x);

/// One Adam update with bias correction; gradients must cover every
/// parameter.
void adam_step(Checkpoint& ckpt, const GradientBundle& grads);

// Checkpoint container: "NMCK" magic, version u16, manifest, then
// little-endian float32 blobs with explicit shapes. Byte-exact round-trip.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace noisemod

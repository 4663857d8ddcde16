#pragma once

#include "noisemod/adversarial.hpp"
#include "noisemod/model.hpp"
#include "noisemod/noise.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace noisemod {

enum class Regime { Standard, NoiseMod, AdvTrain, MultApprox };

Regime parse_regime(const std::string& name);
std::string to_string(Regime regime);

enum class DatasetKind { Synthetic, Mnist, Cifar10 };

DatasetKind parse_dataset_kind(const std::string& name);
std::string to_string(DatasetKind kind);

/// Everything needed to reproduce one experiment. Defaults follow the
/// training protocol this lab reproduces: batch 64, 50 epochs, Adam at
/// lr 0.001, beta 0.5, standard Gaussian carrier noise, seed 0.
struct ExperimentConfig {
    Regime regime = Regime::Standard;
    Arch arch = Arch::Fcnn6;

    DatasetKind dataset = DatasetKind::Synthetic;
    std::string data_dir = "data/mnist";
    std::size_t train_count = 0; // 0 = full split
    std::size_t test_count = 0;
    double val_fraction = 0.1; // trailing slice of the training set

    int synth_classes = 10;
    std::size_t synth_count = 2000;
    std::size_t synth_channels = 1, synth_height = 28, synth_width = 28;
    double synth_noise = 0.05;

    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double lr = 0.001;

    double beta = 0.5;
    NoiseKind noise = NoiseKind::Gaussian;
    bool fixed_carriers = false;
    double mult_alpha = 1.0;

    AttackConfig attack;

    std::uint64_t seed = 0;
    std::string outdir = "out";
    std::string name; // experiment id override
    unsigned threads = 0;
    bool track_vii = true; // per-epoch VII on the validation split

    std::string experiment_id() const;
    /// Key/value text with sections; feeding it back through --config
    /// reruns the experiment bit-identically.
    std::string echo() const;
    std::string config_hash() const; // fnv1a-64 of the echo, hex

    void validate() const;
};

/// Parse the echo/config format: `key = value` lines, `[section]` headers
/// (section keys become "section.key"), '#' comments.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Apply parsed keys onto a config; unknown keys throw ConfigError.
void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv);

/// Seed precedence: command-line flag > NOISEMOD_SEED env > config file >
/// default 0.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> env,
                           std::optional<std::uint64_t> config_value);

/// NOISEMOD_SEED from the environment, if set (must parse as u64).
std::optional<std::uint64_t> env_seed();

std::uint64_t fnv1a64(const std::string& text);

} // namespace noisemod

#pragma once

#include "noisemod/config.hpp"
#include "noisemod/data.hpp"
#include "noisemod/interpretability.hpp"
#include "noisemod/train.hpp"

#include <optional>
#include <string>
#include <vector>

namespace noisemod {

struct DatasetBundle {
    LabeledDataset train; // normalization stats frozen from this split
    LabeledDataset val;   // trailing val_fraction of the training set
    LabeledDataset test;
};

DatasetBundle load_datasets(const ExperimentConfig& cfg);

struct EpochRow {
    std::size_t epoch = 0;
    std::string split;
    double accuracy = 0.0;
    double loss = 0.0;
    std::optional<double> vii;
    double wallclock_s = 0.0;
};

std::string metrics_csv_header();
std::string to_csv_row(const EpochRow& row);

struct TrainOutputs {
    ExperimentConfig cfg;
    std::string dir; // <outdir>/<experiment-id>, empty for in-memory runs
    std::string checkpoint_path, metrics_path, echo_path;
    Checkpoint best; // highest validation accuracy, earliest epoch on ties
    Checkpoint last;
    std::vector<EpochRow> rows;
    double total_seconds = 0.0;
    std::uint64_t backward_passes = 0;
    std::size_t examples_trained = 0;
};

/// Train under the configured regime and write checkpoint, metrics.csv and
/// config.echo under <outdir>/<experiment-id>/.
TrainOutputs run_train(const ExperimentConfig& cfg);

/// Same training loop without touching the filesystem (sweeps, tests).
TrainOutputs train_in_memory(const ExperimentConfig& cfg, const DatasetBundle& data);

struct ViiOutputs {
    ViiReport report;
    EvalResult eval;
    std::string csv_path, json_path;
    std::vector<std::string> grid_paths;
};

/// VII report over the test split: vii.csv, summary.json, optional
/// input/gradient grids.
ViiOutputs run_vii(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                   bool export_grids = false, std::size_t grid_count = 80);

struct SweepRow {
    std::string key; // beta value or noise kind / "standard"
    double accuracy = 0.0;
    double mean_vii = 0.0;
};

extern const std::vector<double> kDefaultBetaSweep; // 0.0 .. 1.0

/// Train one model per beta (noise_mod regime) and report test accuracy
/// and VII; writes sweep_beta.csv.
std::vector<SweepRow> run_sweep_beta(const ExperimentConfig& cfg,
                                     const std::vector<double>& betas = kDefaultBetaSweep);

/// Standard baseline plus one noise_mod model per noise kind; writes
/// sweep_noise.csv.
std::vector<SweepRow> run_sweep_noise(const ExperimentConfig& cfg);

struct BenchRow {
    std::string regime;
    double epoch_seconds = 0.0;
    double backwards_per_example_step = 0.0; // 1 standard, 1 noise_mod, T+1 adv
};

struct BenchOutputs {
    std::vector<BenchRow> rows;
    std::string json_path;
};

/// One timed training epoch per regime on the configured dataset.
BenchOutputs run_bench(const ExperimentConfig& cfg);

/// Inputs grid plus one gradient grid per checkpoint over the first
/// `count` test examples; returns the written PNG paths.
std::vector<std::string> run_visualize(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& checkpoint_paths,
                                       std::size_t count = 80, std::size_t cols = 10);

EvalResult run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path);

} // namespace noisemod

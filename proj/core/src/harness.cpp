#include "noisemod/harness.hpp"

#include "noisemod/adversarial.hpp"
#include "noisemod/error.hpp"
#include "noisemod/image.hpp"
#include "noisemod/modulation.hpp"
#include "noisemod/parallel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace noisemod {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// RNG purpose keys; every consumer owns a stream derived from
// (seed, purpose, epoch, example index) so regimes never perturb each
// other's sequences.
constexpr std::uint64_t kKeyInit = 1;
constexpr std::uint64_t kKeyShuffle = 2;
constexpr std::uint64_t kKeyCarrier = 3;
constexpr std::uint64_t kKeyAttack = 4;
constexpr std::uint64_t kKeyData = 5;
constexpr std::uint64_t kKeyMult = 6;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw DataError("write failed for " + path);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
        std::swap(idx[i - 1], idx[j < i ? j : i - 1]);
    }
    return idx;
}

struct EpochStats {
    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t examples = 0;
};

/// One pass over the training split under the configured regime.
EpochStats run_training_epoch(Checkpoint& ckpt, const LabeledDataset& train,
                              const ExperimentConfig& cfg, std::size_t epoch,
                              const RngStream& root,
                              std::vector<std::optional<Carrier>>* carrier_cache) {
    const NoiseDistribution dist = NoiseDistribution::standard(cfg.noise);
    const std::vector<std::size_t> order =
        shuffled_indices(train.size(), root.derive({kKeyShuffle, epoch}));

    EpochStats stats;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        std::vector<Tensor> xs;
        std::vector<int> ys;
        xs.reserve(end - start);
        ys.reserve(end - start);

        for (std::size_t k = start; k < end; ++k) {
            const std::size_t gi = order[k];
            const Tensor& x = train.images[gi];
            switch (cfg.regime) {
                case Regime::Standard:
                case Regime::AdvTrain: xs.push_back(x); break;
                case Regime::NoiseMod: {
                    if (cfg.fixed_carriers) {
                        auto& slot = (*carrier_cache)[gi];
                        if (!slot) {
                            RngStream crng = root.derive({kKeyCarrier, 0, gi});
                            slot = make_carrier(cfg.beta, dist, x.shape, crng);
                            slot->delta = Tensor();    // keep only what modulate()
                            slot->residual = Tensor(); // needs; the cache is large
                        }
                        xs.push_back(modulate(x, *slot));
                    } else {
                        RngStream crng = root.derive({kKeyCarrier, epoch, gi});
                        const Carrier carrier = make_carrier(cfg.beta, dist, x.shape, crng);
                        xs.push_back(modulate(x, carrier));
                    }
                    break;
                }
                case Regime::MultApprox: {
                    RngStream mrng = root.derive({kKeyMult, epoch, gi});
                    xs.push_back(multiplicative_approx(x, cfg.mult_alpha, dist, mrng));
                    break;
                }
            }
            ys.push_back(train.labels[gi]);
        }

        BatchGradients bg;
        if (cfg.regime == Regime::AdvTrain) {
            RngStream arng = root.derive({kKeyAttack, epoch, start});
            bg = adversarial_train_step(ckpt, xs, ys, cfg.attack, arng, cfg.threads);
        } else {
            bg = train_step(ckpt, xs, ys, cfg.threads);
        }
        stats.loss_sum += bg.mean_loss * static_cast<double>(xs.size());
        stats.correct += bg.correct;
        stats.examples += xs.size();
    }
    return stats;
}

LabeledDataset make_synthetic_split(const ExperimentConfig& cfg, std::uint64_t stream_key,
                                    std::size_t count, const std::string& split) {
    SyntheticSpec spec;
    spec.classes = cfg.synth_classes;
    spec.count = count;
    spec.channels = cfg.synth_channels;
    spec.height = cfg.synth_height;
    spec.width = cfg.synth_width;
    spec.noise = cfg.synth_noise;
    RngStream rng = RngStream(cfg.seed).derive({kKeyData, stream_key});
    LabeledDataset ds = synthetic_dataset(spec, rng);
    ds.split = split;
    return ds;
}

} // namespace

DatasetBundle load_datasets(const ExperimentConfig& cfg) {
    LabeledDataset train, test;
    switch (cfg.dataset) {
        case DatasetKind::Synthetic: {
            const std::size_t test_count =
                cfg.test_count > 0 ? cfg.test_count : std::max<std::size_t>(cfg.synth_count / 5, 100);
            train = make_synthetic_split(cfg, 0, cfg.synth_count, "train");
            test = make_synthetic_split(cfg, 1, test_count, "test");
            break;
        }
        case DatasetKind::Mnist: {
            const fs::path dir(cfg.data_dir);
            train = load_idx((dir / "train-images-idx3-ubyte").string(),
                             (dir / "train-labels-idx1-ubyte").string());
            test = load_idx((dir / "t10k-images-idx3-ubyte").string(),
                            (dir / "t10k-labels-idx1-ubyte").string());
            break;
        }
        case DatasetKind::Cifar10: {
            const fs::path dir(cfg.data_dir);
            std::vector<std::string> train_paths;
            for (int i = 1; i <= 5; ++i)
                train_paths.push_back((dir / ("data_batch_" + std::to_string(i) + ".bin")).string());
            train = load_cifar10_binary(train_paths);
            test = load_cifar10_binary({(dir / "test_batch.bin").string()});
            break;
        }
    }
    train = train.take(cfg.train_count);
    test = test.take(cfg.test_count);
    train.split = "train";
    test.split = "test";

    DatasetBundle bundle;
    auto [head, tail] = train.split_tail(cfg.val_fraction);
    bundle.train = std::move(head);
    bundle.val = std::move(tail);
    bundle.test = std::move(test);

    compute_normalization(bundle.train);
    bundle.val.norm_mean = bundle.train.norm_mean;
    bundle.val.norm_std = bundle.train.norm_std;
    bundle.test.norm_mean = bundle.train.norm_mean;
    bundle.test.norm_std = bundle.train.norm_std;
    return bundle;
}

std::string metrics_csv_header() { return "epoch,split,accuracy,loss,vii,wallclock_s"; }

std::string to_csv_row(const EpochRow& row) {
    std::ostringstream os;
    os << row.epoch << "," << row.split << "," << fmt_double(row.accuracy) << ","
       << fmt_double(row.loss) << ",";
    if (row.vii) os << fmt_double(*row.vii);
    os << "," << fmt_double(row.wallclock_s);
    return os.str();
}

TrainOutputs train_in_memory(const ExperimentConfig& cfg, const DatasetBundle& data) {
    cfg.validate();
    if (data.train.size() == 0) throw DataError("train_in_memory: empty training split");

    ModelSpec spec = ModelSpec::make(cfg.arch, data.train.channels, data.train.height,
                                     data.train.width, data.train.classes);
    spec.norm_mean = data.train.norm_mean;
    spec.norm_std = data.train.norm_std;

    const RngStream root(cfg.seed);
    RngStream init_rng = root.derive({kKeyInit});
    Checkpoint ckpt = build(spec, init_rng);
    ckpt.opt.lr = cfg.lr;

    std::vector<std::optional<Carrier>> carrier_cache;
    if (cfg.regime == Regime::NoiseMod && cfg.fixed_carriers)
        carrier_cache.resize(data.train.size());

    TrainOutputs out;
    out.cfg = cfg;
    out.best = ckpt;
    out.best.best_val_accuracy = -1.0; // first evaluation always records

    const std::uint64_t backward_before = Tape::backward_pass_count();
    const auto t_start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        const EpochStats stats =
            run_training_epoch(ckpt, data.train, cfg, epoch, root, &carrier_cache);
        out.examples_trained += stats.examples;

        EpochRow train_row;
        train_row.epoch = epoch + 1;
        train_row.split = "train";
        train_row.accuracy = static_cast<double>(stats.correct) /
                             static_cast<double>(std::max<std::size_t>(stats.examples, 1));
        train_row.loss = stats.loss_sum / static_cast<double>(std::max<std::size_t>(stats.examples, 1));
        train_row.wallclock_s = seconds_since(t_epoch);
        out.rows.push_back(train_row);

        if (data.val.size() > 0) {
            const EvalResult val = evaluate(ckpt, data.val.images, data.val.labels, cfg.threads);
            EpochRow val_row;
            val_row.epoch = epoch + 1;
            val_row.split = "val";
            val_row.accuracy = val.accuracy;
            val_row.loss = val.mean_loss;
            if (cfg.track_vii)
                val_row.vii = vii(ckpt, data.val.images, data.val.labels, cfg.threads).mean_vii;
            val_row.wallclock_s = seconds_since(t_epoch);
            out.rows.push_back(val_row);

            // >= keeps the most-trained checkpoint among accuracy ties.
            if (val.accuracy >= out.best.best_val_accuracy) {
                out.best = ckpt;
                out.best.epoch = static_cast<std::uint32_t>(epoch + 1);
                out.best.best_val_accuracy = val.accuracy;
            }
        } else {
            out.best = ckpt;
            out.best.epoch = static_cast<std::uint32_t>(epoch + 1);
        }
    }

    out.last = std::move(ckpt);
    out.last.epoch = static_cast<std::uint32_t>(cfg.epochs);
    out.total_seconds = seconds_since(t_start);
    out.backward_passes = Tape::backward_pass_count() - backward_before;
    if (out.best.best_val_accuracy < 0.0) out.best.best_val_accuracy = 0.0;
    return out;
}

TrainOutputs run_train(const ExperimentConfig& cfg) {
    const DatasetBundle data = load_datasets(cfg);
    TrainOutputs out = train_in_memory(cfg, data);

    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id();
    fs::create_directories(dir);
    out.dir = dir.string();

    out.checkpoint_path = (dir / "checkpoint.nmck").string();
    save_checkpoint(out.best, out.checkpoint_path);

    std::ostringstream csv;
    csv << metrics_csv_header() << "\n";
    for (const EpochRow& row : out.rows) csv << to_csv_row(row) << "\n";
    out.metrics_path = (dir / "metrics.csv").string();
    write_text(out.metrics_path, csv.str());

    out.echo_path = (dir / "config.echo").string();
    write_text(out.echo_path, cfg.echo());
    return out;
}

ViiOutputs run_vii(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                   bool export_grids, std::size_t grid_count) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const DatasetBundle data = load_datasets(cfg);
    if (data.test.image_shape() != ckpt.spec.input_shape())
        throw ShapeError("vii: dataset shape " + Tensor(data.test.image_shape()).shape_str() +
                         " does not match checkpoint input " +
                         Tensor(ckpt.spec.input_shape()).shape_str());

    ViiOutputs out;
    out.report = vii(ckpt, data.test.images, data.test.labels, cfg.threads);
    out.eval = evaluate(ckpt, data.test.images, data.test.labels, cfg.threads);

    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id();
    fs::create_directories(dir);

    std::ostringstream csv;
    csv << "index,label,vii\n";
    for (std::size_t i = 0; i < out.report.per_example.size(); ++i)
        csv << i << "," << out.report.labels[i] << "," << fmt_double(out.report.per_example[i])
            << "\n";
    csv << "mean,," << fmt_double(out.report.mean_vii) << "\n";
    out.csv_path = (dir / "vii.csv").string();
    write_text(out.csv_path, csv.str());

    json summary;
    summary["mean_vii"] = out.report.mean_vii;
    summary["accuracy"] = out.eval.accuracy;
    summary["mean_loss"] = out.eval.mean_loss;
    summary["examples"] = out.report.count;
    summary["loss_tag"] = out.report.loss_tag;
    summary["checkpoint"] = checkpoint_path;
    summary["config_hash"] = cfg.config_hash();
    out.json_path = (dir / "summary.json").string();
    write_text(out.json_path, summary.dump(2) + "\n");

    if (export_grids) {
        const std::size_t n = std::min<std::size_t>(grid_count, data.test.size());
        std::vector<Tensor> inputs(data.test.images.begin(),
                                   data.test.images.begin() + static_cast<long>(n));
        std::vector<Tensor> grads(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            grads[i] = gradient_image(
                input_gradient(ckpt, data.test.images[i], data.test.labels[i]));
        });
        const fs::path grids = dir / "grids";
        fs::create_directories(grids);
        out.grid_paths.push_back(export_image_grid(inputs, (grids / "inputs").string()));
        out.grid_paths.push_back(export_image_grid(grads, (grids / "gradients").string()));
    }
    return out;
}

const std::vector<double> kDefaultBetaSweep = {0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0};

namespace {

SweepRow evaluate_trained(const ExperimentConfig& cfg, const DatasetBundle& data,
                          const std::string& key) {
    const TrainOutputs t = train_in_memory(cfg, data);
    SweepRow row;
    row.key = key;
    row.accuracy = evaluate(t.best, data.test.images, data.test.labels, cfg.threads).accuracy;
    row.mean_vii = vii(t.best, data.test.images, data.test.labels, cfg.threads).mean_vii;
    return row;
}

void write_sweep_csv(const std::string& path, const std::string& key_name,
                     const std::vector<SweepRow>& rows) {
    std::ostringstream csv;
    csv << key_name << ",accuracy,mean_vii\n";
    for (const SweepRow& row : rows)
        csv << row.key << "," << fmt_double(row.accuracy) << "," << fmt_double(row.mean_vii)
            << "\n";
    write_text(path, csv.str());
}

} // namespace

std::vector<SweepRow> run_sweep_beta(const ExperimentConfig& cfg,
                                     const std::vector<double>& betas) {
    const DatasetBundle data = load_datasets(cfg);
    std::vector<SweepRow> rows;
    for (double beta : betas) {
        ExperimentConfig sub = cfg;
        sub.regime = Regime::NoiseMod;
        sub.beta = beta;
        std::ostringstream key;
        key << beta;
        rows.push_back(evaluate_trained(sub, data, key.str()));
    }
    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id();
    fs::create_directories(dir);
    write_sweep_csv((dir / "sweep_beta.csv").string(), "beta", rows);
    return rows;
}

std::vector<SweepRow> run_sweep_noise(const ExperimentConfig& cfg) {
    const DatasetBundle data = load_datasets(cfg);
    std::vector<SweepRow> rows;

    ExperimentConfig base = cfg;
    base.regime = Regime::Standard;
    rows.push_back(evaluate_trained(base, data, "standard"));

    for (NoiseKind kind : {NoiseKind::Gaussian, NoiseKind::Uniform, NoiseKind::Laplace,
                           NoiseKind::Gamma, NoiseKind::Exponential, NoiseKind::Rayleigh}) {
        ExperimentConfig sub = cfg;
        sub.regime = Regime::NoiseMod;
        sub.noise = kind;
        rows.push_back(evaluate_trained(sub, data, to_string(kind)));
    }

    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id();
    fs::create_directories(dir);
    write_sweep_csv((dir / "sweep_noise.csv").string(), "noise", rows);
    return rows;
}

BenchOutputs run_bench(const ExperimentConfig& cfg) {
    const DatasetBundle data = load_datasets(cfg);

    BenchOutputs out;
    for (Regime regime : {Regime::Standard, Regime::NoiseMod, Regime::AdvTrain}) {
        ExperimentConfig sub = cfg;
        sub.regime = regime;
        sub.epochs = 1;
        sub.track_vii = false;

        ModelSpec spec = ModelSpec::make(sub.arch, data.train.channels, data.train.height,
                                         data.train.width, data.train.classes);
        spec.norm_mean = data.train.norm_mean;
        spec.norm_std = data.train.norm_std;
        RngStream init_rng = RngStream(sub.seed).derive({kKeyInit});
        Checkpoint ckpt = build(spec, init_rng);
        ckpt.opt.lr = sub.lr;

        std::vector<std::optional<Carrier>> cache;
        if (regime == Regime::NoiseMod && sub.fixed_carriers) cache.resize(data.train.size());

        const std::uint64_t before = Tape::backward_pass_count();
        const auto t0 = std::chrono::steady_clock::now();
        const EpochStats stats =
            run_training_epoch(ckpt, data.train, sub, 0, RngStream(sub.seed), &cache);
        const double elapsed = seconds_since(t0);
        const std::uint64_t passes = Tape::backward_pass_count() - before;

        BenchRow row;
        row.regime = to_string(regime);
        row.epoch_seconds = elapsed;
        row.backwards_per_example_step =
            static_cast<double>(passes) / static_cast<double>(stats.examples);
        out.rows.push_back(row);
    }

    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id();
    fs::create_directories(dir);
    json report;
    for (const BenchRow& row : out.rows)
        report["regimes"][row.regime] = {{"epoch_seconds", row.epoch_seconds},
                                         {"backwards_per_example_step",
                                          row.backwards_per_example_step}};
    report["attack_steps"] = cfg.attack.steps;
    report["examples"] = data.train.size();
    out.json_path = (dir / "bench.json").string();
    write_text(out.json_path, report.dump(2) + "\n");
    return out;
}

std::vector<std::string> run_visualize(const ExperimentConfig& cfg,
                                       const std::vector<std::string>& checkpoint_paths,
                                       std::size_t count, std::size_t cols) {
    const DatasetBundle data = load_datasets(cfg);
    const std::size_t n = std::min<std::size_t>(count, data.test.size());
    if (n == 0) throw DataError("visualize: empty test split");

    const fs::path dir = fs::path(cfg.outdir) / cfg.experiment_id() / "grids";
    fs::create_directories(dir);

    std::vector<std::string> written;
    std::vector<Tensor> inputs(data.test.images.begin(),
                               data.test.images.begin() + static_cast<long>(n));
    written.push_back(export_image_grid(inputs, (dir / "inputs").string(), cols));

    for (std::size_t k = 0; k < checkpoint_paths.size(); ++k) {
        const std::string& path = checkpoint_paths[k];
        const Checkpoint ckpt = load_checkpoint(path);
        if (data.test.image_shape() != ckpt.spec.input_shape())
            throw ShapeError("visualize: dataset does not match checkpoint " + path);
        std::vector<Tensor> grads(n);
        parallel_for(n, cfg.threads, [&](std::size_t i) {
            grads[i] = gradient_image(
                input_gradient(ckpt, data.test.images[i], data.test.labels[i]));
        });
        // The generic file name "checkpoint" would collide across runs, so
        // prefer the experiment directory name.
        std::string stem = fs::path(path).stem().string();
        if (stem == "checkpoint" && fs::path(path).has_parent_path())
            stem = fs::path(path).parent_path().filename().string();
        written.push_back(export_image_grid(
            grads, (dir / ("grad_" + std::to_string(k) + "_" + stem)).string(), cols));
    }
    return written;
}

EvalResult run_eval(const ExperimentConfig& cfg, const std::string& checkpoint_path) {
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const DatasetBundle data = load_datasets(cfg);
    if (data.test.image_shape() != ckpt.spec.input_shape())
        throw ShapeError("eval: dataset shape does not match checkpoint input");
    return evaluate(ckpt, data.test.images, data.test.labels, cfg.threads);
}

} // namespace noisemod

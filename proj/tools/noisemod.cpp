// Experiment driver: train/eval/vii/sweep-beta/sweep-noise/visualize/bench.
// Exit codes: 0 success, 1 config error, 2 data error, 3 numerical failure.

#include "noisemod/error.hpp"
#include "noisemod/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

using namespace noisemod;

/// Shared experiment options for every subcommand. Precedence:
/// command-line flag > NOISEMOD_SEED env (seed only) > --config file >
/// built-in default.
class ExperimentCli {
public:
    void attach(CLI::App* app) {
        app->add_option("--config", config_path_, "Config file (key = value, [attack] section)");
        bind(app, "--regime", regime_, "standard | noise_mod | adv_train | mult_approx");
        bind(app, "--arch", arch_, "mlp3 | fcnn6 | lenet");
        bind(app, "--dataset", dataset_, "synthetic | mnist | cifar10");
        bind(app, "--data-dir", data_dir_, "Directory with MNIST IDX / CIFAR-10 binary files");
        bind(app, "--train-count", train_count_, "Training examples to keep (0 = all)");
        bind(app, "--test-count", test_count_, "Test examples to keep (0 = all)");
        bind(app, "--val-fraction", val_fraction_, "Trailing fraction of train used for validation");
        bind(app, "--synth-classes", synth_classes_, "Synthetic dataset classes");
        bind(app, "--synth-count", synth_count_, "Synthetic training examples");
        bind(app, "--synth-noise", synth_noise_, "Synthetic pixel noise level");
        bind(app, "--epochs", epochs_, "Training epochs");
        bind(app, "--batch-size", batch_size_, "Mini-batch size");
        bind(app, "--lr", lr_, "Adam learning rate");
        bind(app, "--beta", beta_, "Constant-component ratio of the carrier, in [0,1]");
        bind(app, "--noise", noise_, "gaussian | uniform | laplace | gamma | exponential | rayleigh");
        bind(app, "--fixed-carriers", fixed_carriers_, "Cache one carrier per example");
        bind(app, "--mult-alpha", mult_alpha_, "Alpha for the mult_approx regime");
        bind(app, "--seed", seed_, "Random seed (overridden by NOISEMOD_SEED only when this flag is absent)");
        bind(app, "--outdir", outdir_, "Output directory root");
        bind(app, "--name", name_, "Experiment id (default: derived from the config)");
        bind(app, "--threads", threads_, "Worker threads (0 = hardware)");
        bind(app, "--track-vii", track_vii_, "Per-epoch VII on the validation split");
        bind(app, "--attack.epsilon", atk_eps_, "l-inf radius in [0,1] pixel units");
        bind(app, "--attack.alpha", atk_alpha_, "Attack step size");
        bind(app, "--attack.steps", atk_steps_, "PGD iterations");
        bind(app, "--attack.random-init", atk_rand_, "Uniform start in the epsilon ball");
        bind(app, "--attack.box-clamp", atk_clamp_, "Clamp perturbed pixels to [0,1]");
    }

    ExperimentConfig resolve() const {
        ExperimentConfig cfg;
        std::optional<std::uint64_t> config_seed;
        if (!config_path_.empty()) {
            const auto kv = parse_config_file(config_path_);
            if (auto it = kv.find("seed"); it != kv.end())
                config_seed = std::stoull(it->second);
            apply_config(cfg, kv);
        }

        set_if(regime_, [&](const std::string& v) { cfg.regime = parse_regime(v); });
        set_if(arch_, [&](const std::string& v) { cfg.arch = parse_arch(v); });
        set_if(dataset_, [&](const std::string& v) { cfg.dataset = parse_dataset_kind(v); });
        set_if(data_dir_, [&](const std::string& v) { cfg.data_dir = v; });
        set_if(train_count_, [&](std::size_t v) { cfg.train_count = v; });
        set_if(test_count_, [&](std::size_t v) { cfg.test_count = v; });
        set_if(val_fraction_, [&](double v) { cfg.val_fraction = v; });
        set_if(synth_classes_, [&](int v) { cfg.synth_classes = v; });
        set_if(synth_count_, [&](std::size_t v) { cfg.synth_count = v; });
        set_if(synth_noise_, [&](double v) { cfg.synth_noise = v; });
        set_if(epochs_, [&](std::size_t v) { cfg.epochs = v; });
        set_if(batch_size_, [&](std::size_t v) { cfg.batch_size = v; });
        set_if(lr_, [&](double v) { cfg.lr = v; });
        set_if(beta_, [&](double v) { cfg.beta = v; });
        set_if(noise_, [&](const std::string& v) { cfg.noise = parse_noise_kind(v); });
        set_if(fixed_carriers_, [&](bool v) { cfg.fixed_carriers = v; });
        set_if(mult_alpha_, [&](double v) { cfg.mult_alpha = v; });
        set_if(outdir_, [&](const std::string& v) { cfg.outdir = v; });
        set_if(name_, [&](const std::string& v) { cfg.name = v; });
        set_if(threads_, [&](unsigned v) { cfg.threads = v; });
        set_if(track_vii_, [&](bool v) { cfg.track_vii = v; });
        set_if(atk_eps_, [&](double v) { cfg.attack.epsilon = v; });
        set_if(atk_alpha_, [&](double v) { cfg.attack.alpha = v; });
        set_if(atk_steps_, [&](int v) { cfg.attack.steps = v; });
        set_if(atk_rand_, [&](bool v) { cfg.attack.random_init = v; });
        set_if(atk_clamp_, [&](bool v) { cfg.attack.box_clamp = v; });

        cfg.seed = resolve_seed(seed_.option->count() ? std::optional(seed_.value) : std::nullopt,
                                env_seed(), config_seed);
        cfg.validate();
        return cfg;
    }

private:
    template <typename T>
    struct Bound {
        T value{};
        CLI::Option* option = nullptr;
    };

    template <typename T>
    static void bind_impl(CLI::App* app, const std::string& flag, Bound<T>& slot,
                          const std::string& help) {
        slot.option = app->add_option(flag, slot.value, help);
    }
    static void bind_impl(CLI::App* app, const std::string& flag, Bound<bool>& slot,
                          const std::string& help) {
        slot.option = app->add_flag(flag + ",!" + flag + "-off", slot.value, help);
    }
    template <typename T>
    void bind(CLI::App* app, const std::string& flag, Bound<T>& slot, const std::string& help) {
        bind_impl(app, flag, slot, help);
    }

    template <typename T, typename F>
    static void set_if(const Bound<T>& slot, F apply) {
        if (slot.option != nullptr && slot.option->count() > 0) apply(slot.value);
    }

    std::string config_path_;
    Bound<std::string> regime_, arch_, dataset_, data_dir_, noise_, outdir_, name_;
    Bound<std::size_t> train_count_, test_count_, synth_count_, epochs_, batch_size_;
    Bound<int> synth_classes_, atk_steps_;
    Bound<double> val_fraction_, synth_noise_, lr_, beta_, mult_alpha_, atk_eps_, atk_alpha_;
    Bound<std::uint64_t> seed_;
    Bound<unsigned> threads_;
    Bound<bool> fixed_carriers_, track_vii_, atk_rand_, atk_clamp_;
};

int dispatch(int argc, char** argv) {
    CLI::App app{"noisemod: training lab for noise-modulation, adversarial and standard "
                 "training with input-gradient interpretability reports"};
    app.require_subcommand(1);

    ExperimentCli train_cli, eval_cli, vii_cli, sweepb_cli, sweepn_cli, vis_cli, bench_cli;

    CLI::App* train = app.add_subcommand("train", "Train one model under a regime");
    train_cli.attach(train);

    CLI::App* eval = app.add_subcommand("eval", "Accuracy/loss of a checkpoint on the test split");
    eval_cli.attach(eval);
    std::string eval_ckpt;
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();

    CLI::App* viic = app.add_subcommand("vii", "Input-gradient interpretability report");
    vii_cli.attach(viic);
    std::string vii_ckpt;
    bool vii_grids = false;
    std::size_t vii_grid_count = 80;
    viic->add_option("--checkpoint", vii_ckpt, "Checkpoint file")->required();
    viic->add_flag("--grids", vii_grids, "Export input/gradient grids");
    viic->add_option("--grid-count", vii_grid_count, "Examples per grid");

    CLI::App* sweepb = app.add_subcommand("sweep-beta", "Accuracy/VII across carrier betas");
    sweepb_cli.attach(sweepb);
    std::vector<double> betas;
    sweepb->add_option("--betas", betas, "Beta values (default 0.0 0.2 0.4 0.5 0.6 0.8 1.0)");

    CLI::App* sweepn = app.add_subcommand("sweep-noise", "Accuracy/VII across noise kinds");
    sweepn_cli.attach(sweepn);

    CLI::App* vis = app.add_subcommand("visualize", "Input and gradient grids per checkpoint");
    vis_cli.attach(vis);
    std::vector<std::string> vis_ckpts;
    std::size_t vis_count = 80, vis_cols = 10;
    vis->add_option("--checkpoint", vis_ckpts, "Checkpoint file(s)")->required();
    vis->add_option("--count", vis_count, "Examples per grid");
    vis->add_option("--cols", vis_cols, "Grid columns");

    CLI::App* bench = app.add_subcommand("bench", "Per-epoch wall clock and backward-pass counts");
    bench_cli.attach(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (train->parsed()) {
        const TrainOutputs out = run_train(train_cli.resolve());
        std::cout << "experiment = " << out.cfg.experiment_id() << "\n"
                  << "best_epoch = " << out.best.epoch << "\n"
                  << "best_val_accuracy = " << out.best.best_val_accuracy << "\n"
                  << "checkpoint = " << out.checkpoint_path << "\n"
                  << "metrics = " << out.metrics_path << "\n"
                  << "config_echo = " << out.echo_path << "\n"
                  << "seconds = " << out.total_seconds << "\n";
    } else if (eval->parsed()) {
        const EvalResult res = run_eval(eval_cli.resolve(), eval_ckpt);
        std::cout << "examples = " << res.count << "\n"
                  << "accuracy = " << res.accuracy << "\n"
                  << "mean_loss = " << res.mean_loss << "\n";
    } else if (viic->parsed()) {
        const ViiOutputs out = run_vii(vii_cli.resolve(), vii_ckpt, vii_grids, vii_grid_count);
        std::cout << "examples = " << out.report.count << "\n"
                  << "mean_vii = " << out.report.mean_vii << "\n"
                  << "accuracy = " << out.eval.accuracy << "\n"
                  << "csv = " << out.csv_path << "\n"
                  << "summary = " << out.json_path << "\n";
        for (const auto& p : out.grid_paths) std::cout << "grid = " << p << "\n";
    } else if (sweepb->parsed()) {
        const auto rows = betas.empty() ? run_sweep_beta(sweepb_cli.resolve())
                                        : run_sweep_beta(sweepb_cli.resolve(), betas);
        std::cout << "beta,accuracy,mean_vii\n";
        for (const auto& row : rows)
            std::cout << row.key << "," << row.accuracy << "," << row.mean_vii << "\n";
    } else if (sweepn->parsed()) {
        const auto rows = run_sweep_noise(sweepn_cli.resolve());
        std::cout << "noise,accuracy,mean_vii\n";
        for (const auto& row : rows)
            std::cout << row.key << "," << row.accuracy << "," << row.mean_vii << "\n";
    } else if (vis->parsed()) {
        const auto paths = run_visualize(vis_cli.resolve(), vis_ckpts, vis_count, vis_cols);
        for (const auto& p : paths) std::cout << "grid = " << p << "\n";
    } else if (bench->parsed()) {
        const BenchOutputs out = run_bench(bench_cli.resolve());
        std::cout << "regime,epoch_seconds,backwards_per_example_step\n";
        for (const auto& row : out.rows)
            std::cout << row.regime << "," << row.epoch_seconds << ","
                      << row.backwards_per_example_step << "\n";
        std::cout << "report = " << out.json_path << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const noisemod::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const noisemod::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const noisemod::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const noisemod::ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

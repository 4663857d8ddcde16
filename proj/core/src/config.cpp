#include "noisemod/config.hpp"

#include "noisemod/error.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace noisemod {

Regime parse_regime(const std::string& name) {
    if (name == "standard") return Regime::Standard;
    if (name == "noise_mod") return Regime::NoiseMod;
    if (name == "adv_train") return Regime::AdvTrain;
    if (name == "mult_approx") return Regime::MultApprox;
    throw ConfigError("unknown regime: " + name);
}

std::string to_string(Regime regime) {
    switch (regime) {
        case Regime::Standard: return "standard";
        case Regime::NoiseMod: return "noise_mod";
        case Regime::AdvTrain: return "adv_train";
        case Regime::MultApprox: return "mult_approx";
    }
    return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
    if (name == "synthetic") return DatasetKind::Synthetic;
    if (name == "mnist") return DatasetKind::Mnist;
    if (name == "cifar10") return DatasetKind::Cifar10;
    throw ConfigError("unknown dataset: " + name);
}

std::string to_string(DatasetKind kind) {
    switch (kind) {
        case DatasetKind::Synthetic: return "synthetic";
        case DatasetKind::Mnist: return "mnist";
        case DatasetKind::Cifar10: return "cifar10";
    }
    return "?";
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected boolean, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(u);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected nonnegative integer, got '" + v + "'");
    }
}

} // namespace

std::string ExperimentConfig::experiment_id() const {
    if (!name.empty()) return name;
    std::ostringstream os;
    os << to_string(regime) << "-" << to_string(arch) << "-" << to_string(dataset);
    if (regime == Regime::NoiseMod)
        os << "-" << to_string(noise) << "-b" << beta;
    if (regime == Regime::MultApprox) os << "-" << to_string(noise) << "-a" << mult_alpha;
    if (regime == Regime::AdvTrain) os << "-e" << attack.epsilon << "-T" << attack.steps;
    os << "-s" << seed;
    return os.str();
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    os << "# noisemod experiment config\n";
    os << "regime = " << to_string(regime) << "\n";
    os << "arch = " << to_string(arch) << "\n";
    os << "dataset = " << to_string(dataset) << "\n";
    os << "data_dir = " << data_dir << "\n";
    os << "train_count = " << train_count << "\n";
    os << "test_count = " << test_count << "\n";
    os << "val_fraction = " << fmt(val_fraction) << "\n";
    os << "synth_classes = " << synth_classes << "\n";
    os << "synth_count = " << synth_count << "\n";
    os << "synth_channels = " << synth_channels << "\n";
    os << "synth_height = " << synth_height << "\n";
    os << "synth_width = " << synth_width << "\n";
    os << "synth_noise = " << fmt(synth_noise) << "\n";
    os << "epochs = " << epochs << "\n";
    os << "batch_size = " << batch_size << "\n";
    os << "lr = " << fmt(lr) << "\n";
    os << "beta = " << fmt(beta) << "\n";
    os << "noise = " << to_string(noise) << "\n";
    os << "fixed_carriers = " << (fixed_carriers ? "true" : "false") << "\n";
    os << "mult_alpha = " << fmt(mult_alpha) << "\n";
    os << "seed = " << seed << "\n";
    os << "outdir = " << outdir << "\n";
    if (!name.empty()) os << "name = " << name << "\n";
    os << "threads = " << threads << "\n";
    os << "track_vii = " << (track_vii ? "true" : "false") << "\n";
    os << "\n[attack]\n";
    os << "epsilon = " << fmt(attack.epsilon) << "\n";
    os << "alpha = " << fmt(attack.alpha) << "\n";
    os << "steps = " << attack.steps << "\n";
    os << "random_init = " << (attack.random_init ? "true" : "false") << "\n";
    os << "box_clamp = " << (attack.box_clamp ? "true" : "false") << "\n";
    return os.str();
}

std::string ExperimentConfig::config_hash() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(echo());
    return os.str();
}

void ExperimentConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0,1]");
    if (mult_alpha < 0.0) throw ConfigError("mult_alpha must be nonnegative");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0))
        throw ConfigError("val_fraction must lie in [0,1)");
    if (attack.epsilon < 0.0) throw ConfigError("attack.epsilon must be nonnegative");
    if (attack.alpha <= 0.0) throw ConfigError("attack.alpha must be positive");
    if (attack.steps < 1) throw ConfigError("attack.steps must be >= 1");
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);

    std::map<std::string, std::string> kv;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (!section.empty()) key = section + "." + key;
        kv[key] = value;
    }
    return kv;
}

void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, v] : kv) {
        if (key == "regime") cfg.regime = parse_regime(v);
        else if (key == "arch") cfg.arch = parse_arch(v);
        else if (key == "dataset") cfg.dataset = parse_dataset_kind(v);
        else if (key == "data_dir") cfg.data_dir = v;
        else if (key == "train_count") cfg.train_count = parse_u64(key, v);
        else if (key == "test_count") cfg.test_count = parse_u64(key, v);
        else if (key == "val_fraction") cfg.val_fraction = parse_double(key, v);
        else if (key == "synth_classes") cfg.synth_classes = static_cast<int>(parse_u64(key, v));
        else if (key == "synth_count") cfg.synth_count = parse_u64(key, v);
        else if (key == "synth_channels") cfg.synth_channels = parse_u64(key, v);
        else if (key == "synth_height") cfg.synth_height = parse_u64(key, v);
        else if (key == "synth_width") cfg.synth_width = parse_u64(key, v);
        else if (key == "synth_noise") cfg.synth_noise = parse_double(key, v);
        else if (key == "epochs") cfg.epochs = parse_u64(key, v);
        else if (key == "batch_size") cfg.batch_size = parse_u64(key, v);
        else if (key == "lr") cfg.lr = parse_double(key, v);
        else if (key == "beta") cfg.beta = parse_double(key, v);
        else if (key == "noise") cfg.noise = parse_noise_kind(v);
        else if (key == "fixed_carriers") cfg.fixed_carriers = parse_bool(key, v);
        else if (key == "mult_alpha") cfg.mult_alpha = parse_double(key, v);
        else if (key == "seed") cfg.seed = parse_u64(key, v);
        else if (key == "outdir") cfg.outdir = v;
        else if (key == "name") cfg.name = v;
        else if (key == "threads") cfg.threads = static_cast<unsigned>(parse_u64(key, v));
        else if (key == "track_vii") cfg.track_vii = parse_bool(key, v);
        else if (key == "attack.epsilon") cfg.attack.epsilon = parse_double(key, v);
        else if (key == "attack.alpha") cfg.attack.alpha = parse_double(key, v);
        else if (key == "attack.steps") cfg.attack.steps = static_cast<int>(parse_u64(key, v));
        else if (key == "attack.random_init") cfg.attack.random_init = parse_bool(key, v);
        else if (key == "attack.box_clamp") cfg.attack.box_clamp = parse_bool(key, v);
        else throw ConfigError("unknown config key: " + key);
    }
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> env,
                           std::optional<std::uint64_t> config_value) {
    if (flag) return *flag;
    if (env) return *env;
    if (config_value) return *config_value;
    return 0;
}

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("NOISEMOD_SEED");
    if (raw == nullptr) return std::nullopt;
    return parse_u64("NOISEMOD_SEED", raw);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace noisemod

#include <CLI11.hpp>

#include <cstdio>
#include <optional>

#include "ffgaf/commands.hpp"
#include "ffgaf/csv.hpp"

namespace {

using ffgaf::experiment_config;

struct overrides {
    std::optional<std::string> dataset, strategy, loss, feature_source, preset;
    std::optional<std::vector<int>> arch, strides;
    std::optional<int> kernel, t_steps, levels, batch_size, epochs, train_limit, test_limit;
    std::optional<int> synth_classes, synth_per_class, synth_channels, synth_height, synth_width;
    std::optional<double> thresh, shift_phi, alloc_phi, lr, grad_clip, affine_lr_scale,
        initial_charge_frac;
    std::optional<double> synth_separation;
    std::optional<std::uint64_t> seed;
    bool quant_in_loss = false;
    bool eq5_literal = false;
    bool literal_loss = false;
    bool no_standardize = false;
    bool exclude_encoding = false;
};

void add_common_options(CLI::App* cmd, std::string& config_path, overrides& ov,
                        ffgaf::data_paths& paths) {
    cmd->add_option("--config", config_path, "experiment config file (key = value lines)");
    cmd->add_option("--dataset", ov.dataset, "mnist | fashion_mnist | cifar10 | synthetic");
    cmd->add_option("--arch", ov.arch, "channels per block, e.g. --arch 16 32")->delimiter(',');
    cmd->add_option("--strides", ov.strides, "stride per block")->delimiter(',');
    cmd->add_option("--kernel", ov.kernel, "square kernel size");
    cmd->add_option("--t-steps", ov.t_steps, "spiking horizon T");
    cmd->add_option("--thresh", ov.thresh, "IF threshold / regularizer scale");
    cmd->add_option("--levels", ov.levels, "quantization levels L");
    cmd->add_option("--shift-phi", ov.shift_phi, "quantized activation shift");
    cmd->add_option("--alloc-phi", ov.alloc_phi, "allocation uniformity phi");
    cmd->add_option("--alloc-strategy", ov.strategy,
                    "complexity_aware | uniform | worst_case");
    cmd->add_option("--lr", ov.lr, "SGD learning rate");
    cmd->add_option("--grad-clip", ov.grad_clip, "per-tensor update norm bound (0 disables)");
    cmd->add_option("--affine-lr-scale", ov.affine_lr_scale,
                    "gamma/beta learning rate relative to the conv rate");
    cmd->add_option("--batch-size", ov.batch_size, "mini-batch size");
    cmd->add_option("--epochs", ov.epochs, "training epochs");
    cmd->add_option("--seed", ov.seed, "root seed; all randomness derives from it");
    cmd->add_option("--loss-mode", ov.loss, "softmax | literal");
    cmd->add_flag("--literal-loss", ov.literal_loss, "shorthand for --loss-mode literal");
    cmd->add_flag("--eq5-literal", ov.eq5_literal,
                  "goodness divisor without the horizon factor");
    cmd->add_flag("--quant-in-loss", ov.quant_in_loss,
                  "use the quantized activation on the loss path");
    cmd->add_option("--feature-source", ov.feature_source, "raw_pixels | encoder");
    cmd->add_flag("--no-standardize", ov.no_standardize, "skip input standardization");
    cmd->add_flag("--exclude-encoding", ov.exclude_encoding,
                  "drop the encoding block from prediction aggregation");
    cmd->add_option("--train-limit", ov.train_limit, "use only the first N training samples");
    cmd->add_option("--test-limit", ov.test_limit, "use only the first N test samples");
    cmd->add_option("--initial-charge-frac", ov.initial_charge_frac,
                    "membrane preload as a fraction of thresh");
    cmd->add_option("--synth-classes", ov.synth_classes, "synthetic: class count");
    cmd->add_option("--synth-per-class", ov.synth_per_class, "synthetic: samples per class");
    cmd->add_option("--synth-channels", ov.synth_channels, "synthetic: image channels");
    cmd->add_option("--synth-height", ov.synth_height, "synthetic: image height");
    cmd->add_option("--synth-width", ov.synth_width, "synthetic: image width");
    cmd->add_option("--synth-separation", ov.synth_separation, "synthetic: class separation");
    cmd->add_option("--synth-preset", ov.preset, "blobs | skewed");

    cmd->add_option("--data-dir", paths.data_dir, "dataset root directory");
    cmd->add_option("--train-images", paths.train_images, "explicit IDX train image file");
    cmd->add_option("--train-labels", paths.train_labels, "explicit IDX train label file");
    cmd->add_option("--test-images", paths.test_images, "explicit IDX test image file");
    cmd->add_option("--test-labels", paths.test_labels, "explicit IDX test label file");
    cmd->add_option("--cifar-train", paths.cifar_train, "explicit CIFAR-10 train batch files");
    cmd->add_option("--cifar-test", paths.cifar_test, "explicit CIFAR-10 test batch file");
}

experiment_config resolve_config(const std::string& config_path, const overrides& ov) {
    experiment_config cfg;
    if (!config_path.empty()) cfg = ffgaf::parse_config_file(config_path);
    if (ov.dataset) cfg.dataset = *ov.dataset;
    if (ov.arch) cfg.arch = *ov.arch;
    if (ov.strides) cfg.strides = *ov.strides;
    if (ov.kernel) cfg.kernel = *ov.kernel;
    if (ov.t_steps) cfg.t_steps = *ov.t_steps;
    if (ov.thresh) cfg.thresh = *ov.thresh;
    if (ov.levels) cfg.levels = *ov.levels;
    if (ov.shift_phi) cfg.shift_phi = *ov.shift_phi;
    if (ov.alloc_phi) cfg.alloc_phi = *ov.alloc_phi;
    if (ov.strategy) cfg.alloc_strategy = *ov.strategy;
    if (ov.lr) cfg.lr = *ov.lr;
    if (ov.grad_clip) cfg.grad_clip = *ov.grad_clip;
    if (ov.affine_lr_scale) cfg.affine_lr_scale = *ov.affine_lr_scale;
    if (ov.batch_size) cfg.batch_size = *ov.batch_size;
    if (ov.epochs) cfg.epochs = *ov.epochs;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.loss) cfg.loss_mode = *ov.loss;
    if (ov.literal_loss) cfg.loss_mode = "literal";
    if (ov.eq5_literal) cfg.eq5_divisor = "literal";
    if (ov.quant_in_loss) cfg.quant_in_loss = true;
    if (ov.feature_source) cfg.feature_source = *ov.feature_source;
    if (ov.no_standardize) cfg.standardize_inputs = false;
    if (ov.exclude_encoding) cfg.predict_include_encoding = false;
    if (ov.train_limit) cfg.train_limit = *ov.train_limit;
    if (ov.test_limit) cfg.test_limit = *ov.test_limit;
    if (ov.initial_charge_frac) cfg.initial_charge_frac = *ov.initial_charge_frac;
    if (ov.synth_classes) cfg.synth_classes = *ov.synth_classes;
    if (ov.synth_per_class) cfg.synth_per_class = *ov.synth_per_class;
    if (ov.synth_channels) cfg.synth_channels = *ov.synth_channels;
    if (ov.synth_height) cfg.synth_height = *ov.synth_height;
    if (ov.synth_width) cfg.synth_width = *ov.synth_width;
    if (ov.synth_separation) cfg.synth_separation = *ov.synth_separation;
    if (ov.preset) cfg.synth_preset = *ov.preset;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ffgaf: forward-forward training for convolutional spiking networks"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", checkpoint, spike_csv;
    overrides ov;
    ffgaf::data_paths paths;
    ffgaf::energy_constants constants;

    auto* analyze = app.add_subcommand("analyze", "class similarity, complexity and allocation");
    add_common_options(analyze, config_path, ov, paths);
    analyze->add_option("--out", out_dir, "output directory");
    analyze->add_option("--checkpoint", paths.checkpoint, "trained checkpoint (encoder features)");

    auto* train = app.add_subcommand("train", "train a network, write metrics + checkpoint");
    add_common_options(train, config_path, ov, paths);
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--checkpoint", paths.checkpoint, "trained checkpoint (encoder features)");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    add_common_options(eval, config_path, ov, paths);
    eval->add_option("--checkpoint", checkpoint, "checkpoint to evaluate")->required();
    eval->add_option("--out", out_dir, "output directory");

    auto* ablate = app.add_subcommand("ablate", "compare the three allocation strategies");
    add_common_options(ablate, config_path, ov, paths);
    ablate->add_option("--out", out_dir, "output directory");

    auto* energy = app.add_subcommand("energy", "parameter and energy accounting");
    add_common_options(energy, config_path, ov, paths);
    energy->add_option("--checkpoint", checkpoint, "architecture source (else uses config)");
    energy->add_option("--spike-rates", spike_csv, "measured spike-rate CSV (layer,rate)");
    energy->add_option("--e-mac", constants.e_mac, "joules per MAC");
    energy->add_option("--e-ac", constants.e_ac, "joules per accumulate");
    energy->add_option("--e-mem-read", constants.e_mem_read, "joules per memory read");
    energy->add_option("--e-mem-write", constants.e_mem_write, "joules per memory write");
    energy->add_option("--constants-label", constants.label, "technology tag echoed in reports");
    energy->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    }

    try {
        const experiment_config cfg = resolve_config(config_path, ov);
        if (analyze->parsed()) {
            auto res = ffgaf::cmd_analyze(cfg, paths, out_dir);
            std::printf("wrote %s\nwrote %s\nwrote %s\n", res.similarity_csv.c_str(),
                        res.complexity_csv.c_str(), res.allocation_csv.c_str());
        } else if (train->parsed()) {
            auto res = ffgaf::cmd_train(cfg, paths, out_dir);
            std::printf("test accuracy: %.4f\n", res.test_accuracy);
            std::printf("wrote %s\nwrote %s\nwrote %s\n", res.metrics_csv.c_str(),
                        res.checkpoint_path.c_str(), res.spike_csv.c_str());
        } else if (eval->parsed()) {
            auto res = ffgaf::cmd_eval(checkpoint, cfg, paths, out_dir);
            std::printf("test accuracy: %.4f\n", res.accuracy);
            std::printf("wrote %s\n", res.confusion_csv.c_str());
        } else if (ablate->parsed()) {
            auto res = ffgaf::cmd_ablate(cfg, paths, out_dir);
            for (std::size_t s = 0; s < res.strategies.size(); ++s) {
                std::printf("%s final accuracy: %.4f\n", res.strategies[s].c_str(),
                            res.accuracy[s].empty() ? 0.0 : res.accuracy[s].back());
            }
            std::printf("wrote %s\n", res.csv.c_str());
        } else if (energy->parsed()) {
            auto res = ffgaf::cmd_energy(checkpoint, cfg, spike_csv, constants, out_dir);
            std::printf("%s", res.table.c_str());
            std::printf("wrote %s\n", res.csv.c_str());
        }
    } catch (const ffgaf::config_error& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ffgaf::data_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ffgaf::numeric_error& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

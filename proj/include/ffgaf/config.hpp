#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffgaf/allocation.hpp"
#include "ffgaf/blocks.hpp"

namespace ffgaf {

// Flat key=value experiment configuration. Unknown keys are rejected; CLI
// flags override file values; parse -> serialize -> parse is the identity.
struct experiment_config {
    std::string dataset = "synthetic";  // mnist | fashion_mnist | cifar10 | synthetic
    std::vector<int> arch = {16, 32};
    std::vector<int> strides = {1, 2};
    int kernel = 3;
    int t_steps = 10;
    double thresh = 1.0;
    int levels = 10;
    double shift_phi = 0.5;
    double alloc_phi = 2.0;
    std::string alloc_strategy = "complexity_aware";
    double lr = 0.01;
    double grad_clip = 5.0;
    double affine_lr_scale = 0.1;
    int batch_size = 128;
    int epochs = 3;
    std::uint64_t seed = 1;
    std::string loss_mode = "softmax";        // softmax | literal
    std::string eq5_divisor = "mean_with_t";  // mean_with_t | literal
    std::string feature_source = "raw_pixels"; // raw_pixels | encoder
    bool quant_in_loss = false;
    bool predict_include_encoding = true;
    double initial_charge_frac = 0.5;
    double norm_momentum = 0.1;
    double norm_epsilon = 1e-5;
    bool standardize_inputs = true;
    int train_limit = 0;  // 0 = use everything
    int test_limit = 0;
    int synth_classes = 4;
    int synth_per_class = 500;
    int synth_channels = 1;
    int synth_height = 8;
    int synth_width = 8;
    double synth_separation = 4.0;
    std::string synth_preset = "blobs";  // blobs | skewed

    void validate() const;

    ffgaf::alloc_strategy strategy_enum() const;
    ffgaf::loss_mode loss_enum() const;
    ffgaf::eq5_divisor divisor_enum() const;
    ffgaf::synth_preset preset_enum() const;
    net_options options() const;

    // Architecture descriptor for build_network / the energy model. classes
    // must be supplied by the dataset.
    net_arch to_arch(int input_channels, int classes) const;
};

experiment_config parse_config_text(const std::string& text);
experiment_config parse_config_file(const std::string& path);
std::string serialize_config(const experiment_config& c);

} // namespace ffgaf

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ffgaf/blocks.hpp"

namespace ffgaf {

// Static per-inference accounting for one conv layer. The encoding layer runs
// dense multiply-accumulates on the analog input; every hidden layer is spike
// driven, so its cost is accumulate-only and scales with the measured firing
// rate of the spike train feeding it.
struct layer_counts {
    int index = 0;
    bool spiking_input = false;
    long long params = 0;      // kernels + biases
    long long macs = 0;        // dense multiply-accumulates
    long long acs = 0;         // accumulate-only synaptic ops
    long long mem_reads = 0;   // operand fetches + one parameter fetch per layer
    long long mem_writes = 0;  // one write per output element
    double spike_rate = 1.0;   // rate of the incoming spike train
    int out_h = 0, out_w = 0;
};

struct op_counts {
    long long params = 0;
    long long macs = 0;
    long long acs = 0;
    long long mem_reads = 0;
    long long mem_writes = 0;
    std::vector<double> spike_rate_per_layer;
    std::vector<layer_counts> layers;
};

// Per-op / per-access costs. Absolute joules depend entirely on these
// technology constants; defaults follow the common 45 nm convention of the
// analytical-model literature.
struct energy_constants {
    double e_mac = 4.6e-12;
    double e_ac = 0.9e-12;
    double e_mem_read = 10e-12;
    double e_mem_write = 10e-12;
    std::string label = "45nm-defaults";
};

struct energy_report {
    double mem_mj = 0.0;
    double compute_mj = 0.0;
    double total_mj = 0.0;
    energy_constants constants;
    op_counts counts;
};

// Kernels + biases over the whole stack; channel weights and normalization
// affines are reported separately (count_params_detailed).
long long count_params(const net_arch& arch);

struct param_breakdown {
    long long kernels_and_biases = 0;
    long long channel_weights = 0;
    long long norm_affine = 0;
};
param_breakdown count_params_detailed(const net_arch& arch);

// Per-inference op and memory-access counts for one input of in_h x in_w.
// spike_rates are the measured per-spiking-layer output rates (block order);
// hidden layer i consumes rates[i-1]. Empty means the dense-equivalent worst
// case of rate 1.
op_counts count_ops(const net_arch& arch, std::size_t in_h, std::size_t in_w,
                    const std::vector<double>& spike_rates);

energy_report estimate_energy(const op_counts& counts, const energy_constants& k);

} // namespace ffgaf

#include "ffgaf/energy.hpp"

#include <cmath>

namespace ffgaf {

long long count_params(const net_arch& arch) {
    arch.validate();
    long long total = 0;
    long long c_in = arch.input_channels;
    for (int c_out : arch.channels) {
        total += c_in * c_out * arch.kernel * arch.kernel + c_out;
        c_in = c_out;
    }
    return total;
}

param_breakdown count_params_detailed(const net_arch& arch) {
    param_breakdown b;
    b.kernels_and_biases = count_params(arch);
    for (int c_out : arch.channels) {
        b.channel_weights += c_out;
        b.norm_affine += 2LL * c_out;
    }
    return b;
}

op_counts count_ops(const net_arch& arch, std::size_t in_h, std::size_t in_w,
                    const std::vector<double>& spike_rates) {
    arch.validate();
    if (!spike_rates.empty() && spike_rates.size() < arch.channels.size() - 1) {
        throw config_error("count_ops: need a spike rate per hidden layer's input");
    }

    op_counts counts;
    const int k = arch.kernel;
    const int pad = arch.padding >= 0 ? arch.padding : (k - 1) / 2;
    long long c_in = arch.input_channels;
    std::size_t h = in_h, w = in_w;

    for (std::size_t i = 0; i < arch.channels.size(); ++i) {
        const long long c_out = arch.channels[i];
        const std::size_t oh = conv_out_extent(h, k, arch.strides[i], pad);
        const std::size_t ow = conv_out_extent(w, k, arch.strides[i], pad);

        layer_counts lc;
        lc.index = static_cast<int>(i);
        lc.spiking_input = i > 0;
        lc.params = c_in * c_out * k * k + c_out;
        lc.out_h = static_cast<int>(oh);
        lc.out_w = static_cast<int>(ow);

        const long long dense = c_in * c_out * k * k * static_cast<long long>(oh * ow);
        long long out_elems = c_out * static_cast<long long>(oh * ow);
        if (i == 0) {
            lc.macs = dense;
            lc.spike_rate = 1.0;
        } else {
            lc.spike_rate = spike_rates.empty() ? 1.0 : spike_rates[i - 1];
            lc.acs = static_cast<long long>(std::llround(
                lc.spike_rate * static_cast<double>(dense) * arch.horizon));
            out_elems *= arch.horizon;
        }
        lc.mem_reads = lc.macs + lc.acs + lc.params;
        lc.mem_writes = out_elems;

        counts.params += lc.params;
        counts.macs += lc.macs;
        counts.acs += lc.acs;
        counts.mem_reads += lc.mem_reads;
        counts.mem_writes += lc.mem_writes;
        counts.spike_rate_per_layer.push_back(lc.spike_rate);
        counts.layers.push_back(lc);

        c_in = c_out;
        h = oh;
        w = ow;
    }
    return counts;
}

energy_report estimate_energy(const op_counts& counts, const energy_constants& k) {
    if (!(k.e_mac > 0.0 && k.e_ac > 0.0 && k.e_mem_read > 0.0 && k.e_mem_write > 0.0)) {
        throw config_error("estimate_energy: constants must be positive");
    }
    energy_report r;
    r.constants = k;
    r.counts = counts;
    const double compute_j = static_cast<double>(counts.macs) * k.e_mac +
                             static_cast<double>(counts.acs) * k.e_ac;
    const double mem_j = static_cast<double>(counts.mem_reads) * k.e_mem_read +
                         static_cast<double>(counts.mem_writes) * k.e_mem_write;
    r.compute_mj = compute_j * 1e3;
    r.mem_mj = mem_j * 1e3;
    r.total_mj = r.compute_mj + r.mem_mj;
    return r;
}

} // namespace ffgaf

#pragma once

#include <string>

#include "ffgaf/blocks.hpp"

namespace ffgaf {

// Versioned binary container: magic "FFGA", format version, a textual
// architecture descriptor, then named raw little-endian float32 arrays per
// parameter. Round-trips are byte-exact.
inline constexpr std::uint32_t checkpoint_version = 1;

struct checkpoint_meta {
    std::string dataset;
    int input_h = 0;
    int input_w = 0;
};

void save_checkpoint(const network<float>& net, const checkpoint_meta& meta,
                     const std::string& path);

struct loaded_checkpoint {
    network<float> net;
    checkpoint_meta meta;
};

loaded_checkpoint load_checkpoint(const std::string& path);

// Shape-level descriptor recovered from a trained network (for the energy
// model and for rebuilding identical structures).
net_arch arch_of(const network<float>& net);

} // namespace ffgaf

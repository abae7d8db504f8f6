#include "ffgaf/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

#include "ffgaf/data.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

namespace ffgaf {

namespace {

constexpr char magic[4] = {'F', 'F', 'G', 'A'};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 4);
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + 8);
}

void put_array(std::vector<std::uint8_t>& out, const std::string& name, const float* data,
               std::size_t count) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u64(out, count);
    const auto* p = reinterpret_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + count * sizeof(float));
}

struct reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t at = 0;

    void need(std::size_t n, const char* what) const {
        if (at + n > bytes.size()) {
            throw data_error(std::string("checkpoint: truncated while reading ") + what);
        }
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + at, 4);
        at += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + at, 8);
        at += 8;
        return v;
    }
    std::string str(std::size_t n, const char* what) {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes.data() + at), n);
        at += n;
        return s;
    }
};

std::string descriptor_text(const network<float>& net, const checkpoint_meta& meta) {
    std::ostringstream os;
    os << "dataset = " << meta.dataset << "\n";
    os << "input_h = " << meta.input_h << "\n";
    os << "input_w = " << meta.input_w << "\n";
    os << "classes = " << net.classes << "\n";
    os << "horizon = " << net.horizon << "\n";
    os << "num_blocks = " << net.blocks.size() << "\n";
    os << "aggregation = ";
    for (std::size_t i = 0; i < net.aggregation_weights.size(); ++i) {
        os << (i ? "," : "") << fmt_double(net.aggregation_weights[i]);
    }
    os << "\n";
    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const auto& b = net.blocks[i];
        const std::string at = "block" + std::to_string(i) + ".";
        os << at << "kind = " << (b.kind == block_kind::encoding ? "encoding" : "hidden") << "\n";
        os << at << "c_in = " << b.conv.in_channels() << "\n";
        os << at << "c_out = " << b.conv.out_channels() << "\n";
        os << at << "kernel = " << b.conv.kernel() << "\n";
        os << at << "stride = " << b.conv.stride << "\n";
        os << at << "padding = " << b.conv.padding << "\n";
        os << at << "thresh = " << fmt_double(b.spiking.thresh) << "\n";
        os << at << "initial_charge_frac = " << fmt_double(b.spiking.initial_charge_frac) << "\n";
        os << at << "lambda = " << fmt_double(b.quant.lambda) << "\n";
        os << at << "levels = " << b.quant.levels << "\n";
        os << at << "shift_phi = " << fmt_double(b.quant.shift_phi) << "\n";
        os << at << "norm_momentum = " << fmt_double(static_cast<double>(b.norm.momentum)) << "\n";
        os << at << "norm_epsilon = " << fmt_double(static_cast<double>(b.norm.epsilon)) << "\n";
        os << at << "alloc = ";
        for (std::size_t j = 0; j < b.alloc.channels_per_class.size(); ++j) {
            os << (j ? "," : "") << b.alloc.channels_per_class[j];
        }
        os << "\n";
        os << at << "alloc_strategy = " << to_string(b.alloc.strategy) << "\n";
        os << at << "alloc_phi = " << fmt_double(b.alloc.phi) << "\n";
    }
    return os.str();
}

std::map<std::string, std::string> parse_descriptor(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw data_error("checkpoint: malformed descriptor line");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(' ');
            const auto b = s.find_last_not_of(' ');
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

const std::string& want(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw data_error("checkpoint: descriptor missing '" + key + "'");
    return it->second;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

} // namespace

void save_checkpoint(const network<float>& net, const checkpoint_meta& meta,
                     const std::string& path) {
    net.validate();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), magic, magic + 4);
    put_u32(out, checkpoint_version);
    const std::string desc = descriptor_text(net, meta);
    put_u32(out, static_cast<std::uint32_t>(desc.size()));
    out.insert(out.end(), desc.begin(), desc.end());

    for (std::size_t i = 0; i < net.blocks.size(); ++i) {
        const auto& b = net.blocks[i];
        const std::string at = "block" + std::to_string(i) + ".";
        put_array(out, at + "kernels", b.conv.kernels.data(), b.conv.kernels.size());
        put_array(out, at + "bias", b.conv.bias.data(), b.conv.bias.size());
        put_array(out, at + "channel_weight", b.conv.channel_weight.data(),
                  b.conv.channel_weight.size());
        put_array(out, at + "gamma", b.norm.gamma.data(), b.norm.gamma.size());
        put_array(out, at + "beta", b.norm.beta.data(), b.norm.beta.size());
        put_array(out, at + "running_mean", b.norm.running_mean.data(),
                  b.norm.running_mean.size());
        put_array(out, at + "running_var", b.norm.running_var.data(), b.norm.running_var.size());
    }
    write_file_bytes_atomic(path, out);
}

loaded_checkpoint load_checkpoint(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    reader r{bytes};
    const std::string got_magic = r.str(4, "magic");
    if (std::memcmp(got_magic.data(), magic, 4) != 0) {
        throw data_error("checkpoint: bad magic in '" + path + "'");
    }
    const std::uint32_t version = r.u32("version");
    if (version != checkpoint_version) {
        throw data_error("checkpoint: unsupported format version " + std::to_string(version));
    }
    const std::uint32_t desc_len = r.u32("descriptor length");
    const auto kv = parse_descriptor(r.str(desc_len, "descriptor"));

    loaded_checkpoint lc;
    lc.meta.dataset = want(kv, "dataset");
    lc.meta.input_h = std::stoi(want(kv, "input_h"));
    lc.meta.input_w = std::stoi(want(kv, "input_w"));
    lc.net.classes = std::stoi(want(kv, "classes"));
    lc.net.horizon = std::stoi(want(kv, "horizon"));
    const std::size_t n_blocks = std::stoul(want(kv, "num_blocks"));
    for (const auto& s : split_commas(want(kv, "aggregation"))) {
        lc.net.aggregation_weights.push_back(std::stod(s));
    }

    for (std::size_t i = 0; i < n_blocks; ++i) {
        const std::string at = "block" + std::to_string(i) + ".";
        training_block<float> b;
        const std::string kind = want(kv, at + "kind");
        b.kind = kind == "encoding" ? block_kind::encoding : block_kind::hidden;
        const std::size_t c_in = std::stoul(want(kv, at + "c_in"));
        const std::size_t c_out = std::stoul(want(kv, at + "c_out"));
        const std::size_t kernel = std::stoul(want(kv, at + "kernel"));
        b.conv = make_conv_params<float>(c_out, c_in, kernel, std::stoi(want(kv, at + "stride")),
                                         std::stoi(want(kv, at + "padding")));
        b.norm = make_norm_params<float>(
            c_out, b.kind == block_kind::encoding ? norm_mode::batch : norm_mode::temporal);
        b.norm.momentum = static_cast<float>(std::stod(want(kv, at + "norm_momentum")));
        b.norm.epsilon = static_cast<float>(std::stod(want(kv, at + "norm_epsilon")));
        b.spiking.thresh = std::stod(want(kv, at + "thresh"));
        b.spiking.horizon = lc.net.horizon;
        b.spiking.initial_charge_frac = std::stod(want(kv, at + "initial_charge_frac"));
        b.quant.lambda = std::stod(want(kv, at + "lambda"));
        b.quant.levels = std::stoi(want(kv, at + "levels"));
        b.quant.shift_phi = std::stod(want(kv, at + "shift_phi"));
        for (const auto& s : split_commas(want(kv, at + "alloc"))) {
            b.alloc.channels_per_class.push_back(std::stoi(s));
        }
        b.alloc.total = static_cast<int>(c_out);
        b.alloc.strategy = alloc_strategy_from_string(want(kv, at + "alloc_strategy"));
        b.alloc.phi = std::stod(want(kv, at + "alloc_phi"));
        lc.net.blocks.push_back(std::move(b));
    }

    // Named arrays, in the exact order save_checkpoint wrote them.
    while (r.at < bytes.size()) {
        const std::uint32_t name_len = r.u32("array name length");
        const std::string name = r.str(name_len, "array name");
        const std::uint64_t count = r.u64("array count");
        r.need(count * sizeof(float), name.c_str());

        const auto dot = name.find('.');
        if (dot == std::string::npos || name.rfind("block", 0) != 0) {
            throw data_error("checkpoint: unexpected array '" + name + "'");
        }
        const std::size_t bi = std::stoul(name.substr(5, dot - 5));
        if (bi >= lc.net.blocks.size()) {
            throw data_error("checkpoint: array '" + name + "' for unknown block");
        }
        auto& b = lc.net.blocks[bi];
        const std::string field = name.substr(dot + 1);
        float* dst = nullptr;
        std::size_t want_count = 0;
        if (field == "kernels") {
            dst = b.conv.kernels.data();
            want_count = b.conv.kernels.size();
        } else if (field == "bias") {
            dst = b.conv.bias.data();
            want_count = b.conv.bias.size();
        } else if (field == "channel_weight") {
            dst = b.conv.channel_weight.data();
            want_count = b.conv.channel_weight.size();
        } else if (field == "gamma") {
            dst = b.norm.gamma.data();
            want_count = b.norm.gamma.size();
        } else if (field == "beta") {
            dst = b.norm.beta.data();
            want_count = b.norm.beta.size();
        } else if (field == "running_mean") {
            dst = b.norm.running_mean.data();
            want_count = b.norm.running_mean.size();
        } else if (field == "running_var") {
            dst = b.norm.running_var.data();
            want_count = b.norm.running_var.size();
        } else {
            throw data_error("checkpoint: unknown parameter array '" + name + "'");
        }
        if (count != want_count) {
            throw data_error("checkpoint: array '" + name + "' has " + std::to_string(count) +
                             " elements, expected " + std::to_string(want_count));
        }
        std::memcpy(dst, bytes.data() + r.at, count * sizeof(float));
        r.at += count * sizeof(float);
    }

    lc.net.validate();
    return lc;
}

net_arch arch_of(const network<float>& net) {
    net_arch a;
    a.input_channels = static_cast<int>(net.blocks.front().conv.in_channels());
    for (const auto& b : net.blocks) {
        a.channels.push_back(static_cast<int>(b.conv.out_channels()));
        a.strides.push_back(b.conv.stride);
    }
    const auto& b0 = net.blocks.front();
    a.kernel = static_cast<int>(b0.conv.kernel());
    a.padding = b0.conv.padding;
    a.classes = net.classes;
    a.horizon = net.horizon;
    a.thresh = b0.spiking.thresh;
    a.levels = b0.quant.levels;
    a.shift_phi = b0.quant.shift_phi;
    a.initial_charge_frac = b0.spiking.initial_charge_frac;
    a.norm_momentum = static_cast<double>(b0.norm.momentum);
    a.norm_epsilon = static_cast<double>(b0.norm.epsilon);
    return a;
}

} // namespace ffgaf

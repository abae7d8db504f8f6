#include "ffgaf/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "ffgaf/common.hpp"

namespace ffgaf {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_ints(const std::vector<int>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' expects an integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' expects a real number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw config_error("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw config_error("config: key '" + key + "' expects a comma list");
    return out;
}

void check_choice(const std::string& key, const std::string& v,
                  std::initializer_list<const char*> allowed) {
    for (const char* a : allowed) {
        if (v == a) return;
    }
    std::string msg = "config: key '" + key + "' must be one of {";
    bool first = true;
    for (const char* a : allowed) {
        msg += std::string(first ? "" : ", ") + a;
        first = false;
    }
    throw config_error(msg + "}, got '" + v + "'");
}

} // namespace

void experiment_config::validate() const {
    check_choice("dataset", dataset, {"mnist", "fashion_mnist", "cifar10", "synthetic"});
    check_choice("alloc_strategy", alloc_strategy, {"complexity_aware", "uniform", "worst_case"});
    check_choice("loss_mode", loss_mode, {"softmax", "literal"});
    check_choice("eq5_divisor", eq5_divisor, {"mean_with_t", "literal"});
    check_choice("feature_source", feature_source, {"raw_pixels", "encoder"});
    check_choice("synth_preset", synth_preset, {"blobs", "skewed"});
    if (arch.empty()) throw config_error("config: arch must name at least one block");
    for (int c : arch) {
        if (c < 1) throw config_error("config: arch channels must be positive");
    }
    if (strides.size() != arch.size() && strides.size() != arch.size() + 1) {
        throw config_error("config: strides must have one entry per block (a trailing "
                           "goodness-head stride of 1 is also accepted)");
    }
    if (strides.size() == arch.size() + 1 && strides.back() != 1) {
        throw config_error("config: the trailing goodness-head stride must be 1");
    }
    for (int s : strides) {
        if (s < 1) throw config_error("config: strides must be positive");
    }
    if (kernel < 1) throw config_error("config: kernel must be positive");
    if (t_steps < 1) throw config_error("config: t_steps must be positive");
    if (!(thresh > 0.0)) throw config_error("config: thresh must be positive");
    if (levels < 1) throw config_error("config: levels must be positive");
    if (!(alloc_phi > 0.0)) throw config_error("config: alloc_phi must be positive");
    if (!(lr > 0.0)) throw config_error("config: lr must be positive");
    if (batch_size < 1) throw config_error("config: batch_size must be positive");
    if (epochs < 0) throw config_error("config: epochs must be >= 0");
    if (initial_charge_frac < 0.0 || initial_charge_frac >= 1.0) {
        throw config_error("config: initial_charge_frac must be in [0,1)");
    }
    if (!(norm_momentum > 0.0 && norm_momentum < 1.0)) {
        throw config_error("config: norm_momentum must be in (0,1)");
    }
    if (!(norm_epsilon > 0.0)) throw config_error("config: norm_epsilon must be positive");
    if (train_limit < 0 || test_limit < 0) throw config_error("config: limits must be >= 0");
    if (synth_classes < 1 || synth_per_class < 1) {
        throw config_error("config: synthetic dataset needs classes and samples");
    }
    if (synth_channels < 1 || synth_height < 1 || synth_width < 1) {
        throw config_error("config: synthetic image dims must be positive");
    }
    if (!(synth_separation >= 0.0)) throw config_error("config: synth_separation must be >= 0");
}

ffgaf::alloc_strategy experiment_config::strategy_enum() const {
    return alloc_strategy_from_string(alloc_strategy);
}

ffgaf::loss_mode experiment_config::loss_enum() const {
    return loss_mode == "literal" ? ffgaf::loss_mode::literal : ffgaf::loss_mode::softmax;
}

ffgaf::eq5_divisor experiment_config::divisor_enum() const {
    return eq5_divisor == "literal" ? ffgaf::eq5_divisor::literal
                                    : ffgaf::eq5_divisor::mean_with_t;
}

ffgaf::synth_preset experiment_config::preset_enum() const {
    return synth_preset == "skewed" ? ffgaf::synth_preset::skewed : ffgaf::synth_preset::blobs;
}

net_options experiment_config::options() const {
    net_options o;
    o.loss = loss_enum();
    o.divisor = divisor_enum();
    o.quant_in_loss = quant_in_loss;
    return o;
}

net_arch experiment_config::to_arch(int input_channels, int classes) const {
    net_arch a;
    a.input_channels = input_channels;
    a.channels = arch;
    a.strides = strides;
    a.kernel = kernel;
    a.classes = classes;
    a.horizon = t_steps;
    a.thresh = thresh;
    a.levels = levels;
    a.shift_phi = shift_phi;
    a.initial_charge_frac = initial_charge_frac;
    a.norm_momentum = norm_momentum;
    a.norm_epsilon = norm_epsilon;
    return a;
}

experiment_config parse_config_text(const std::string& text) {
    experiment_config c;
    using setter = std::function<void(experiment_config&, const std::string&, const std::string&)>;
    static const std::map<std::string, setter> setters = {
        {"dataset", [](auto& c, auto&, auto& v) { c.dataset = v; }},
        {"arch", [](auto& c, auto& k, auto& v) { c.arch = parse_int_list(k, v); }},
        {"strides", [](auto& c, auto& k, auto& v) { c.strides = parse_int_list(k, v); }},
        {"kernel", [](auto& c, auto& k, auto& v) { c.kernel = parse_int(k, v); }},
        {"t_steps", [](auto& c, auto& k, auto& v) { c.t_steps = parse_int(k, v); }},
        {"thresh", [](auto& c, auto& k, auto& v) { c.thresh = parse_double(k, v); }},
        {"levels", [](auto& c, auto& k, auto& v) { c.levels = parse_int(k, v); }},
        {"shift_phi", [](auto& c, auto& k, auto& v) { c.shift_phi = parse_double(k, v); }},
        {"alloc_phi", [](auto& c, auto& k, auto& v) { c.alloc_phi = parse_double(k, v); }},
        {"alloc_strategy", [](auto& c, auto&, auto& v) { c.alloc_strategy = v; }},
        {"lr", [](auto& c, auto& k, auto& v) { c.lr = parse_double(k, v); }},
        {"grad_clip", [](auto& c, auto& k, auto& v) { c.grad_clip = parse_double(k, v); }},
        {"affine_lr_scale",
         [](auto& c, auto& k, auto& v) { c.affine_lr_scale = parse_double(k, v); }},
        {"batch_size", [](auto& c, auto& k, auto& v) { c.batch_size = parse_int(k, v); }},
        {"epochs", [](auto& c, auto& k, auto& v) { c.epochs = parse_int(k, v); }},
        {"seed", [](auto& c, auto& k, auto& v) {
             try {
                 c.seed = static_cast<std::uint64_t>(std::stoull(v));
             } catch (const std::exception&) {
                 throw config_error("config: key '" + k + "' expects an unsigned integer, got '" +
                                    v + "'");
             }
         }},
        {"loss_mode", [](auto& c, auto&, auto& v) { c.loss_mode = v; }},
        {"eq5_divisor", [](auto& c, auto&, auto& v) { c.eq5_divisor = v; }},
        {"feature_source", [](auto& c, auto&, auto& v) { c.feature_source = v; }},
        {"quant_in_loss", [](auto& c, auto& k, auto& v) { c.quant_in_loss = parse_bool(k, v); }},
        {"predict_include_encoding",
         [](auto& c, auto& k, auto& v) { c.predict_include_encoding = parse_bool(k, v); }},
        {"initial_charge_frac",
         [](auto& c, auto& k, auto& v) { c.initial_charge_frac = parse_double(k, v); }},
        {"norm_momentum", [](auto& c, auto& k, auto& v) { c.norm_momentum = parse_double(k, v); }},
        {"norm_epsilon", [](auto& c, auto& k, auto& v) { c.norm_epsilon = parse_double(k, v); }},
        {"standardize_inputs",
         [](auto& c, auto& k, auto& v) { c.standardize_inputs = parse_bool(k, v); }},
        {"train_limit", [](auto& c, auto& k, auto& v) { c.train_limit = parse_int(k, v); }},
        {"test_limit", [](auto& c, auto& k, auto& v) { c.test_limit = parse_int(k, v); }},
        {"synth_classes", [](auto& c, auto& k, auto& v) { c.synth_classes = parse_int(k, v); }},
        {"synth_per_class", [](auto& c, auto& k, auto& v) { c.synth_per_class = parse_int(k, v); }},
        {"synth_channels", [](auto& c, auto& k, auto& v) { c.synth_channels = parse_int(k, v); }},
        {"synth_height", [](auto& c, auto& k, auto& v) { c.synth_height = parse_int(k, v); }},
        {"synth_width", [](auto& c, auto& k, auto& v) { c.synth_width = parse_int(k, v); }},
        {"synth_separation",
         [](auto& c, auto& k, auto& v) { c.synth_separation = parse_double(k, v); }},
        {"synth_preset", [](auto& c, auto&, auto& v) { c.synth_preset = v; }},
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw config_error("config: line " + std::to_string(line_no) +
                               " is not 'key = value': " + line);
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) throw config_error("config: unknown key '" + key + "'");
        it->second(c, key, value);
    }
    c.validate();
    return c;
}

experiment_config parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const experiment_config& c) {
    std::ostringstream os;
    os << "dataset = " << c.dataset << "\n";
    os << "arch = " << fmt_ints(c.arch) << "\n";
    os << "strides = " << fmt_ints(c.strides) << "\n";
    os << "kernel = " << c.kernel << "\n";
    os << "t_steps = " << c.t_steps << "\n";
    os << "thresh = " << fmt_double(c.thresh) << "\n";
    os << "levels = " << c.levels << "\n";
    os << "shift_phi = " << fmt_double(c.shift_phi) << "\n";
    os << "alloc_phi = " << fmt_double(c.alloc_phi) << "\n";
    os << "alloc_strategy = " << c.alloc_strategy << "\n";
    os << "lr = " << fmt_double(c.lr) << "\n";
    os << "grad_clip = " << fmt_double(c.grad_clip) << "\n";
    os << "affine_lr_scale = " << fmt_double(c.affine_lr_scale) << "\n";
    os << "batch_size = " << c.batch_size << "\n";
    os << "epochs = " << c.epochs << "\n";
    os << "seed = " << c.seed << "\n";
    os << "loss_mode = " << c.loss_mode << "\n";
    os << "eq5_divisor = " << c.eq5_divisor << "\n";
    os << "feature_source = " << c.feature_source << "\n";
    os << "quant_in_loss = " << (c.quant_in_loss ? "true" : "false") << "\n";
    os << "predict_include_encoding = " << (c.predict_include_encoding ? "true" : "false") << "\n";
    os << "initial_charge_frac = " << fmt_double(c.initial_charge_frac) << "\n";
    os << "norm_momentum = " << fmt_double(c.norm_momentum) << "\n";
    os << "norm_epsilon = " << fmt_double(c.norm_epsilon) << "\n";
    os << "standardize_inputs = " << (c.standardize_inputs ? "true" : "false") << "\n";
    os << "train_limit = " << c.train_limit << "\n";
    os << "test_limit = " << c.test_limit << "\n";
    os << "synth_classes = " << c.synth_classes << "\n";
    os << "synth_per_class = " << c.synth_per_class << "\n";
    os << "synth_channels = " << c.synth_channels << "\n";
    os << "synth_height = " << c.synth_height << "\n";
    os << "synth_width = " << c.synth_width << "\n";
    os << "synth_separation = " << fmt_double(c.synth_separation) << "\n";
    os << "synth_preset = " << c.synth_preset << "\n";
    return os.str();
}

} // namespace ffgaf

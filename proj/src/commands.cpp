#include "ffgaf/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ffgaf/csv.hpp"

namespace ffgaf {

namespace fs = std::filesystem;

namespace {

std::string find_data_file(const data_paths& paths, const std::string& dataset,
                           const std::string& name) {
    const std::vector<std::string> dirs = {
        paths.data_dir + "/" + dataset,
        paths.data_dir,
        paths.data_dir + "/cifar-10-batches-bin",
    };
    for (const auto& dir : dirs) {
        for (const char* suffix : {"", ".gz"}) {
            const std::string candidate = dir + "/" + name + suffix;
            if (fs::exists(candidate)) return candidate;
        }
    }
    throw data_error("dataset file '" + name + "' not found under '" + paths.data_dir +
                     "' (also tried '" + paths.data_dir + "/" + dataset + "' and .gz variants)");
}

tensor_f flatten_images(const tensor_f& images) {
    const std::size_t n = images.dim(0);
    const std::size_t d = images.size() / n;
    return tensor_f({n, d}, std::vector<float>(images.vec()));
}

// Encoding-block outputs as allocation features: inference-mode forward of
// block 0 from a trained checkpoint, flattened per sample.
tensor_f encoder_features(const dataset_f& train, const std::string& checkpoint_path) {
    if (checkpoint_path.empty()) {
        throw config_error("feature_source=encoder requires --checkpoint");
    }
    auto lc = load_checkpoint(checkpoint_path);
    auto& block0 = lc.net.blocks.front();

    std::vector<float> rows;
    std::size_t d = 0;
    auto plan = batch_plan(train.size(), 256, false, 0, 0);
    for (const auto& indices : plan) {
        batch<float> bt = take(train, indices);
        auto fwd = block_forward(block0, bt.images, false);
        const std::size_t per = fwd.y.size() / bt.labels.size();
        d = per;
        rows.insert(rows.end(), fwd.y.data(), fwd.y.data() + fwd.y.size());
    }
    return tensor_f({train.size(), d}, std::move(rows));
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw data_error("cannot create output directory '" + out_dir + "'");
}

net_options options_of(const experiment_config& cfg) { return cfg.options(); }

network<float> build_from_config(const experiment_config& cfg, const prepared_data& data) {
    auto arch = cfg.to_arch(static_cast<int>(data.train.images.dim(1)), data.classes);
    auto net = build_network<float>(arch, complexity_of(data), cfg.strategy_enum(), cfg.alloc_phi,
                                    cfg.seed);
    if (!cfg.predict_include_encoding) net.aggregation_weights[0] = 0.0;
    return net;
}

struct input_dims {
    int channels = 1, h = 0, w = 0;
};

input_dims dims_for_dataset(const experiment_config& cfg) {
    if (cfg.dataset == "cifar10") return {3, 32, 32};
    if (cfg.dataset == "synthetic") return {cfg.synth_channels, cfg.synth_height, cfg.synth_width};
    return {1, 28, 28};
}

} // namespace

prepared_data prepare_data(const experiment_config& cfg, const data_paths& paths) {
    cfg.validate();
    prepared_data out;

    if (cfg.dataset == "synthetic") {
        out.train = synthetic_classes<float>(
            cfg.synth_classes, cfg.synth_per_class, cfg.synth_channels, cfg.synth_height,
            cfg.synth_width, cfg.synth_separation, cfg.seed, cfg.preset_enum());
        const int test_per_class = std::max(cfg.synth_per_class / 4, 1);
        out.test = synthetic_classes<float>(
            cfg.synth_classes, test_per_class, cfg.synth_channels, cfg.synth_height,
            cfg.synth_width, cfg.synth_separation, derive_seed(cfg.seed, 0x7e57), cfg.preset_enum());
    } else if (cfg.dataset == "cifar10") {
        std::vector<std::string> train_paths = paths.cifar_train;
        if (train_paths.empty()) {
            for (int i = 1; i <= 5; ++i) {
                train_paths.push_back(
                    find_data_file(paths, "cifar10", "data_batch_" + std::to_string(i) + ".bin"));
            }
        }
        out.train = load_cifar10<float>(train_paths);
        out.test = load_cifar10<float>({paths.cifar_test.empty()
                                            ? find_data_file(paths, "cifar10", "test_batch.bin")
                                            : paths.cifar_test});
    } else {
        const std::string& ds = cfg.dataset; // mnist or fashion_mnist share the IDX layout
        const std::string ti = paths.train_images.empty()
                                   ? find_data_file(paths, ds, "train-images-idx3-ubyte")
                                   : paths.train_images;
        const std::string tl = paths.train_labels.empty()
                                   ? find_data_file(paths, ds, "train-labels-idx1-ubyte")
                                   : paths.train_labels;
        const std::string ei = paths.test_images.empty()
                                   ? find_data_file(paths, ds, "t10k-images-idx3-ubyte")
                                   : paths.test_images;
        const std::string el = paths.test_labels.empty()
                                   ? find_data_file(paths, ds, "t10k-labels-idx1-ubyte")
                                   : paths.test_labels;
        out.train = load_idx<float>(ti, tl);
        out.test = load_idx<float>(ei, el);
        out.train.name = out.test.name = ds;
    }
    out.train.split = "train";
    out.test.split = "test";

    if (cfg.train_limit > 0) out.train = head(out.train, static_cast<std::size_t>(cfg.train_limit));
    if (cfg.test_limit > 0) out.test = head(out.test, static_cast<std::size_t>(cfg.test_limit));
    out.classes = std::max(out.train.num_classes, out.test.num_classes);
    out.train.num_classes = out.test.num_classes = out.classes;

    // Allocation features come from the raw [0,1] pixels; the encoder variant
    // instead runs a trained encoding block over the standardized inputs.
    if (cfg.feature_source == "raw_pixels") {
        out.features = flatten_images(out.train.images);
        out.feature_labels = out.train.labels;
    }

    if (cfg.standardize_inputs) {
        channel_stats stats;
        out.train = standardize(std::move(out.train), &stats);
        out.test = standardize(std::move(out.test), nullptr, &stats);
    }

    if (cfg.feature_source == "encoder") {
        out.features = encoder_features(out.train, paths.checkpoint);
        out.feature_labels = out.train.labels;
    }
    return out;
}

std::vector<double> complexity_of(const prepared_data& data) {
    auto report = analyze_features(data.features, data.feature_labels, data.classes);
    return std::vector<double>(report.complexity.begin(), report.complexity.end());
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

analyze_result cmd_analyze(const experiment_config& cfg, const data_paths& paths,
                           const std::string& out_dir) {
    ensure_out_dir(out_dir);
    prepared_data data = prepare_data(cfg, paths);
    analyze_result res;
    res.report = analyze_features(data.features, data.feature_labels, data.classes);

    std::ostringstream sim;
    sim << "class";
    for (int c = 0; c < data.classes; ++c) sim << "," << c;
    sim << "\n";
    for (int a = 0; a < data.classes; ++a) {
        sim << a;
        for (int b = 0; b < data.classes; ++b) {
            sim << "," << csv::num(static_cast<double>(res.report.matrix.at(a, b)));
        }
        sim << "\n";
    }
    res.similarity_csv = out_dir + "/similarity.csv";
    write_text_atomic(res.similarity_csv, sim.str());

    std::ostringstream cx;
    cx << "class,complexity,samples\n";
    for (int c = 0; c < data.classes; ++c) {
        cx << c << "," << csv::num(static_cast<double>(res.report.complexity[c])) << ","
           << res.report.sample_counts[c] << "\n";
    }
    res.complexity_csv = out_dir + "/complexity.csv";
    write_text_atomic(res.complexity_csv, cx.str());

    std::vector<double> complexity(res.report.complexity.begin(), res.report.complexity.end());
    std::ostringstream al;
    al << "block,class,channels,strategy\n";
    for (std::size_t b = 0; b < cfg.arch.size(); ++b) {
        auto a = allocate(complexity, cfg.arch[b], cfg.alloc_phi, cfg.strategy_enum());
        res.per_block.push_back(a);
        for (int c = 0; c < data.classes; ++c) {
            al << b << "," << c << "," << a.channels_per_class[c] << "," << cfg.alloc_strategy
               << "\n";
        }
    }
    res.allocation_csv = out_dir + "/allocation.csv";
    write_text_atomic(res.allocation_csv, al.str());
    return res;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

namespace {

std::string metrics_header(std::size_t n_blocks) {
    std::vector<std::string> cols = {"epoch"};
    for (std::size_t b = 0; b < n_blocks; ++b) cols.push_back("loss_block" + std::to_string(b));
    for (std::size_t b = 0; b < n_blocks; ++b) cols.push_back("acc_block" + std::to_string(b));
    cols.push_back("ensemble_acc");
    cols.push_back("wall_clock_s");
    for (std::size_t b = 0; b < n_blocks; ++b) {
        cols.push_back("spike_rate_layer" + std::to_string(b));
    }
    return csv::join(cols) + "\n";
}

std::string metrics_row(int epoch, const epoch_stats& st, double wall_s) {
    std::vector<std::string> cols = {std::to_string(epoch)};
    for (double v : st.block_loss) cols.push_back(csv::num(v));
    for (double v : st.block_acc) cols.push_back(csv::num(v));
    cols.push_back(csv::num(st.ensemble_acc));
    cols.push_back(csv::num(wall_s));
    for (double v : st.spike_rates) cols.push_back(csv::num(v));
    return csv::join(cols) + "\n";
}

} // namespace

train_result cmd_train(const experiment_config& cfg, const data_paths& paths,
                       const std::string& out_dir) {
    ensure_out_dir(out_dir);
    prepared_data data = prepare_data(cfg, paths);
    network<float> net = build_from_config(cfg, data);

    fit_config fc;
    fc.lr = cfg.lr;
    fc.batch_size = static_cast<std::size_t>(cfg.batch_size);
    fc.epochs = cfg.epochs;
    fc.seed = cfg.seed;
    fc.grad_clip = cfg.grad_clip;
    fc.affine_lr_scale = cfg.affine_lr_scale;
    fc.opts = options_of(cfg);

    std::vector<double> wall;
    auto t0 = std::chrono::steady_clock::now();
    auto history = fit(data.train, net, fc, [&](int, const epoch_stats&) {
        auto t1 = std::chrono::steady_clock::now();
        wall.push_back(std::chrono::duration<double>(t1 - t0).count());
        t0 = t1;
    });

    std::ostringstream ms;
    ms << metrics_header(net.blocks.size());
    for (std::size_t e = 0; e < history.size(); ++e) {
        ms << metrics_row(static_cast<int>(e), history[e], wall[e]);
    }

    train_result res;
    res.history = history;
    res.metrics_csv = out_dir + "/metrics.csv";
    write_text_atomic(res.metrics_csv, ms.str());

    res.checkpoint_path = out_dir + "/checkpoint.ffga";
    checkpoint_meta meta;
    meta.dataset = cfg.dataset;
    meta.input_h = static_cast<int>(data.train.images.dim(2));
    meta.input_w = static_cast<int>(data.train.images.dim(3));
    save_checkpoint(net, meta, res.checkpoint_path);

    auto ev = evaluate(data.test, net, fc.opts);
    res.test_accuracy = ev.accuracy;
    res.test_spike_rates = ev.spike_rates;

    std::ostringstream sr;
    sr << "layer,rate\n";
    for (std::size_t b = 0; b < ev.spike_rates.size(); ++b) {
        sr << b << "," << csv::num(ev.spike_rates[b]) << "\n";
    }
    res.spike_csv = out_dir + "/spike_rates.csv";
    write_text_atomic(res.spike_csv, sr.str());
    return res;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

eval_cli_result cmd_eval(const std::string& checkpoint_path, const experiment_config& cfg,
                         const data_paths& paths, const std::string& out_dir) {
    ensure_out_dir(out_dir);
    auto lc = load_checkpoint(checkpoint_path);
    prepared_data data = prepare_data(cfg, paths);
    if (data.classes > lc.net.classes) {
        throw data_error("eval: dataset has " + std::to_string(data.classes) +
                         " classes, checkpoint was trained for " +
                         std::to_string(lc.net.classes));
    }

    auto ev = evaluate(data.test, lc.net, options_of(cfg));
    eval_cli_result res;
    res.accuracy = ev.accuracy;
    res.confusion = ev.confusion;
    res.classes = lc.net.classes;

    std::ostringstream cm;
    cm << "true\\pred";
    for (int c = 0; c < res.classes; ++c) cm << "," << c;
    cm << "\n";
    for (int a = 0; a < res.classes; ++a) {
        cm << a;
        for (int b = 0; b < res.classes; ++b) {
            cm << "," << res.confusion[static_cast<std::size_t>(a) * res.classes + b];
        }
        cm << "\n";
    }
    res.confusion_csv = out_dir + "/confusion.csv";
    write_text_atomic(res.confusion_csv, cm.str());
    return res;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

ablate_result cmd_ablate(const experiment_config& cfg, const data_paths& paths,
                         const std::string& out_dir) {
    ensure_out_dir(out_dir);
    prepared_data data = prepare_data(cfg, paths);
    const std::vector<double> complexity = complexity_of(data);

    ablate_result res;
    res.strategies = {"complexity_aware", "uniform", "worst_case"};
    std::ostringstream csv_text;
    csv_text << "strategy,epoch,test_accuracy\n";

    for (const auto& strategy : res.strategies) {
        auto arch = cfg.to_arch(static_cast<int>(data.train.images.dim(1)), data.classes);
        auto net = build_network<float>(arch, complexity, alloc_strategy_from_string(strategy),
                                        cfg.alloc_phi, cfg.seed);
        if (!cfg.predict_include_encoding) net.aggregation_weights[0] = 0.0;

        fit_config fc;
        fc.lr = cfg.lr;
        fc.batch_size = static_cast<std::size_t>(cfg.batch_size);
        fc.epochs = cfg.epochs;
        fc.seed = cfg.seed;
        fc.grad_clip = cfg.grad_clip;
        fc.affine_lr_scale = cfg.affine_lr_scale;
        fc.opts = options_of(cfg);

        std::vector<double> accs;
        fit(data.train, net, fc, [&](int epoch, const epoch_stats&) {
            auto ev = evaluate(data.test, net, fc.opts);
            accs.push_back(ev.accuracy);
            csv_text << strategy << "," << epoch << "," << csv::num(ev.accuracy) << "\n";
        });
        res.accuracy.push_back(accs);
    }

    res.csv = out_dir + "/ablation.csv";
    write_text_atomic(res.csv, csv_text.str());
    return res;
}

// ---------------------------------------------------------------------------
// energy
// ---------------------------------------------------------------------------

namespace {

std::vector<double> read_spike_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open spike-rate CSV '" + path + "'");
    std::vector<double> rates;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) { // header
            first = false;
            continue;
        }
        auto cells = csv::split_row(line);
        if (cells.size() < 2) throw data_error("spike-rate CSV: malformed row '" + line + "'");
        rates.push_back(std::stod(cells[1]));
    }
    return rates;
}

} // namespace

energy_cli_result cmd_energy(const std::string& checkpoint_path, const experiment_config& cfg,
                             const std::string& spike_csv_path, const energy_constants& constants,
                             const std::string& out_dir) {
    ensure_out_dir(out_dir);

    net_arch arch;
    int in_h = 0, in_w = 0;
    if (!checkpoint_path.empty()) {
        auto lc = load_checkpoint(checkpoint_path);
        arch = arch_of(lc.net);
        in_h = lc.meta.input_h;
        in_w = lc.meta.input_w;
    } else {
        const input_dims dims = dims_for_dataset(cfg);
        arch = cfg.to_arch(dims.channels, cfg.synth_classes);
        in_h = dims.h;
        in_w = dims.w;
    }

    std::vector<double> rates;
    if (!spike_csv_path.empty()) rates = read_spike_csv(spike_csv_path);

    auto counts = count_ops(arch, static_cast<std::size_t>(in_h), static_cast<std::size_t>(in_w),
                            rates);
    energy_cli_result res;
    res.report = estimate_energy(counts, constants);

    std::ostringstream os;
    os << "# constants: e_mac_j=" << csv::num(constants.e_mac)
       << ",e_ac_j=" << csv::num(constants.e_ac)
       << ",e_mem_read_j=" << csv::num(constants.e_mem_read)
       << ",e_mem_write_j=" << csv::num(constants.e_mem_write) << ",label=" << constants.label
       << "\n";
    os << "layer,kind,params,macs,acs,spike_rate,mem_reads,mem_writes,compute_mJ,memory_mJ\n";
    for (const auto& lc : counts.layers) {
        const double compute =
            (static_cast<double>(lc.macs) * constants.e_mac +
             static_cast<double>(lc.acs) * constants.e_ac) * 1e3;
        const double memory =
            (static_cast<double>(lc.mem_reads) * constants.e_mem_read +
             static_cast<double>(lc.mem_writes) * constants.e_mem_write) * 1e3;
        os << lc.index << "," << (lc.spiking_input ? "spiking" : "encoding") << "," << lc.params
           << "," << lc.macs << "," << lc.acs << "," << csv::num(lc.spike_rate) << ","
           << lc.mem_reads << "," << lc.mem_writes << "," << csv::num(compute) << ","
           << csv::num(memory) << "\n";
    }
    os << "TOTAL,," << counts.params << "," << counts.macs << "," << counts.acs << ",,"
       << counts.mem_reads << "," << counts.mem_writes << "," << csv::num(res.report.compute_mj)
       << "," << csv::num(res.report.mem_mj) << "\n";
    res.csv = out_dir + "/energy.csv";
    write_text_atomic(res.csv, os.str());

    std::ostringstream tb;
    tb << "parameters (kernels+biases): " << counts.params << "\n"
       << "dense MACs per inference:    " << counts.macs << "\n"
       << "accumulate ops per inference:" << counts.acs << "\n"
       << "memory accesses (R/W):       " << counts.mem_reads << " / " << counts.mem_writes << "\n"
       << "memory access energy:        " << csv::num(res.report.mem_mj) << " mJ\n"
       << "computational energy:        " << csv::num(res.report.compute_mj) << " mJ\n"
       << "total energy:                " << csv::num(res.report.total_mj) << " mJ\n"
       << "constants:                   " << constants.label << "\n";
    res.table = tb.str();
    return res;
}

} // namespace ffgaf

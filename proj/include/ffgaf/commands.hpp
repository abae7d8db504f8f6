#pragma once

#include <string>
#include <vector>

#include "ffgaf/allocation.hpp"
#include "ffgaf/blocks.hpp"
#include "ffgaf/checkpoint.hpp"
#include "ffgaf/config.hpp"
#include "ffgaf/data.hpp"
#include "ffgaf/energy.hpp"

namespace ffgaf {

// Where experiment inputs live. Explicit paths beat the data_dir convention
// (<data_dir>/<dataset>/ then <data_dir>/, each name also tried with .gz).
struct data_paths {
    std::string data_dir = "data";
    std::string train_images, train_labels, test_images, test_labels;
    std::vector<std::string> cifar_train;
    std::string cifar_test;
    std::string checkpoint; // encoder feature source
};

struct prepared_data {
    dataset_f train;
    dataset_f test;
    tensor_f features;  // N x D allocation features from the train split
    std::vector<int> feature_labels;
    int classes = 0;
};

// Loads (or synthesizes) the configured dataset, extracts allocation features
// and applies the train-split standardization to both splits.
prepared_data prepare_data(const experiment_config& cfg, const data_paths& paths);

std::vector<double> complexity_of(const prepared_data& data);

struct analyze_result {
    similarity_report<float> report;
    std::vector<allocation> per_block;
    std::string similarity_csv, complexity_csv, allocation_csv;
};
analyze_result cmd_analyze(const experiment_config& cfg, const data_paths& paths,
                           const std::string& out_dir);

struct train_result {
    std::vector<epoch_stats> history;
    double test_accuracy = 0.0;
    std::vector<double> test_spike_rates;
    std::string metrics_csv, checkpoint_path, spike_csv;
};
train_result cmd_train(const experiment_config& cfg, const data_paths& paths,
                       const std::string& out_dir);

struct eval_cli_result {
    double accuracy = 0.0;
    std::vector<long long> confusion; // K x K row-major
    int classes = 0;
    std::string confusion_csv;
};
eval_cli_result cmd_eval(const std::string& checkpoint_path, const experiment_config& cfg,
                         const data_paths& paths, const std::string& out_dir);

struct ablate_result {
    // accuracy[s][e] = test accuracy of strategy s after epoch e
    std::vector<std::vector<double>> accuracy;
    std::vector<std::string> strategies;
    std::string csv;
};
ablate_result cmd_ablate(const experiment_config& cfg, const data_paths& paths,
                         const std::string& out_dir);

struct energy_cli_result {
    energy_report report;
    std::string csv;
    std::string table; // human-readable rendering, also printed by the CLI
};
// Architecture comes from the checkpoint when given, otherwise from cfg.
// spike_csv_path (layer,rate rows) supplies measured rates; absent means the
// dense-equivalent worst case of rate 1.
energy_cli_result cmd_energy(const std::string& checkpoint_path, const experiment_config& cfg,
                             const std::string& spike_csv_path, const energy_constants& constants,
                             const std::string& out_dir);

} // namespace ffgaf

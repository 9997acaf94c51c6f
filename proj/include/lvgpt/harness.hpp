#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lvgpt/metrics.hpp"
#include "lvgpt/run_config.hpp"

namespace lvgpt {

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;  // epoch 0: loss at initialization
    double train_acc = 0.0;
    std::optional<double> val_loss, val_acc, val_recall, val_fscore;
};

struct TrainResult {
    std::vector<EpochRecord> history;
    MetricsReport train_report;
    std::optional<MetricsReport> test_report;
    std::filesystem::path checkpoint;
    double seconds = 0.0;
};

// Trains per cfg and writes into cfg.out_dir:
//   model.lvgp    checkpoint (config, vocabulary, class names, parameters)
//   metrics.csv   epoch,train_loss,train_acc,val_loss,val_acc,val_recall,val_fscore
//   config.txt    resolved run configuration
//   eval_test.csv final test metrics, when a test manifest is configured
// Throws ConfigError / DataError / CheckpointError.
TrainResult run_training(const RunConfig& cfg, std::ostream* log = nullptr);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path data;             // manifest
    std::filesystem::path label_map;        // empty: beside the manifest
    bool rephrased = false;                 // also evaluate the rephrased-query split
    std::filesystem::path rephrased_data;   // empty: test_rephrased.jsonl beside data
    std::size_t threads = 1;
    std::filesystem::path out_dir;          // empty: no CSV
};

struct EvalResult {
    MetricsReport report;
    std::optional<MetricsReport> rephrased;
};

// Writes eval.csv (block,scope,count,acc,recall,fscore) when out_dir is set.
EvalResult run_eval(const EvalOptions& opts, std::ostream* log = nullptr);

// One ablation dimension. The name is a shorthand (order, pose, backend,
// type_embedding) or any config key.
struct AblationAxis {
    std::string name;
    std::vector<std::string> values;
};
using AblationGrid = std::vector<AblationAxis>;

// order x pose x backend.
AblationGrid default_ablation_grid();
// "order=early_word,early_vision;pose=zero,actual"
AblationGrid parse_ablation_grid(std::string_view text);
std::string ablation_config_key(std::string_view axis);

struct AblationCell {
    std::map<std::string, std::string> settings;  // axis -> value
    std::string order, pose_mode, backend, type_embedding;
    bool ok = false;
    std::string error;
    MetricsReport report;  // held-out metrics
};

struct AblationContrast {
    std::string axis, first, second;  // delta = first - second
    std::map<std::string, std::string> fixed;  // the other axes
    std::string scope;  // "overall" or a question type
    MetricSummary a, b;
    double delta_acc = 0.0, delta_recall = 0.0, delta_fscore = 0.0;
};

struct AblationReport {
    std::vector<AblationCell> cells;
    std::vector<AblationContrast> contrasts;
};

// Trains and evaluates every grid cell with the base seed and data. A failing
// cell is recorded and the remaining cells still run. Writes ablation.csv,
// contrast_<axis>.csv for every two-valued axis, and summary.txt.
AblationReport run_ablation(const RunConfig& base, const AblationGrid& grid, const std::filesystem::path& out_dir,
                            std::ostream* log = nullptr);

void print_metrics(std::ostream& os, std::string_view title, const MetricsReport& r);

}  // namespace lvgpt

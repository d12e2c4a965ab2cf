#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pamk/features.hpp"
#include "pamk/gmp.hpp"
#include "pamk/models.hpp"
#include "pamk/signals.hpp"

namespace pamk::experiment {

struct ModelSpec {
    std::string type; // drvcnn | arvtdnn | dnn | gmp
    std::string name; // defaults to type
    int arvtdnn_hidden = 0;           // 0 = paper default for K
    std::vector<int> dnn_hidden;      // empty = paper default for K
    models::GmpIndex gmp_index;       // K=1 only
    std::string predesigned_filter;   // optional model file to take the conv layer from
};

/// One experiment: signal plan, oracle, features, model list, training setup.
struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::vector<signals::CarrierConfig> carriers;
    std::vector<double> offsets_hz;
    std::size_t num_samples = 20000;
    signals::PaOracleConfig pa;
    features::FeatureConfig feature;
    std::vector<ModelSpec> models;
    models::TrainConfig train;
    int split_train = 3;
    int split_test = 2;
    int nfft = 1024;
    double overlap = 0.5;
    std::string output_dir = "out";

    int K() const { return static_cast<int>(carriers.size()); }
    std::string dataset_id() const;
    void validate() const;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Writes dataset.csv and dataset.json under out_dir.
void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log);

/// Trains every configured model on the train split of the dataset; writes
/// <name>.model.json and <name>.train_log.csv under out_dir.
void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_csv,
               const std::string& out_dir, std::ostream& log);

/// Evaluates saved models on the test split; writes report.csv, report.json
/// and per-carrier error-spectrum CSVs under out_dir.
void cmd_evaluate(const ExperimentConfig& cfg, const std::string& dataset_csv,
                  const std::string& models_dir, const std::string& out_dir, std::ostream& log);

} // namespace pamk::experiment

#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pamk/features.hpp"
#include "pamk/gmp.hpp"
#include "pamk/neuralcore.hpp"
#include "pamk/signals.hpp"

namespace pamk::models {

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch_size = 256;
    int L1 = 200; // stage-1 epoch cap
    int L2 = 100; // stage-2 epoch cap
    std::optional<double> mse_target;
    std::uint64_t seed = 1;
    bool shuffle = true;

    void validate() const;
};

struct TrainLogRow {
    int stage = 0;
    int epoch = 0;
    double mean_mse = 0.0;
};
using TrainLog = std::vector<TrainLogRow>;

/// Paper-shaped hidden widths for the fully-connected baselines.
int default_arvtdnn_hidden(int K);
std::vector<int> default_dnn_hidden(int K);

/// Tensor-input model: 3K 3x3 kernels, dual attention, FC head (5K, 3K, 2K).
nn::DrvcnnNet build_drvcnn(int K, int M, std::uint64_t seed);
/// One tanh hidden layer over the full flattened features.
nn::MlpNet build_arvtdnn(int K, int M, int hidden, std::uint64_t seed);
/// Three tanh hidden layers over I/Q-only features.
nn::MlpNet build_dnn(int K, int M, const std::vector<int>& hidden, std::uint64_t seed);

/// Precomputed per-sample tensors and targets for training.
struct TensorDataset {
    std::vector<nn::Tensor3> xs;
    std::vector<std::vector<double>> ys;
};
TensorDataset build_tensor_dataset(const signals::Dataset& ds,
                                   const features::FeatureConfig& cfg);

struct VectorDataset {
    std::vector<std::vector<double>> xs;
    std::vector<std::vector<double>> ys;
};
VectorDataset build_vector_dataset(const signals::Dataset& ds,
                                   const features::FeatureConfig& cfg,
                                   features::MlpVariant variant);

/// Two-stage procedure: stage 1 trains everything, then the convolution is
/// frozen and stage 2 re-trains attention and FC layers. Each stage logs the
/// epoch-start MSE and exits early once it meets mse_target.
TrainLog train_two_stage(nn::DrvcnnNet& net, const TensorDataset& data, const TrainConfig& cfg);

/// Stage-2 only variant used after load_predesigned_filter.
TrainLog train_stage2_only(nn::DrvcnnNet& net, const TensorDataset& data, const TrainConfig& cfg);

/// Single-stage Adam loop for the FC baselines (L1 epochs).
TrainLog train_mlp(nn::MlpNet& net, const VectorDataset& data, const TrainConfig& cfg);

/// Replaces and freezes the convolution block.
void load_predesigned_filter(nn::DrvcnnNet& net, std::span<const double> kernels,
                             std::span<const double> biases);

/// One trained model of any kind, ready for prediction and persistence.
struct TrainedModel {
    std::string type; // drvcnn | arvtdnn | dnn | gmp
    std::string name;
    features::FeatureConfig feature;
    std::variant<nn::DrvcnnNet, nn::MlpNet, GmpModel> impl;
    std::vector<double> scale_factors;
    std::string dataset_id;

    int coefficient_count() const;

    /// Per-sample feature build and forward pass, assembled back into K
    /// complex series.
    std::vector<ComplexSeries> predict(const std::vector<ComplexSeries>& carriers_in) const;
};

} // namespace pamk::models

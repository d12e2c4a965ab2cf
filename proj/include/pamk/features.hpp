#pragma once

#include <vector>

#include "pamk/complexseries.hpp"

namespace pamk::features {

enum class EdgePolicy {
    kZeroPad, // lags before sample 0 read as zero
    kDrop,    // callers skip the first M samples instead
};

/// Shape of the model input: per carrier, 2 + |envelope_exponents| rows by
/// M+1 lag columns, stacked over K carriers.
struct FeatureConfig {
    int M = 3; // memory depth
    int K = 1; // carrier count
    std::vector<int> envelope_exponents{1, 2, 3};
    EdgePolicy edge_policy = EdgePolicy::kZeroPad;

    int rows() const { return 2 + static_cast<int>(envelope_exponents.size()); }
    int lags() const { return M + 1; }

    void validate() const;
};

/// Real input tensor of one time index, laid out rows x lags x carriers with
/// the carrier axis fastest.
struct FeatureTensor {
    int rows = 0;
    int lags = 0;
    int K = 0;
    long time_index = 0;
    std::vector<double> values;

    double& at(int r, int c, int k) {
        return values[static_cast<std::size_t>((r * lags + c) * K + k)];
    }
    double at(int r, int c, int k) const {
        return values[static_cast<std::size_t>((r * lags + c) * K + k)];
    }
};

enum class MlpVariant {
    kArvtdnn, // all rows flattened: 5(M+1)K at defaults
    kDnn,     // I/Q rows only: 2(M+1)K
};

/// Per-carrier feature matrix at time n, row-major rows x (M+1):
/// row 0 holds I at lags 0..M, row 1 holds Q, the remaining rows hold
/// |x|^p for each configured exponent p.
std::vector<double> build_carrier_matrix(const ComplexSeries& x, long n, const FeatureConfig& cfg);

/// Stacks the K carrier matrices into one tensor.
FeatureTensor build_input_tensor(const std::vector<ComplexSeries>& carriers, long n,
                                 const FeatureConfig& cfg);

/// Flattened feature vector for the fully-connected baselines. Row-major
/// within a carrier, carriers outermost.
std::vector<double> build_mlp_features(const std::vector<ComplexSeries>& carriers, long n,
                                       const FeatureConfig& cfg, MlpVariant variant);

} // namespace pamk::features

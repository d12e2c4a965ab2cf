#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pamk/features.hpp"

namespace pamk::nn {

enum class Activation { kLinear, kTanh, kSoftmax };

/// Dense real tensor, H x W x S with the channel axis fastest.
struct Tensor3 {
    int h = 0, w = 0, s = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int h_, int w_, int s_)
        : h(h_), w(w_), s(s_), v(static_cast<std::size_t>(h_) * w_ * s_, 0.0) {}

    double& at(int y, int x, int c) { return v[static_cast<std::size_t>((y * w + x) * s + c)]; }
    double at(int y, int x, int c) const {
        return v[static_cast<std::size_t>((y * w + x) * s + c)];
    }
    std::size_t size() const { return v.size(); }
};

/// Converts a feature tensor (rows x lags x carriers) into the network input.
Tensor3 to_tensor3(const features::FeatureTensor& f);

/// Numerically safe softmax (max subtraction).
void softmax_inplace(std::span<double> x);

/// y = act(W x + b), W row-major out x in.
void dense_forward(std::span<const double> w, std::span<const double> b, int out_dim, int in_dim,
                   std::span<const double> x, Activation act, std::span<double> y);

/// Valid 3x3 convolution, stride 1, tanh activation. kernels are laid out
/// ((s*3 + ky)*3 + kx)*C + c; output dims (H-2, W-2, num_kernels).
Tensor3 conv2d_valid_forward(const Tensor3& x, std::span<const double> kernels,
                             std::span<const double> biases, int num_kernels);

/// Mean over H and W; one value per channel.
std::vector<double> avg_pool_spatial(const Tensor3& r);
/// Mean over S; one value per location, indexed y*W + x.
std::vector<double> avg_pool_channel(const Tensor3& r);

/// Parameters of the two pooled FC-softmax reweighting paths.
struct AttentionParams {
    int S = 0;
    int HW = 0;
    int ch_bottleneck = 0; // max(1, S/3)
    int sp_bottleneck = 0; // max(1, HW/3)
    std::vector<double> ch1_w, ch1_b, ch2_w, ch2_b;
    std::vector<double> sp1_w, sp1_b, sp2_w, sp2_b;
};

AttentionParams make_attention_params(int S, int HW);

struct AttentionResult {
    std::vector<double> weights;
    Tensor3 weighted;
};

/// weights = softmax(FC(tanh(FC(avg_pool_spatial(r))))), broadcast-multiplied
/// over channels.
AttentionResult channel_attention(const Tensor3& r, const AttentionParams& p);
/// Mirror of channel_attention over the spatial axis.
AttentionResult spatial_attention(const Tensor3& ra, const AttentionParams& p);

/// One named slice of a flat parameter vector.
struct ParamBlock {
    std::string name;
    std::vector<int> shape;
    std::size_t offset = 0;
    std::size_t count = 0;
};

/// Convolution, dual attention and FC head with all learnable parameters in
/// one flat vector. The convolution block sits at the front of the vector so
/// freezing it is a prefix skip.
struct DrvcnnNet {
    int K = 0;
    int M = 0;
    int rows = 5;

    int in_h = 0, in_w = 0, in_c = 0; // rows, M+1, K
    int S = 0;                        // 3K kernels
    int out_h = 0, out_w = 0;         // valid-conv output
    int ch_bottleneck = 0, sp_bottleneck = 0;
    int fc1_dim = 0, fc2_dim = 0, out_dim = 0; // 5K, 3K, 2K

    bool frozen_conv = false;
    std::vector<double> params;

    std::size_t conv_param_count() const;
    std::vector<ParamBlock> blocks() const;
    std::span<const double> block_values(const ParamBlock& b) const {
        return {params.data() + b.offset, b.count};
    }
};

/// Builds the network shape for (K, M) and zero parameters. Throws when a
/// valid 3x3 convolution is impossible.
DrvcnnNet make_drvcnn_shape(int K, int M, int rows = 5);

/// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases, in block order.
void init_glorot(std::vector<double>& params, const std::vector<ParamBlock>& blocks,
                 std::uint64_t seed);

std::vector<double> drvcnn_forward(const DrvcnnNet& net, const Tensor3& x);

/// Mean-squared-error over outputs and batch.
double drvcnn_batch_loss(const DrvcnnNet& net, std::span<const Tensor3> xs,
                         std::span<const std::vector<double>> ys);

/// Loss plus exact analytic gradients. When frozen (or net.frozen_conv) the
/// convolution block of the gradient is identically zero.
double drvcnn_batch_loss_grad(const DrvcnnNet& net, std::span<const Tensor3> xs,
                              std::span<const std::vector<double>> ys, std::vector<double>& grad,
                              bool frozen_conv);

/// Fully-connected net: tanh hidden layers, linear output.
struct MlpNet {
    int in_dim = 0;
    int out_dim = 0;
    std::vector<int> hidden;
    std::vector<double> params;

    std::vector<ParamBlock> blocks() const;
};

MlpNet make_mlp_shape(int in_dim, const std::vector<int>& hidden, int out_dim);

std::vector<double> mlp_forward(const MlpNet& net, std::span<const double> x);

double mlp_batch_loss(const MlpNet& net, std::span<const std::vector<double>> xs,
                      std::span<const std::vector<double>> ys);

double mlp_batch_loss_grad(const MlpNet& net, std::span<const std::vector<double>> xs,
                           std::span<const std::vector<double>> ys, std::vector<double>& grad);

/// Adam optimizer state; moments are zero-initialized and t counts steps.
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<double> m, v;

    AdamState() = default;
    AdamState(std::size_t n, double lr_, double b1, double b2, double eps_)
        : lr(lr_), beta1(b1), beta2(b2), eps(eps_), m(n, 0.0), v(n, 0.0) {}
};

/// In-place Adam update with bias correction.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

template <typename Net>
std::size_t count_parameters(const Net& net) {
    return net.params.size();
}

} // namespace pamk::nn

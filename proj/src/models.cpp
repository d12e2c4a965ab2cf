#include "pamk/models.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "pamk/errors.hpp"
#include "pamk/kernels.hpp"
#include "pamk/parallel.hpp"
#include "pamk/rng.hpp"

namespace pamk {

int max_threads() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("PA_MODELKIT_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

void parallel_for(std::size_t n_tasks, const std::function<void(std::size_t)>& fn) {
    const int workers = std::min<std::size_t>(static_cast<std::size_t>(max_threads()), n_tasks);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n_tasks) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace pamk

namespace pamk::models {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
        throw ConfigError("Adam betas must lie in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (L1 < 0 || L2 < 0) throw ConfigError("epoch caps must be nonnegative");
    if (mse_target && !(*mse_target > 0.0)) throw ConfigError("mse_target must be positive");
}

int default_arvtdnn_hidden(int K) {
    switch (K) {
        case 1: return 17;
        case 2: return 35;
        case 3: return 40;
        default: return 15 * K; // beyond the documented configurations
    }
}

std::vector<int> default_dnn_hidden(int K) {
    switch (K) {
        case 1: return {17, 17, 17};
        case 2: return {25, 25, 25};
        case 3: return {30, 30, 30};
        default: return {10 * K, 10 * K, 10 * K};
    }
}

nn::DrvcnnNet build_drvcnn(int K, int M, std::uint64_t seed) {
    nn::DrvcnnNet net = nn::make_drvcnn_shape(K, M);
    nn::init_glorot(net.params, net.blocks(), seed);
    return net;
}

nn::MlpNet build_arvtdnn(int K, int M, int hidden, std::uint64_t seed) {
    features::FeatureConfig fc;
    fc.K = K;
    fc.M = M;
    nn::MlpNet net = nn::make_mlp_shape(fc.rows() * fc.lags() * K, {hidden}, 2 * K);
    nn::init_glorot(net.params, net.blocks(), seed);
    return net;
}

nn::MlpNet build_dnn(int K, int M, const std::vector<int>& hidden, std::uint64_t seed) {
    nn::MlpNet net = nn::make_mlp_shape(2 * (M + 1) * K, hidden, 2 * K);
    nn::init_glorot(net.params, net.blocks(), seed);
    return net;
}

namespace {

std::vector<double> targets_at(const signals::Dataset& ds, std::size_t n) {
    std::vector<double> y(static_cast<std::size_t>(2 * ds.K));
    for (int k = 0; k < ds.K; ++k) {
        const cplx v = ds.carriers_out[static_cast<std::size_t>(k)].samples[n];
        y[static_cast<std::size_t>(2 * k)] = v.real();
        y[static_cast<std::size_t>(2 * k + 1)] = v.imag();
    }
    return y;
}

std::size_t first_index(const features::FeatureConfig& cfg) {
    return cfg.edge_policy == features::EdgePolicy::kDrop ? static_cast<std::size_t>(cfg.M) : 0;
}

} // namespace

TensorDataset build_tensor_dataset(const signals::Dataset& ds,
                                   const features::FeatureConfig& cfg) {
    ds.validate();
    if (cfg.K != ds.K) throw ConfigError("feature config K does not match the dataset");
    TensorDataset out;
    const std::size_t start = first_index(cfg);
    if (start >= ds.num_samples) throw ArgumentError("dataset shorter than the memory depth");
    out.xs.resize(ds.num_samples - start);
    out.ys.resize(ds.num_samples - start);
    parallel_for((ds.num_samples - start + 1023) / 1024, [&](std::size_t chunk) {
        const std::size_t lo = chunk * 1024;
        const std::size_t hi = std::min(lo + 1024, ds.num_samples - start);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t n = start + i;
            out.xs[i] = nn::to_tensor3(
                features::build_input_tensor(ds.carriers_in, static_cast<long>(n), cfg));
            out.ys[i] = targets_at(ds, n);
        }
    });
    return out;
}

VectorDataset build_vector_dataset(const signals::Dataset& ds,
                                   const features::FeatureConfig& cfg,
                                   features::MlpVariant variant) {
    ds.validate();
    if (cfg.K != ds.K) throw ConfigError("feature config K does not match the dataset");
    VectorDataset out;
    const std::size_t start = first_index(cfg);
    if (start >= ds.num_samples) throw ArgumentError("dataset shorter than the memory depth");
    out.xs.resize(ds.num_samples - start);
    out.ys.resize(ds.num_samples - start);
    parallel_for((ds.num_samples - start + 1023) / 1024, [&](std::size_t chunk) {
        const std::size_t lo = chunk * 1024;
        const std::size_t hi = std::min(lo + 1024, ds.num_samples - start);
        for (std::size_t i = lo; i < hi; ++i) {
            const std::size_t n = start + i;
            out.xs[i] =
                features::build_mlp_features(ds.carriers_in, static_cast<long>(n), cfg, variant);
            out.ys[i] = targets_at(ds, n);
        }
    });
    return out;
}

namespace {

// Gradients are always accumulated over fixed 64-sample slices combined in
// slice order, so results do not depend on the worker count.
constexpr std::size_t kGradChunk = 64;

/// Model-specific hooks for the shared epoch loop.
struct Problem {
    virtual ~Problem() = default;
    virtual std::size_t size() const = 0;
    virtual double full_loss() const = 0;
    /// Mean-MSE gradient over the given sample indices.
    virtual double batch_grad(std::span<const std::size_t> idx, std::vector<double>& grad) = 0;
    virtual std::span<double> trainable_params() = 0;
};

struct DrvcnnProblem final : Problem {
    nn::DrvcnnNet& net;
    const TensorDataset& data;
    bool frozen;
    std::size_t train_from; // parameter offset where the trainable range starts

    DrvcnnProblem(nn::DrvcnnNet& n, const TensorDataset& d, bool frozen_conv)
        : net(n), data(d), frozen(frozen_conv),
          train_from(frozen_conv ? n.conv_param_count() : 0) {}

    std::size_t size() const override { return data.xs.size(); }

    double full_loss() const override {
        const std::size_t n = data.xs.size();
        const std::size_t chunks = (n + 1023) / 1024;
        std::vector<double> partial(chunks, 0.0);
        parallel_for(chunks, [&](std::size_t ci) {
            const std::size_t lo = ci * 1024;
            const std::size_t len = std::min<std::size_t>(1024, n - lo);
            partial[ci] = nn::drvcnn_batch_loss(net, {data.xs.data() + lo, len},
                                                {data.ys.data() + lo, len}) *
                          static_cast<double>(len);
        });
        double acc = 0.0;
        for (const double p : partial) acc += p;
        return acc / static_cast<double>(n);
    }

    double batch_grad(std::span<const std::size_t> idx, std::vector<double>& grad) override {
        const std::size_t nb = idx.size();
        const std::size_t chunks = (nb + kGradChunk - 1) / kGradChunk;
        std::vector<std::vector<double>> cgrad(chunks);
        std::vector<double> closs(chunks, 0.0);
        std::vector<std::vector<nn::Tensor3>> cxs(chunks);
        std::vector<std::vector<std::vector<double>>> cys(chunks);
        parallel_for(chunks, [&](std::size_t ci) {
            const std::size_t lo = ci * kGradChunk;
            const std::size_t len = std::min(kGradChunk, nb - lo);
            cxs[ci].reserve(len);
            cys[ci].reserve(len);
            for (std::size_t i = 0; i < len; ++i) {
                cxs[ci].push_back(data.xs[idx[lo + i]]);
                cys[ci].push_back(data.ys[idx[lo + i]]);
            }
            closs[ci] = nn::drvcnn_batch_loss_grad(net, cxs[ci], cys[ci], cgrad[ci], frozen) *
                        static_cast<double>(len);
        });
        grad.assign(net.params.size(), 0.0);
        double loss = 0.0;
        const auto& kern = kernels::active_backend();
        for (std::size_t ci = 0; ci < chunks; ++ci) {
            const std::size_t lo = ci * kGradChunk;
            const std::size_t len = std::min(kGradChunk, nb - lo);
            const double w = static_cast<double>(len) / static_cast<double>(nb);
            kern.axpy(w, cgrad[ci].data(), grad.data(), grad.size());
            loss += closs[ci];
        }
        return loss / static_cast<double>(nb);
    }

    std::span<double> trainable_params() override {
        return {net.params.data() + train_from, net.params.size() - train_from};
    }
};

struct MlpProblem final : Problem {
    nn::MlpNet& net;
    const VectorDataset& data;

    MlpProblem(nn::MlpNet& n, const VectorDataset& d) : net(n), data(d) {}

    std::size_t size() const override { return data.xs.size(); }

    double full_loss() const override {
        const std::size_t n = data.xs.size();
        const std::size_t chunks = (n + 1023) / 1024;
        std::vector<double> partial(chunks, 0.0);
        parallel_for(chunks, [&](std::size_t ci) {
            const std::size_t lo = ci * 1024;
            const std::size_t len = std::min<std::size_t>(1024, n - lo);
            partial[ci] = nn::mlp_batch_loss(net, {data.xs.data() + lo, len},
                                             {data.ys.data() + lo, len}) *
                          static_cast<double>(len);
        });
        double acc = 0.0;
        for (const double p : partial) acc += p;
        return acc / static_cast<double>(n);
    }

    double batch_grad(std::span<const std::size_t> idx, std::vector<double>& grad) override {
        const std::size_t nb = idx.size();
        const std::size_t chunks = (nb + kGradChunk - 1) / kGradChunk;
        std::vector<std::vector<double>> cgrad(chunks);
        std::vector<double> closs(chunks, 0.0);
        parallel_for(chunks, [&](std::size_t ci) {
            const std::size_t lo = ci * kGradChunk;
            const std::size_t len = std::min(kGradChunk, nb - lo);
            std::vector<std::vector<double>> bx, by;
            bx.reserve(len);
            by.reserve(len);
            for (std::size_t i = 0; i < len; ++i) {
                bx.push_back(data.xs[idx[lo + i]]);
                by.push_back(data.ys[idx[lo + i]]);
            }
            closs[ci] = nn::mlp_batch_loss_grad(net, bx, by, cgrad[ci]) *
                        static_cast<double>(len);
        });
        grad.assign(net.params.size(), 0.0);
        double loss = 0.0;
        const auto& kern = kernels::active_backend();
        for (std::size_t ci = 0; ci < chunks; ++ci) {
            const std::size_t lo = ci * kGradChunk;
            const std::size_t len = std::min(kGradChunk, nb - lo);
            const double w = static_cast<double>(len) / static_cast<double>(nb);
            kern.axpy(w, cgrad[ci].data(), grad.data(), grad.size());
            loss += closs[ci];
        }
        return loss / static_cast<double>(nb);
    }

    std::span<double> trainable_params() override {
        return {net.params.data(), net.params.size()};
    }
};

void run_stage(Problem& prob, int stage, int max_epochs, const TrainConfig& cfg, Rng& rng,
               TrainLog& log) {
    const std::size_t n = prob.size();
    if (n == 0) throw ArgumentError("training set is empty");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    const std::span<double> params = prob.trainable_params();
    nn::AdamState adam(params.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    std::vector<double> grad;

    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        // Epoch-start MSE drives both logging and the early-exit judgment,
        // evaluated before any update of this epoch.
        const double mse = prob.full_loss();
        log.push_back({stage, epoch, mse});
        if (!std::isfinite(mse))
            throw TrainingError("training diverged at stage " + std::to_string(stage) +
                                " epoch " + std::to_string(epoch));
        if (cfg.mse_target && mse <= *cfg.mse_target) return;

        if (cfg.shuffle) {
            for (std::size_t i = n - 1; i > 0; --i) {
                const std::size_t j = rng.uniform_int(i + 1);
                std::swap(order[i], order[j]);
            }
        }
        const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
        for (std::size_t at = 0; at < n; at += bs) {
            const std::size_t len = std::min(bs, n - at);
            const double batch_loss = prob.batch_grad({order.data() + at, len}, grad);
            if (!std::isfinite(batch_loss))
                throw TrainingError("training diverged at stage " + std::to_string(stage) +
                                    " epoch " + std::to_string(epoch));
            const std::size_t skip = grad.size() - params.size();
            nn::adam_step(params, {grad.data() + skip, params.size()}, adam);
        }
    }

    for (const double p : params) {
        if (!std::isfinite(p))
            throw TrainingError("training diverged at stage " + std::to_string(stage) +
                                " epoch " + std::to_string(max_epochs));
    }
}

} // namespace

TrainLog train_two_stage(nn::DrvcnnNet& net, const TensorDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    TrainLog log;
    Rng rng(derive_seed(cfg.seed, "train/shuffle"));

    net.frozen_conv = false;
    {
        DrvcnnProblem stage1(net, data, false);
        run_stage(stage1, 1, cfg.L1, cfg, rng, log);
    }
    net.frozen_conv = true;
    {
        DrvcnnProblem stage2(net, data, true);
        run_stage(stage2, 2, cfg.L2, cfg, rng, log);
    }
    return log;
}

TrainLog train_stage2_only(nn::DrvcnnNet& net, const TensorDataset& data,
                           const TrainConfig& cfg) {
    cfg.validate();
    if (!net.frozen_conv)
        throw ConfigError("stage-2 training requires a frozen convolution layer");
    TrainLog log;
    Rng rng(derive_seed(cfg.seed, "train/shuffle"));
    DrvcnnProblem stage2(net, data, true);
    run_stage(stage2, 2, cfg.L2, cfg, rng, log);
    return log;
}

TrainLog train_mlp(nn::MlpNet& net, const VectorDataset& data, const TrainConfig& cfg) {
    cfg.validate();
    TrainLog log;
    Rng rng(derive_seed(cfg.seed, "train/shuffle"));
    MlpProblem prob(net, data);
    run_stage(prob, 1, cfg.L1, cfg, rng, log);
    return log;
}

void load_predesigned_filter(nn::DrvcnnNet& net, std::span<const double> kernels,
                             std::span<const double> biases) {
    const std::size_t nk = static_cast<std::size_t>(net.S) * 9 * net.in_c;
    if (kernels.size() != nk || biases.size() != static_cast<std::size_t>(net.S))
        throw ConfigError("pre-designed filter shape does not match the model");
    std::copy(kernels.begin(), kernels.end(), net.params.begin());
    std::copy(biases.begin(), biases.end(), net.params.begin() + static_cast<long>(nk));
    net.frozen_conv = true;
}

int TrainedModel::coefficient_count() const {
    if (const auto* g = std::get_if<GmpModel>(&impl)) return g->coefficient_count();
    if (const auto* d = std::get_if<nn::DrvcnnNet>(&impl))
        return static_cast<int>(nn::count_parameters(*d));
    return static_cast<int>(nn::count_parameters(std::get<nn::MlpNet>(impl)));
}

std::vector<ComplexSeries> TrainedModel::predict(
    const std::vector<ComplexSeries>& carriers_in) const {
    if (carriers_in.size() != static_cast<std::size_t>(feature.K))
        throw ConfigError("carrier count does not match the model");
    const std::size_t n = carriers_in[0].size();
    for (const ComplexSeries& c : carriers_in) {
        if (c.size() != n) throw ArgumentError("carriers must share length");
    }

    if (const auto* g = std::get_if<GmpModel>(&impl)) {
        return {gmp_predict(*g, carriers_in[0])};
    }

    std::vector<std::vector<cplx>> out(static_cast<std::size_t>(feature.K),
                                       std::vector<cplx>(n, cplx(0.0, 0.0)));
    const std::size_t chunks = (n + 2047) / 2048;
    parallel_for(chunks, [&](std::size_t ci) {
        const std::size_t lo = ci * 2048;
        const std::size_t hi = std::min(lo + 2048, n);
        for (std::size_t i = lo; i < hi; ++i) {
            std::vector<double> y;
            if (const auto* d = std::get_if<nn::DrvcnnNet>(&impl)) {
                const nn::Tensor3 x = nn::to_tensor3(
                    features::build_input_tensor(carriers_in, static_cast<long>(i), feature));
                y = nn::drvcnn_forward(*d, x);
            } else {
                const auto& m = std::get<nn::MlpNet>(impl);
                const features::MlpVariant variant = type == "dnn"
                                                         ? features::MlpVariant::kDnn
                                                         : features::MlpVariant::kArvtdnn;
                const std::vector<double> x =
                    features::build_mlp_features(carriers_in, static_cast<long>(i), feature,
                                                 variant);
                y = nn::mlp_forward(m, x);
            }
            for (int k = 0; k < feature.K; ++k) {
                out[static_cast<std::size_t>(k)][i] =
                    cplx(y[static_cast<std::size_t>(2 * k)], y[static_cast<std::size_t>(2 * k + 1)]);
            }
        }
    });

    std::vector<ComplexSeries> series;
    series.reserve(out.size());
    for (std::vector<cplx>& v : out)
        series.emplace_back(std::move(v), carriers_in[0].sample_rate_hz);
    return series;
}

} // namespace pamk::models

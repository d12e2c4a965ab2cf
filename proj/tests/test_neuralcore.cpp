#include <doctest.h>

#include <cmath>

#include "pamk/errors.hpp"
#include "pamk/models.hpp"
#include "pamk/neuralcore.hpp"
#include "pamk/rng.hpp"

using namespace pamk;
using namespace pamk::nn;

namespace {

Tensor3 random_tensor(Rng& rng, int h, int w, int s, double limit = 1.0) {
    Tensor3 t(h, w, s);
    for (double& v : t.v) v = rng.uniform_symmetric(limit);
    return t;
}

std::vector<double> random_vec(Rng& rng, std::size_t n, double limit = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform_symmetric(limit);
    return v;
}

/// Central-difference gradient of the batch loss, one parameter at a time.
std::vector<double> fd_gradient_drvcnn(DrvcnnNet& net, std::span<const Tensor3> xs,
                                       std::span<const std::vector<double>> ys, double h) {
    std::vector<double> fd(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const double keep = net.params[i];
        net.params[i] = keep + h;
        const double up = drvcnn_batch_loss(net, xs, ys);
        net.params[i] = keep - h;
        const double dn = drvcnn_batch_loss(net, xs, ys);
        net.params[i] = keep;
        fd[i] = (up - dn) / (2.0 * h);
    }
    return fd;
}

std::vector<double> fd_gradient_mlp(MlpNet& net, std::span<const std::vector<double>> xs,
                                    std::span<const std::vector<double>> ys, double h) {
    std::vector<double> fd(net.params.size());
    for (std::size_t i = 0; i < net.params.size(); ++i) {
        const double keep = net.params[i];
        net.params[i] = keep + h;
        const double up = mlp_batch_loss(net, xs, ys);
        net.params[i] = keep - h;
        const double dn = mlp_batch_loss(net, xs, ys);
        net.params[i] = keep;
        fd[i] = (up - dn) / (2.0 * h);
    }
    return fd;
}

/// Per-block L2 relative error between two gradient vectors.
double max_block_rel_error(const std::vector<ParamBlock>& blocks, const std::vector<double>& a,
                           const std::vector<double>& b) {
    double worst = 0.0;
    for (const ParamBlock& blk : blocks) {
        double na = 0.0, nb = 0.0, nd = 0.0;
        for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i) {
            na += a[i] * a[i];
            nb += b[i] * b[i];
            nd += (a[i] - b[i]) * (a[i] - b[i]);
        }
        const double denom = std::max(std::sqrt(na), std::sqrt(nb));
        if (denom == 0.0) continue;
        worst = std::max(worst, std::sqrt(nd) / denom);
    }
    return worst;
}

} // namespace

TEST_CASE("zero input convolution yields tanh of the biases") {
    Tensor3 x(5, 4, 1);
    std::vector<double> kernels(3 * 9 * 1, 0.3);
    std::vector<double> biases{0.1, -0.4, 2.0};
    const Tensor3 out = conv2d_valid_forward(x, kernels, biases, 3);
    CHECK(out.h == 3);
    CHECK(out.w == 2);
    CHECK(out.s == 3);
    for (int y = 0; y < out.h; ++y)
        for (int xx = 0; xx < out.w; ++xx)
            for (int s = 0; s < out.s; ++s)
                CHECK(out.at(y, xx, s) ==
                      doctest::Approx(std::tanh(biases[static_cast<std::size_t>(s)])));
}

TEST_CASE("valid convolution output dimensions") {
    Rng rng(3);
    SUBCASE("5x4x1 with 3 kernels") {
        const Tensor3 x = random_tensor(rng, 5, 4, 1);
        const Tensor3 out = conv2d_valid_forward(x, random_vec(rng, 3 * 9 * 1),
                                                 random_vec(rng, 3), 3);
        CHECK(out.h == 3);
        CHECK(out.w == 2);
        CHECK(out.s == 3);
    }
    SUBCASE("5x3x3 with 9 kernels") {
        const Tensor3 x = random_tensor(rng, 5, 3, 3);
        const Tensor3 out = conv2d_valid_forward(x, random_vec(rng, 9 * 9 * 3),
                                                 random_vec(rng, 9), 9);
        CHECK(out.h == 3);
        CHECK(out.w == 1);
        CHECK(out.s == 9);
    }
    SUBCASE("input below the kernel size is rejected") {
        const Tensor3 x = random_tensor(rng, 5, 2, 1);
        CHECK_THROWS_AS(conv2d_valid_forward(x, random_vec(rng, 27), random_vec(rng, 3), 3),
                        ShapeError);
    }
}

TEST_CASE("average pooling") {
    SUBCASE("constant tensor pools to the constant") {
        Tensor3 t(3, 2, 4);
        for (double& v : t.v) v = 0.7;
        for (const double v : avg_pool_spatial(t)) CHECK(v == doctest::Approx(0.7));
        for (const double v : avg_pool_channel(t)) CHECK(v == doctest::Approx(0.7));
    }
    SUBCASE("per-channel means survive spatial pooling") {
        Tensor3 t(2, 2, 3);
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x)
                for (int s = 0; s < 3; ++s) t.at(y, x, s) = static_cast<double>(s + 1);
        const std::vector<double> pooled = avg_pool_spatial(t);
        CHECK(pooled[0] == doctest::Approx(1.0));
        CHECK(pooled[1] == doctest::Approx(2.0));
        CHECK(pooled[2] == doctest::Approx(3.0));
    }
    SUBCASE("2x2 mean") {
        Tensor3 t(2, 2, 1);
        t.at(0, 0, 0) = 1;
        t.at(0, 1, 0) = 2;
        t.at(1, 0, 0) = 3;
        t.at(1, 1, 0) = 4;
        CHECK(avg_pool_spatial(t)[0] == doctest::Approx(2.5));
    }
}

TEST_CASE("dense layer basics") {
    SUBCASE("identity weights, linear activation") {
        const std::vector<double> w{1, 0, 0, 0, 1, 0, 0, 0, 1};
        const std::vector<double> b(3, 0.0);
        const std::vector<double> x{0.3, -0.7, 2.0};
        std::vector<double> y(3);
        dense_forward(w, b, 3, 3, x, Activation::kLinear, y);
        for (int i = 0; i < 3; ++i) CHECK(y[static_cast<std::size_t>(i)] == doctest::Approx(x[static_cast<std::size_t>(i)]));
    }
    SUBCASE("softmax over equal logits is uniform") {
        const std::vector<double> w(4 * 2, 0.0);
        const std::vector<double> b(4, 3.7);
        std::vector<double> y(4);
        dense_forward(w, b, 4, 2, std::vector<double>{1.0, -1.0}, Activation::kSoftmax, y);
        for (const double v : y) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("softmax survives huge logits") {
        const std::vector<double> w{1e4, -1e4};
        const std::vector<double> b(2, 0.0);
        std::vector<double> y(2);
        dense_forward(std::vector<double>{1e4, 0.0, -1e4, 0.0}, b, 2, 2,
                      std::vector<double>{1.0, 0.0}, Activation::kSoftmax, y);
        CHECK(std::isfinite(y[0]));
        CHECK(y[0] + y[1] == doctest::Approx(1.0));
    }
    SUBCASE("zero tanh layer returns zeros") {
        const std::vector<double> w(6, 0.0);
        const std::vector<double> b(2, 0.0);
        std::vector<double> y(2);
        dense_forward(w, b, 2, 3, std::vector<double>{1, 2, 3}, Activation::kTanh, y);
        CHECK(y[0] == 0.0);
        CHECK(y[1] == 0.0);
    }
    SUBCASE("dimension mismatch throws") {
        std::vector<double> y(2);
        CHECK_THROWS_AS(dense_forward(std::vector<double>{1.0}, std::vector<double>{0.0}, 2, 3,
                                      std::vector<double>{1, 2, 3}, Activation::kLinear, y),
                        ShapeError);
    }
}

TEST_CASE("channel attention") {
    Rng rng(5);
    const Tensor3 r = random_tensor(rng, 3, 2, 3);
    SUBCASE("zero parameters give uniform weights and R/S") {
        const AttentionParams p = make_attention_params(3, 6);
        const AttentionResult res = channel_attention(r, p);
        for (const double w : res.weights) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-12));
        for (int y = 0; y < r.h; ++y)
            for (int x = 0; x < r.w; ++x)
                for (int s = 0; s < r.s; ++s)
                    CHECK(res.weighted.at(y, x, s) == doctest::Approx(r.at(y, x, s) / 3.0));
    }
    SUBCASE("weights always sum to one") {
        AttentionParams p = make_attention_params(3, 6);
        for (double& v : p.ch1_w) v = rng.uniform_symmetric(2.0);
        for (double& v : p.ch2_w) v = rng.uniform_symmetric(2.0);
        for (double& v : p.ch2_b) v = rng.uniform_symmetric(2.0);
        const AttentionResult res = channel_attention(r, p);
        double sum = 0.0;
        for (const double w : res.weights) {
            CHECK(w >= 0.0);
            sum += w;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
        CHECK(res.weighted.h == r.h);
        CHECK(res.weighted.w == r.w);
        CHECK(res.weighted.s == r.s);
    }
    SUBCASE("a dominating pooled channel gets the largest weight") {
        // fc1 sums the pooled vector; fc2 spreads it as (+a, 0, -a).
        AttentionParams p = make_attention_params(3, 6);
        p.ch1_w = {1.0, 1.0, 1.0};
        p.ch2_w = {1.0, 0.0, -1.0};
        Tensor3 t(3, 2, 3);
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 2; ++x) t.at(y, x, 0) = 2.0;
        const AttentionResult res = channel_attention(t, p);
        CHECK(res.weights[0] > res.weights[1]);
        CHECK(res.weights[0] > res.weights[2]);
    }
}

TEST_CASE("spatial attention mirrors the channel path") {
    Rng rng(7);
    const Tensor3 ra = random_tensor(rng, 3, 2, 3);
    const AttentionParams p = make_attention_params(3, 6);
    const AttentionResult res = spatial_attention(ra, p);
    CHECK(res.weights.size() == 6);
    double sum = 0.0;
    for (const double w : res.weights) {
        CHECK(w == doctest::Approx(1.0 / 6).epsilon(1e-12));
        sum += w;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    for (int y = 0; y < ra.h; ++y)
        for (int x = 0; x < ra.w; ++x)
            for (int s = 0; s < ra.s; ++s)
                CHECK(res.weighted.at(y, x, s) == doctest::Approx(ra.at(y, x, s) / 6.0));
}

TEST_CASE("attention softmax properties over many random tensors") {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int K = 1 + static_cast<int>(rng.uniform_int(3));
        const int M = 2 + static_cast<int>(rng.uniform_int(2));
        const Tensor3 r = random_tensor(rng, 3, M - 1, 3 * K, 2.0);
        AttentionParams p = make_attention_params(3 * K, 3 * (M - 1));
        for (double& v : p.ch1_w) v = rng.uniform_symmetric(3.0);
        for (double& v : p.ch2_w) v = rng.uniform_symmetric(3.0);
        for (double& v : p.sp1_w) v = rng.uniform_symmetric(3.0);
        for (double& v : p.sp2_w) v = rng.uniform_symmetric(3.0);
        const AttentionResult ca = channel_attention(r, p);
        const AttentionResult sa = spatial_attention(ca.weighted, p);
        double sum_a = 0.0, sum_s = 0.0;
        for (const double w : ca.weights) {
            CHECK(w >= 0.0);
            sum_a += w;
        }
        for (const double w : sa.weights) {
            CHECK(w >= 0.0);
            sum_s += w;
        }
        CHECK(std::abs(sum_a - 1.0) < 1e-12);
        CHECK(std::abs(sum_s - 1.0) < 1e-12);
        CHECK(sa.weighted.size() == r.size());
    }
}

TEST_CASE("model forward basics") {
    SUBCASE("all-zero parameters produce zero output") {
        DrvcnnNet net = make_drvcnn_shape(2, 3);
        Rng rng(13);
        const Tensor3 x = random_tensor(rng, 5, 4, 2);
        for (const double v : drvcnn_forward(net, x)) CHECK(v == 0.0);
    }
    SUBCASE("output widths follow 2K") {
        Rng rng(17);
        DrvcnnNet net1 = models::build_drvcnn(1, 3, 1);
        CHECK(drvcnn_forward(net1, random_tensor(rng, 5, 4, 1)).size() == 2);
        DrvcnnNet net3 = models::build_drvcnn(3, 2, 1);
        CHECK(drvcnn_forward(net3, random_tensor(rng, 5, 3, 3)).size() == 6);
    }
    SUBCASE("shape mismatch throws") {
        DrvcnnNet net = make_drvcnn_shape(1, 3);
        Rng rng(19);
        const Tensor3 bad = random_tensor(rng, 5, 3, 1);
        CHECK_THROWS_AS(drvcnn_forward(net, bad), ShapeError);
    }
}

TEST_CASE("gradients vanish at the loss minimum") {
    Rng rng(23);
    DrvcnnNet net = models::build_drvcnn(1, 3, 7);
    const std::vector<Tensor3> xs{random_tensor(rng, 5, 4, 1)};
    const std::vector<std::vector<double>> ys{drvcnn_forward(net, xs[0])};
    std::vector<double> grad;
    const double loss = drvcnn_batch_loss_grad(net, xs, ys, grad, false);
    CHECK(loss == 0.0);
    for (const double g : grad) CHECK(g == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(29);
    for (const auto& [K, M] : std::vector<std::pair<int, int>>{{1, 3}, {2, 3}, {3, 2}}) {
        DrvcnnNet net = models::build_drvcnn(K, M, 31 + static_cast<std::uint64_t>(K));
        std::vector<Tensor3> xs;
        std::vector<std::vector<double>> ys;
        for (int b = 0; b < 2; ++b) {
            xs.push_back(random_tensor(rng, 5, M + 1, K));
            ys.push_back(random_vec(rng, static_cast<std::size_t>(2 * K)));
        }
        std::vector<double> grad;
        drvcnn_batch_loss_grad(net, xs, ys, grad, false);
        const std::vector<double> fd = fd_gradient_drvcnn(net, xs, ys, 1e-5);
        const double err = max_block_rel_error(net.blocks(), grad, fd);
        INFO("K=", K, " M=", M, " err=", err);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("frozen convolution zeroes its gradient block exactly") {
    Rng rng(37);
    DrvcnnNet net = models::build_drvcnn(2, 3, 41);
    const std::vector<Tensor3> xs{random_tensor(rng, 5, 4, 2)};
    const std::vector<std::vector<double>> ys{random_vec(rng, 4)};
    std::vector<double> grad;
    drvcnn_batch_loss_grad(net, xs, ys, grad, true);
    for (std::size_t i = 0; i < net.conv_param_count(); ++i) CHECK(grad[i] == 0.0);
    double rest = 0.0;
    for (std::size_t i = net.conv_param_count(); i < grad.size(); ++i) rest += std::abs(grad[i]);
    CHECK(rest > 0.0);
}

TEST_CASE("mlp gradients match central differences") {
    Rng rng(43);
    nn::MlpNet net = models::build_arvtdnn(1, 3, 9, 47);
    std::vector<std::vector<double>> xs, ys;
    for (int b = 0; b < 3; ++b) {
        xs.push_back(random_vec(rng, 20));
        ys.push_back(random_vec(rng, 2));
    }
    std::vector<double> grad;
    mlp_batch_loss_grad(net, xs, ys, grad);
    const std::vector<double> fd = fd_gradient_mlp(net, xs, ys, 1e-5);
    CHECK(max_block_rel_error(net.blocks(), grad, fd) < 1e-6);
}

TEST_CASE("adam step") {
    SUBCASE("zero gradient leaves parameters unchanged") {
        std::vector<double> p{0.5, -0.25};
        const std::vector<double> g{0.0, 0.0};
        AdamState st(2, 1e-3, 0.9, 0.999, 1e-8);
        adam_step(p, g, st);
        CHECK(p[0] == 0.5);
        CHECK(p[1] == -0.25);
        CHECK(st.t == 1);
    }
    SUBCASE("first step matches the closed form") {
        std::vector<double> p{0.0};
        const std::vector<double> g{1.0};
        AdamState st(1, 1e-3, 0.9, 0.999, 1e-8);
        adam_step(p, g, st);
        const double expect = -1e-3 * 1.0 / (1.0 + 1e-8);
        CHECK(p[0] == doctest::Approx(expect).epsilon(1e-14));
    }
    SUBCASE("identical calls from identical state match bitwise") {
        Rng rng(51);
        std::vector<double> p1 = random_vec(rng, 17);
        std::vector<double> p2 = p1;
        const std::vector<double> g = random_vec(rng, 17);
        AdamState s1(17, 1e-3, 0.9, 0.999, 1e-8);
        AdamState s2 = s1;
        adam_step(p1, g, s1);
        adam_step(p2, g, s2);
        for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i] == p2[i]);
    }
    SUBCASE("zero learning rate is the identity") {
        Rng rng(53);
        std::vector<double> p = random_vec(rng, 9);
        const std::vector<double> orig = p;
        const std::vector<double> g = random_vec(rng, 9);
        AdamState st(9, 0.0, 0.9, 0.999, 1e-8);
        for (int i = 0; i < 5; ++i) adam_step(p, g, st);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == orig[i]);
    }
}

TEST_CASE("parameter counts reproduce the reference table") {
    CHECK(count_parameters(models::build_drvcnn(1, 3, 1)) == 193);
    CHECK(count_parameters(models::build_arvtdnn(1, 3, 17, 1)) == 393);
    CHECK(count_parameters(models::build_dnn(1, 3, {17, 17, 17}, 1)) == 801);
}

TEST_CASE("count is additive over the block layout") {
    for (const auto& [K, M] : std::vector<std::pair<int, int>>{{1, 3}, {2, 3}, {3, 2}, {4, 4}}) {
        const DrvcnnNet net = make_drvcnn_shape(K, M);
        std::size_t total = 0;
        for (const ParamBlock& b : net.blocks()) {
            CHECK(b.offset == total); // blocks tile the vector in order
            total += b.count;
        }
        CHECK(total == count_parameters(net));
    }
}

TEST_CASE("glorot init is deterministic and bounded") {
    DrvcnnNet a = models::build_drvcnn(2, 3, 99);
    DrvcnnNet b = models::build_drvcnn(2, 3, 99);
    CHECK(a.params == b.params);
    DrvcnnNet c = models::build_drvcnn(2, 3, 100);
    CHECK(a.params != c.params);
    for (const ParamBlock& blk : a.blocks()) {
        if (blk.shape.size() == 1) {
            for (std::size_t i = blk.offset; i < blk.offset + blk.count; ++i)
                CHECK(a.params[i] == 0.0);
        }
    }
}

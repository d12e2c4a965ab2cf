#include "pamk/neuralcore.hpp"

#include <algorithm>
#include <cmath>

#include "pamk/errors.hpp"
#include "pamk/kernels.hpp"
#include "pamk/rng.hpp"

namespace pamk::nn {

namespace {

const kernels::Backend& kern() { return kernels::active_backend(); }

void apply_tanh(std::span<double> x) {
    for (double& v : x) v = std::tanh(v);
}

} // namespace

Tensor3 to_tensor3(const features::FeatureTensor& f) {
    Tensor3 t(f.rows, f.lags, f.K);
    t.v = f.values; // identical layout, channel axis fastest
    return t;
}

void softmax_inplace(std::span<double> x) {
    if (x.empty()) return;
    double peak = x[0];
    for (const double v : x) peak = std::max(peak, v);
    double sum = 0.0;
    for (double& v : x) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (double& v : x) v /= sum;
}

void dense_forward(std::span<const double> w, std::span<const double> b, int out_dim, int in_dim,
                   std::span<const double> x, Activation act, std::span<double> y) {
    if (x.size() != static_cast<std::size_t>(in_dim) ||
        y.size() != static_cast<std::size_t>(out_dim) ||
        w.size() != static_cast<std::size_t>(out_dim) * static_cast<std::size_t>(in_dim) ||
        b.size() != static_cast<std::size_t>(out_dim))
        throw ShapeError("dense layer dimension mismatch");
    for (int o = 0; o < out_dim; ++o) {
        y[static_cast<std::size_t>(o)] =
            kern().dot(w.data() + static_cast<std::size_t>(o) * in_dim, x.data(),
                       static_cast<std::size_t>(in_dim)) +
            b[static_cast<std::size_t>(o)];
    }
    switch (act) {
        case Activation::kLinear: break;
        case Activation::kTanh: apply_tanh(y); break;
        case Activation::kSoftmax: softmax_inplace(y); break;
    }
}

Tensor3 conv2d_valid_forward(const Tensor3& x, std::span<const double> kernels,
                             std::span<const double> biases, int num_kernels) {
    if (x.h < 3 || x.w < 3) throw ShapeError("input smaller than the 3x3 kernel");
    const int c_in = x.s;
    if (kernels.size() != static_cast<std::size_t>(num_kernels) * 9 * c_in ||
        biases.size() != static_cast<std::size_t>(num_kernels))
        throw ShapeError("convolution parameter size mismatch");

    Tensor3 out(x.h - 2, x.w - 2, num_kernels);
    for (int oy = 0; oy < out.h; ++oy) {
        for (int ox = 0; ox < out.w; ++ox) {
            for (int s = 0; s < num_kernels; ++s) {
                // Fixed row-major accumulation over the window.
                double acc = biases[static_cast<std::size_t>(s)];
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const double* kv =
                            kernels.data() + (static_cast<std::size_t>(s) * 9 +
                                              static_cast<std::size_t>(ky * 3 + kx)) *
                                                 c_in;
                        for (int c = 0; c < c_in; ++c) {
                            acc += kv[c] * x.at(oy + ky, ox + kx, c);
                        }
                    }
                }
                out.at(oy, ox, s) = std::tanh(acc);
            }
        }
    }
    return out;
}

std::vector<double> avg_pool_spatial(const Tensor3& r) {
    if (r.size() == 0) throw ShapeError("empty tensor");
    std::vector<double> pooled(static_cast<std::size_t>(r.s), 0.0);
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int c = 0; c < r.s; ++c) pooled[static_cast<std::size_t>(c)] += r.at(y, x, c);
    const double inv = 1.0 / (static_cast<double>(r.h) * static_cast<double>(r.w));
    for (double& v : pooled) v *= inv;
    return pooled;
}

std::vector<double> avg_pool_channel(const Tensor3& r) {
    if (r.size() == 0) throw ShapeError("empty tensor");
    std::vector<double> pooled(static_cast<std::size_t>(r.h) * r.w, 0.0);
    for (int y = 0; y < r.h; ++y) {
        for (int x = 0; x < r.w; ++x) {
            double acc = 0.0;
            for (int c = 0; c < r.s; ++c) acc += r.at(y, x, c);
            pooled[static_cast<std::size_t>(y * r.w + x)] = acc / static_cast<double>(r.s);
        }
    }
    return pooled;
}

AttentionParams make_attention_params(int S, int HW) {
    AttentionParams p;
    p.S = S;
    p.HW = HW;
    p.ch_bottleneck = std::max(1, S / 3);
    p.sp_bottleneck = std::max(1, HW / 3);
    p.ch1_w.assign(static_cast<std::size_t>(p.ch_bottleneck) * S, 0.0);
    p.ch1_b.assign(static_cast<std::size_t>(p.ch_bottleneck), 0.0);
    p.ch2_w.assign(static_cast<std::size_t>(S) * p.ch_bottleneck, 0.0);
    p.ch2_b.assign(static_cast<std::size_t>(S), 0.0);
    p.sp1_w.assign(static_cast<std::size_t>(p.sp_bottleneck) * HW, 0.0);
    p.sp1_b.assign(static_cast<std::size_t>(p.sp_bottleneck), 0.0);
    p.sp2_w.assign(static_cast<std::size_t>(HW) * p.sp_bottleneck, 0.0);
    p.sp2_b.assign(static_cast<std::size_t>(HW), 0.0);
    return p;
}

namespace {

/// pooled -> tanh FC -> softmax FC. Returns the weight vector.
std::vector<double> attention_weights(std::span<const double> pooled, std::span<const double> w1,
                                      std::span<const double> b1, int bneck,
                                      std::span<const double> w2, std::span<const double> b2,
                                      std::vector<double>* hidden_out = nullptr) {
    const int dim = static_cast<int>(pooled.size());
    std::vector<double> hidden(static_cast<std::size_t>(bneck));
    dense_forward(w1, b1, bneck, dim, pooled, Activation::kTanh, hidden);
    std::vector<double> weights(static_cast<std::size_t>(dim));
    dense_forward(w2, b2, dim, bneck, hidden, Activation::kSoftmax, weights);
    if (hidden_out) *hidden_out = std::move(hidden);
    return weights;
}

} // namespace

AttentionResult channel_attention(const Tensor3& r, const AttentionParams& p) {
    if (r.s != p.S) throw ShapeError("channel attention: channel count mismatch");
    const std::vector<double> pooled = avg_pool_spatial(r);
    AttentionResult res;
    res.weights = attention_weights(pooled, p.ch1_w, p.ch1_b, p.ch_bottleneck, p.ch2_w, p.ch2_b);
    res.weighted = r;
    for (int y = 0; y < r.h; ++y)
        for (int x = 0; x < r.w; ++x)
            for (int c = 0; c < r.s; ++c)
                res.weighted.at(y, x, c) *= res.weights[static_cast<std::size_t>(c)];
    return res;
}

AttentionResult spatial_attention(const Tensor3& ra, const AttentionParams& p) {
    if (ra.h * ra.w != p.HW) throw ShapeError("spatial attention: location count mismatch");
    const std::vector<double> pooled = avg_pool_channel(ra);
    AttentionResult res;
    res.weights = attention_weights(pooled, p.sp1_w, p.sp1_b, p.sp_bottleneck, p.sp2_w, p.sp2_b);
    res.weighted = ra;
    for (int y = 0; y < ra.h; ++y)
        for (int x = 0; x < ra.w; ++x)
            for (int c = 0; c < ra.s; ++c)
                res.weighted.at(y, x, c) *= res.weights[static_cast<std::size_t>(y * ra.w + x)];
    return res;
}

// ---------------------------------------------------------------------------
// DRVCNN network

namespace {

struct Offsets {
    std::size_t conv_k, conv_b;
    std::size_t c1w, c1b, c2w, c2b;
    std::size_t s1w, s1b, s2w, s2b;
    std::size_t f1w, f1b, f2w, f2b;
    std::size_t ow, ob;
    std::size_t total;
    int flat;
};

Offsets offsets_of(const DrvcnnNet& n) {
    Offsets o{};
    const std::size_t S = static_cast<std::size_t>(n.S);
    const std::size_t C = static_cast<std::size_t>(n.in_c);
    const std::size_t HW = static_cast<std::size_t>(n.out_h) * n.out_w;
    const std::size_t cb = static_cast<std::size_t>(n.ch_bottleneck);
    const std::size_t sb = static_cast<std::size_t>(n.sp_bottleneck);
    const std::size_t flat = HW * S;
    const std::size_t f1 = static_cast<std::size_t>(n.fc1_dim);
    const std::size_t f2 = static_cast<std::size_t>(n.fc2_dim);
    const std::size_t od = static_cast<std::size_t>(n.out_dim);

    std::size_t at = 0;
    o.conv_k = at; at += S * 9 * C;
    o.conv_b = at; at += S;
    o.c1w = at; at += cb * S;
    o.c1b = at; at += cb;
    o.c2w = at; at += S * cb;
    o.c2b = at; at += S;
    o.s1w = at; at += sb * HW;
    o.s1b = at; at += sb;
    o.s2w = at; at += HW * sb;
    o.s2b = at; at += HW;
    o.f1w = at; at += f1 * flat;
    o.f1b = at; at += f1;
    o.f2w = at; at += f2 * f1;
    o.f2b = at; at += f2;
    o.ow = at; at += od * f2;
    o.ob = at; at += od;
    o.total = at;
    o.flat = static_cast<int>(flat);
    return o;
}

std::span<const double> view(const std::vector<double>& v, std::size_t off, std::size_t n) {
    return {v.data() + off, n};
}

} // namespace

std::size_t DrvcnnNet::conv_param_count() const {
    return static_cast<std::size_t>(S) * 9 * in_c + static_cast<std::size_t>(S);
}

std::vector<ParamBlock> DrvcnnNet::blocks() const {
    const Offsets o = offsets_of(*this);
    const int HW = out_h * out_w;
    std::vector<ParamBlock> b;
    auto add = [&b](std::string name, std::vector<int> shape, std::size_t off) {
        std::size_t count = 1;
        for (const int d : shape) count *= static_cast<std::size_t>(d);
        b.push_back({std::move(name), std::move(shape), off, count});
    };
    add("conv.kernels", {S, 3, 3, in_c}, o.conv_k);
    add("conv.biases", {S}, o.conv_b);
    add("attn.channel.fc1.w", {ch_bottleneck, S}, o.c1w);
    add("attn.channel.fc1.b", {ch_bottleneck}, o.c1b);
    add("attn.channel.fc2.w", {S, ch_bottleneck}, o.c2w);
    add("attn.channel.fc2.b", {S}, o.c2b);
    add("attn.spatial.fc1.w", {sp_bottleneck, HW}, o.s1w);
    add("attn.spatial.fc1.b", {sp_bottleneck}, o.s1b);
    add("attn.spatial.fc2.w", {HW, sp_bottleneck}, o.s2w);
    add("attn.spatial.fc2.b", {HW}, o.s2b);
    add("fc1.w", {fc1_dim, o.flat}, o.f1w);
    add("fc1.b", {fc1_dim}, o.f1b);
    add("fc2.w", {fc2_dim, fc1_dim}, o.f2w);
    add("fc2.b", {fc2_dim}, o.f2b);
    add("out.w", {out_dim, fc2_dim}, o.ow);
    add("out.b", {out_dim}, o.ob);
    return b;
}

DrvcnnNet make_drvcnn_shape(int K, int M, int rows) {
    if (K < 1) throw ConfigError("K must be >= 1");
    if (M < 0) throw ConfigError("M must be >= 0");
    if (M + 1 < 3 || rows < 3)
        throw ConfigError("valid 3x3 convolution impossible for this (rows, M)");

    DrvcnnNet n;
    n.K = K;
    n.M = M;
    n.rows = rows;
    n.in_h = rows;
    n.in_w = M + 1;
    n.in_c = K;
    n.S = 3 * K;
    n.out_h = rows - 2;
    n.out_w = M + 1 - 2;
    n.ch_bottleneck = std::max(1, n.S / 3);
    n.sp_bottleneck = std::max(1, (n.out_h * n.out_w) / 3);
    n.fc1_dim = 5 * K;
    n.fc2_dim = 3 * K;
    n.out_dim = 2 * K;
    n.params.assign(offsets_of(n).total, 0.0);
    return n;
}

void init_glorot(std::vector<double>& params, const std::vector<ParamBlock>& blocks,
                 std::uint64_t seed) {
    Rng rng(seed);
    for (const ParamBlock& b : blocks) {
        if (b.shape.size() == 1) continue; // biases stay zero
        double fan_in, fan_out;
        if (b.shape.size() == 4) {
            fan_in = 9.0 * b.shape[3];
            fan_out = 9.0 * b.shape[0];
        } else {
            fan_out = b.shape[0];
            fan_in = b.shape[1];
        }
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (std::size_t i = 0; i < b.count; ++i)
            params[b.offset + i] = rng.uniform_symmetric(limit);
    }
}

namespace {

struct DrvcnnCache {
    Tensor3 r, ra;
    std::vector<double> pooled_ch, hidden_ch, wa;
    std::vector<double> pooled_sp, hidden_sp, ws;
    std::vector<double> flat; // channel-major flatten of the weighted map
    std::vector<double> h1, h2, yhat;
};

void drvcnn_forward_cached(const DrvcnnNet& net, const Tensor3& x, const Offsets& o,
                           DrvcnnCache& c) {
    if (x.h != net.in_h || x.w != net.in_w || x.s != net.in_c)
        throw ShapeError("input tensor does not match the network shape");
    const std::vector<double>& p = net.params;
    const std::size_t S = static_cast<std::size_t>(net.S);
    const std::size_t C = static_cast<std::size_t>(net.in_c);
    const int HW = net.out_h * net.out_w;

    c.r = conv2d_valid_forward(x, view(p, o.conv_k, S * 9 * C), view(p, o.conv_b, S), net.S);

    c.pooled_ch = avg_pool_spatial(c.r);
    c.hidden_ch.assign(static_cast<std::size_t>(net.ch_bottleneck), 0.0);
    dense_forward(view(p, o.c1w, static_cast<std::size_t>(net.ch_bottleneck) * S),
                  view(p, o.c1b, static_cast<std::size_t>(net.ch_bottleneck)), net.ch_bottleneck,
                  net.S, c.pooled_ch, Activation::kTanh, c.hidden_ch);
    c.wa.assign(S, 0.0);
    dense_forward(view(p, o.c2w, S * static_cast<std::size_t>(net.ch_bottleneck)),
                  view(p, o.c2b, S), net.S, net.ch_bottleneck, c.hidden_ch, Activation::kSoftmax,
                  c.wa);
    c.ra = c.r;
    for (int y = 0; y < c.r.h; ++y)
        for (int xx = 0; xx < c.r.w; ++xx)
            for (int s = 0; s < c.r.s; ++s)
                c.ra.at(y, xx, s) *= c.wa[static_cast<std::size_t>(s)];

    c.pooled_sp = avg_pool_channel(c.ra);
    c.hidden_sp.assign(static_cast<std::size_t>(net.sp_bottleneck), 0.0);
    dense_forward(view(p, o.s1w, static_cast<std::size_t>(net.sp_bottleneck) * HW),
                  view(p, o.s1b, static_cast<std::size_t>(net.sp_bottleneck)), net.sp_bottleneck,
                  HW, c.pooled_sp, Activation::kTanh, c.hidden_sp);
    c.ws.assign(static_cast<std::size_t>(HW), 0.0);
    dense_forward(view(p, o.s2w, static_cast<std::size_t>(HW) * net.sp_bottleneck),
                  view(p, o.s2b, static_cast<std::size_t>(HW)), HW, net.sp_bottleneck, c.hidden_sp,
                  Activation::kSoftmax, c.ws);

    // Weighted map flattened channel-major: flat[s*HW + hw].
    c.flat.assign(S * static_cast<std::size_t>(HW), 0.0);
    for (int y = 0; y < c.ra.h; ++y) {
        for (int xx = 0; xx < c.ra.w; ++xx) {
            const int hw = y * c.ra.w + xx;
            const double wloc = c.ws[static_cast<std::size_t>(hw)];
            for (int s = 0; s < c.ra.s; ++s) {
                c.flat[static_cast<std::size_t>(s) * HW + static_cast<std::size_t>(hw)] =
                    c.ra.at(y, xx, s) * wloc;
            }
        }
    }

    c.h1.assign(static_cast<std::size_t>(net.fc1_dim), 0.0);
    dense_forward(view(p, o.f1w, static_cast<std::size_t>(net.fc1_dim) * c.flat.size()),
                  view(p, o.f1b, static_cast<std::size_t>(net.fc1_dim)), net.fc1_dim,
                  static_cast<int>(c.flat.size()), c.flat, Activation::kTanh, c.h1);
    c.h2.assign(static_cast<std::size_t>(net.fc2_dim), 0.0);
    dense_forward(view(p, o.f2w, static_cast<std::size_t>(net.fc2_dim) * net.fc1_dim),
                  view(p, o.f2b, static_cast<std::size_t>(net.fc2_dim)), net.fc2_dim, net.fc1_dim,
                  c.h1, Activation::kTanh, c.h2);
    c.yhat.assign(static_cast<std::size_t>(net.out_dim), 0.0);
    dense_forward(view(p, o.ow, static_cast<std::size_t>(net.out_dim) * net.fc2_dim),
                  view(p, o.ob, static_cast<std::size_t>(net.out_dim)), net.out_dim, net.fc2_dim,
                  c.h2, Activation::kLinear, c.yhat);
}

/// Accumulates dW, db and optionally dx for a dense layer given dz at the
/// pre-activation output.
void dense_backward_accum(const double* w, int out_dim, int in_dim, const double* x,
                          const double* dz, double* dw, double* db, double* dx) {
    for (int oI = 0; oI < out_dim; ++oI) {
        const std::size_t row = static_cast<std::size_t>(oI) * in_dim;
        kern().axpy(dz[oI], x, dw + row, static_cast<std::size_t>(in_dim));
        db[oI] += dz[oI];
    }
    if (dx) {
        for (int oI = 0; oI < out_dim; ++oI) {
            const std::size_t row = static_cast<std::size_t>(oI) * in_dim;
            kern().axpy(dz[oI], w + row, dx, static_cast<std::size_t>(in_dim));
        }
    }
}

/// dz = dy through softmax: dz_i = y_i (dy_i - sum_j dy_j y_j).
void softmax_backward(const std::vector<double>& y, const std::vector<double>& dy,
                      std::vector<double>& dz) {
    const double mix = kern().dot(dy.data(), y.data(), y.size());
    dz.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dz[i] = y[i] * (dy[i] - mix);
}

void drvcnn_backward_accum(const DrvcnnNet& net, const Tensor3& x, const DrvcnnCache& c,
                           const Offsets& o, const std::vector<double>& dy, bool frozen,
                           std::vector<double>& grad) {
    const std::vector<double>& p = net.params;
    const int HW = net.out_h * net.out_w;
    const std::size_t S = static_cast<std::size_t>(net.S);

    // Output layer (linear).
    std::vector<double> dh2(static_cast<std::size_t>(net.fc2_dim), 0.0);
    dense_backward_accum(p.data() + o.ow, net.out_dim, net.fc2_dim, c.h2.data(), dy.data(),
                         grad.data() + o.ow, grad.data() + o.ob, dh2.data());

    // fc2 (tanh).
    std::vector<double> dz2(dh2.size());
    for (std::size_t i = 0; i < dh2.size(); ++i) dz2[i] = dh2[i] * (1.0 - c.h2[i] * c.h2[i]);
    std::vector<double> dh1(static_cast<std::size_t>(net.fc1_dim), 0.0);
    dense_backward_accum(p.data() + o.f2w, net.fc2_dim, net.fc1_dim, c.h1.data(), dz2.data(),
                         grad.data() + o.f2w, grad.data() + o.f2b, dh1.data());

    // fc1 (tanh).
    std::vector<double> dz1(dh1.size());
    for (std::size_t i = 0; i < dh1.size(); ++i) dz1[i] = dh1[i] * (1.0 - c.h1[i] * c.h1[i]);
    std::vector<double> dflat(c.flat.size(), 0.0);
    dense_backward_accum(p.data() + o.f1w, net.fc1_dim, static_cast<int>(c.flat.size()),
                         c.flat.data(), dz1.data(), grad.data() + o.f1w, grad.data() + o.f1b,
                         dflat.data());

    // Spatial attention. dflat is the gradient at the weighted map R_s.
    std::vector<double> dws(static_cast<std::size_t>(HW), 0.0);
    Tensor3 dra(net.out_h, net.out_w, net.S);
    for (int y = 0; y < net.out_h; ++y) {
        for (int xx = 0; xx < net.out_w; ++xx) {
            const int hw = y * net.out_w + xx;
            const double wloc = c.ws[static_cast<std::size_t>(hw)];
            for (int s = 0; s < net.S; ++s) {
                const double g =
                    dflat[static_cast<std::size_t>(s) * HW + static_cast<std::size_t>(hw)];
                dws[static_cast<std::size_t>(hw)] += g * c.ra.at(y, xx, s);
                dra.at(y, xx, s) = g * wloc;
            }
        }
    }
    std::vector<double> dlogits_sp;
    softmax_backward(c.ws, dws, dlogits_sp);
    std::vector<double> dhid_sp(static_cast<std::size_t>(net.sp_bottleneck), 0.0);
    dense_backward_accum(p.data() + o.s2w, HW, net.sp_bottleneck, c.hidden_sp.data(),
                         dlogits_sp.data(), grad.data() + o.s2w, grad.data() + o.s2b,
                         dhid_sp.data());
    std::vector<double> dz_sp(dhid_sp.size());
    for (std::size_t i = 0; i < dhid_sp.size(); ++i)
        dz_sp[i] = dhid_sp[i] * (1.0 - c.hidden_sp[i] * c.hidden_sp[i]);
    std::vector<double> dpool_sp(static_cast<std::size_t>(HW), 0.0);
    dense_backward_accum(p.data() + o.s1w, net.sp_bottleneck, HW, c.pooled_sp.data(),
                         dz_sp.data(), grad.data() + o.s1w, grad.data() + o.s1b, dpool_sp.data());
    const double inv_s = 1.0 / static_cast<double>(net.S);
    for (int y = 0; y < net.out_h; ++y)
        for (int xx = 0; xx < net.out_w; ++xx)
            for (int s = 0; s < net.S; ++s)
                dra.at(y, xx, s) += dpool_sp[static_cast<std::size_t>(y * net.out_w + xx)] * inv_s;

    // Channel attention. dra is the gradient at R_a.
    std::vector<double> dwa(S, 0.0);
    Tensor3 dr(net.out_h, net.out_w, net.S);
    for (int y = 0; y < net.out_h; ++y) {
        for (int xx = 0; xx < net.out_w; ++xx) {
            for (int s = 0; s < net.S; ++s) {
                const double g = dra.at(y, xx, s);
                dwa[static_cast<std::size_t>(s)] += g * c.r.at(y, xx, s);
                dr.at(y, xx, s) = g * c.wa[static_cast<std::size_t>(s)];
            }
        }
    }
    std::vector<double> dlogits_ch;
    softmax_backward(c.wa, dwa, dlogits_ch);
    std::vector<double> dhid_ch(static_cast<std::size_t>(net.ch_bottleneck), 0.0);
    dense_backward_accum(p.data() + o.c2w, net.S, net.ch_bottleneck, c.hidden_ch.data(),
                         dlogits_ch.data(), grad.data() + o.c2w, grad.data() + o.c2b,
                         dhid_ch.data());
    std::vector<double> dz_ch(dhid_ch.size());
    for (std::size_t i = 0; i < dhid_ch.size(); ++i)
        dz_ch[i] = dhid_ch[i] * (1.0 - c.hidden_ch[i] * c.hidden_ch[i]);
    std::vector<double> dpool_ch(S, 0.0);
    dense_backward_accum(p.data() + o.c1w, net.ch_bottleneck, net.S, c.pooled_ch.data(),
                         dz_ch.data(), grad.data() + o.c1w, grad.data() + o.c1b, dpool_ch.data());
    const double inv_hw = 1.0 / static_cast<double>(HW);
    for (int y = 0; y < net.out_h; ++y)
        for (int xx = 0; xx < net.out_w; ++xx)
            for (int s = 0; s < net.S; ++s)
                dr.at(y, xx, s) += dpool_ch[static_cast<std::size_t>(s)] * inv_hw;

    if (frozen) return;

    // Convolution. dr is the gradient at R = tanh(z).
    double* dkern = grad.data() + o.conv_k;
    double* dbias = grad.data() + o.conv_b;
    for (int y = 0; y < net.out_h; ++y) {
        for (int xx = 0; xx < net.out_w; ++xx) {
            for (int s = 0; s < net.S; ++s) {
                const double rv = c.r.at(y, xx, s);
                const double g = dr.at(y, xx, s) * (1.0 - rv * rv);
                dbias[s] += g;
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        double* kv = dkern + (static_cast<std::size_t>(s) * 9 +
                                              static_cast<std::size_t>(ky * 3 + kx)) *
                                                 net.in_c;
                        for (int cc = 0; cc < net.in_c; ++cc)
                            kv[cc] += g * x.at(y + ky, xx + kx, cc);
                    }
                }
            }
        }
    }
}

} // namespace

std::vector<double> drvcnn_forward(const DrvcnnNet& net, const Tensor3& x) {
    DrvcnnCache c;
    drvcnn_forward_cached(net, x, offsets_of(net), c);
    return std::move(c.yhat);
}

double drvcnn_batch_loss(const DrvcnnNet& net, std::span<const Tensor3> xs,
                         std::span<const std::vector<double>> ys) {
    if (xs.empty() || xs.size() != ys.size()) throw ArgumentError("empty or mismatched batch");
    const Offsets o = offsets_of(net);
    DrvcnnCache c;
    double loss = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
        drvcnn_forward_cached(net, xs[b], o, c);
        if (ys[b].size() != c.yhat.size()) throw ShapeError("target width mismatch");
        for (std::size_t i = 0; i < c.yhat.size(); ++i) {
            const double d = c.yhat[i] - ys[b][i];
            loss += d * d;
        }
    }
    return loss / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));
}

double drvcnn_batch_loss_grad(const DrvcnnNet& net, std::span<const Tensor3> xs,
                              std::span<const std::vector<double>> ys, std::vector<double>& grad,
                              bool frozen_conv) {
    if (xs.empty() || xs.size() != ys.size()) throw ArgumentError("empty or mismatched batch");
    const Offsets o = offsets_of(net);
    const bool frozen = frozen_conv || net.frozen_conv;
    grad.assign(net.params.size(), 0.0);

    const double scale =
        2.0 / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));
    DrvcnnCache c;
    std::vector<double> dy(static_cast<std::size_t>(net.out_dim));
    double loss = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
        drvcnn_forward_cached(net, xs[b], o, c);
        if (ys[b].size() != c.yhat.size()) throw ShapeError("target width mismatch");
        for (std::size_t i = 0; i < c.yhat.size(); ++i) {
            const double d = c.yhat[i] - ys[b][i];
            loss += d * d;
            dy[i] = scale * d;
        }
        drvcnn_backward_accum(net, xs[b], c, o, dy, frozen, grad);
    }
    return loss / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));
}

// ---------------------------------------------------------------------------
// Fully-connected baselines

std::vector<ParamBlock> MlpNet::blocks() const {
    std::vector<ParamBlock> b;
    std::size_t at = 0;
    int in = in_dim;
    for (std::size_t l = 0; l <= hidden.size(); ++l) {
        const int out = l < hidden.size() ? hidden[l] : out_dim;
        const std::string base = "fc" + std::to_string(l + 1);
        b.push_back({base + ".w", {out, in}, at, static_cast<std::size_t>(out) * in});
        at += static_cast<std::size_t>(out) * in;
        b.push_back({base + ".b", {out}, at, static_cast<std::size_t>(out)});
        at += static_cast<std::size_t>(out);
        in = out;
    }
    return b;
}

MlpNet make_mlp_shape(int in_dim, const std::vector<int>& hidden, int out_dim) {
    if (in_dim < 1 || out_dim < 1) throw ConfigError("MLP dims must be positive");
    for (const int h : hidden) {
        if (h < 1) throw ConfigError("hidden widths must be positive");
    }
    MlpNet n;
    n.in_dim = in_dim;
    n.out_dim = out_dim;
    n.hidden = hidden;
    std::size_t total = 0;
    for (const ParamBlock& b : n.blocks()) total += b.count;
    n.params.assign(total, 0.0);
    return n;
}

namespace {

struct MlpCache {
    // acts[0] is the input, acts[l+1] the output of layer l.
    std::vector<std::vector<double>> acts;
};

void mlp_forward_cached(const MlpNet& net, std::span<const double> x, MlpCache& c) {
    if (x.size() != static_cast<std::size_t>(net.in_dim))
        throw ShapeError("MLP input width mismatch");
    const std::size_t layers = net.hidden.size() + 1;
    c.acts.resize(layers + 1);
    c.acts[0].assign(x.begin(), x.end());
    std::size_t at = 0;
    int in = net.in_dim;
    for (std::size_t l = 0; l < layers; ++l) {
        const int out = l < net.hidden.size() ? net.hidden[l] : net.out_dim;
        const Activation act = l < net.hidden.size() ? Activation::kTanh : Activation::kLinear;
        c.acts[l + 1].assign(static_cast<std::size_t>(out), 0.0);
        dense_forward(view(net.params, at, static_cast<std::size_t>(out) * in),
                      view(net.params, at + static_cast<std::size_t>(out) * in,
                           static_cast<std::size_t>(out)),
                      out, in, c.acts[l], act, c.acts[l + 1]);
        at += static_cast<std::size_t>(out) * in + static_cast<std::size_t>(out);
        in = out;
    }
}

} // namespace

std::vector<double> mlp_forward(const MlpNet& net, std::span<const double> x) {
    MlpCache c;
    mlp_forward_cached(net, x, c);
    return std::move(c.acts.back());
}

double mlp_batch_loss(const MlpNet& net, std::span<const std::vector<double>> xs,
                      std::span<const std::vector<double>> ys) {
    if (xs.empty() || xs.size() != ys.size()) throw ArgumentError("empty or mismatched batch");
    MlpCache c;
    double loss = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
        mlp_forward_cached(net, xs[b], c);
        const std::vector<double>& yhat = c.acts.back();
        if (ys[b].size() != yhat.size()) throw ShapeError("target width mismatch");
        for (std::size_t i = 0; i < yhat.size(); ++i) {
            const double d = yhat[i] - ys[b][i];
            loss += d * d;
        }
    }
    return loss / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));
}

double mlp_batch_loss_grad(const MlpNet& net, std::span<const std::vector<double>> xs,
                           std::span<const std::vector<double>> ys, std::vector<double>& grad) {
    if (xs.empty() || xs.size() != ys.size()) throw ArgumentError("empty or mismatched batch");
    grad.assign(net.params.size(), 0.0);
    const std::vector<ParamBlock> blocks = net.blocks();
    const std::size_t layers = net.hidden.size() + 1;
    const double scale =
        2.0 / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));

    MlpCache c;
    double loss = 0.0;
    for (std::size_t b = 0; b < xs.size(); ++b) {
        mlp_forward_cached(net, xs[b], c);
        const std::vector<double>& yhat = c.acts.back();
        std::vector<double> delta(yhat.size());
        for (std::size_t i = 0; i < yhat.size(); ++i) {
            const double d = yhat[i] - ys[b][i];
            loss += d * d;
            delta[i] = scale * d; // linear output layer
        }
        for (std::size_t l = layers; l-- > 0;) {
            const ParamBlock& wb = blocks[2 * l];
            const int out = wb.shape[0];
            const int in = wb.shape[1];
            std::vector<double> dx(static_cast<std::size_t>(in), 0.0);
            dense_backward_accum(net.params.data() + wb.offset, out, in, c.acts[l].data(),
                                 delta.data(), grad.data() + wb.offset,
                                 grad.data() + blocks[2 * l + 1].offset,
                                 l > 0 ? dx.data() : nullptr);
            if (l > 0) {
                delta.resize(dx.size());
                for (std::size_t i = 0; i < dx.size(); ++i)
                    delta[i] = dx[i] * (1.0 - c.acts[l][i] * c.acts[l][i]);
            }
        }
    }
    return loss / (static_cast<double>(xs.size()) * static_cast<double>(net.out_dim));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw ShapeError("adam state size mismatch");
    state.t += 1;
    const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    kern().adam_update(params.data(), state.m.data(), state.v.data(), grads.data(), params.size(),
                       state.lr, state.beta1, state.beta2, state.eps, bias1, bias2);
}

} // namespace pamk::nn

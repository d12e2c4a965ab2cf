#include "pamk/features.hpp"

#include "pamk/errors.hpp"

namespace pamk::features {

void FeatureConfig::validate() const {
    if (M < 0) throw ConfigError("memory depth M must be >= 0");
    if (K < 1) throw ConfigError("carrier count K must be >= 1");
    if (envelope_exponents.empty()) throw ConfigError("need at least one envelope exponent");
    for (const int p : envelope_exponents) {
        if (p < 1) throw ConfigError("envelope exponents must be positive");
    }
}

std::vector<double> build_carrier_matrix(const ComplexSeries& x, long n,
                                         const FeatureConfig& cfg) {
    cfg.validate();
    if (n < 0 || static_cast<std::size_t>(n) >= x.size())
        throw ArgumentError("time index out of range");

    const int rows = cfg.rows();
    const int lags = cfg.lags();
    std::vector<double> mat(static_cast<std::size_t>(rows * lags), 0.0);

    for (int c = 0; c < lags; ++c) {
        const long idx = n - c;
        if (idx < 0) continue; // zero pre-history
        const cplx v = x.samples[static_cast<std::size_t>(idx)];
        mat[static_cast<std::size_t>(0 * lags + c)] = v.real();
        mat[static_cast<std::size_t>(1 * lags + c)] = v.imag();
        const double env = std::abs(v);
        for (std::size_t e = 0; e < cfg.envelope_exponents.size(); ++e) {
            double acc = 1.0;
            for (int p = 0; p < cfg.envelope_exponents[e]; ++p) acc *= env;
            mat[(2 + e) * static_cast<std::size_t>(lags) + static_cast<std::size_t>(c)] = acc;
        }
    }
    return mat;
}

FeatureTensor build_input_tensor(const std::vector<ComplexSeries>& carriers, long n,
                                 const FeatureConfig& cfg) {
    if (carriers.size() != static_cast<std::size_t>(cfg.K))
        throw ArgumentError("carrier count does not match feature config");
    const std::size_t len = carriers[0].size();
    for (const ComplexSeries& c : carriers) {
        if (c.size() != len) throw ArgumentError("carriers must share length");
    }

    FeatureTensor t;
    t.rows = cfg.rows();
    t.lags = cfg.lags();
    t.K = cfg.K;
    t.time_index = n;
    t.values.assign(static_cast<std::size_t>(t.rows * t.lags * t.K), 0.0);

    for (int k = 0; k < cfg.K; ++k) {
        const std::vector<double> mat =
            build_carrier_matrix(carriers[static_cast<std::size_t>(k)], n, cfg);
        for (int r = 0; r < t.rows; ++r) {
            for (int c = 0; c < t.lags; ++c) {
                t.at(r, c, k) = mat[static_cast<std::size_t>(r * t.lags + c)];
            }
        }
    }
    return t;
}

std::vector<double> build_mlp_features(const std::vector<ComplexSeries>& carriers, long n,
                                       const FeatureConfig& cfg, MlpVariant variant) {
    if (carriers.size() != static_cast<std::size_t>(cfg.K))
        throw ArgumentError("carrier count does not match feature config");

    const int rows = variant == MlpVariant::kArvtdnn ? cfg.rows() : 2;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rows * cfg.lags() * cfg.K));
    for (int k = 0; k < cfg.K; ++k) {
        const std::vector<double> mat =
            build_carrier_matrix(carriers[static_cast<std::size_t>(k)], n, cfg);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cfg.lags(); ++c) {
                out.push_back(mat[static_cast<std::size_t>(r * cfg.lags() + c)]);
            }
        }
    }
    return out;
}

} // namespace pamk::features

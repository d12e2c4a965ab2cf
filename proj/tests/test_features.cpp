#include <doctest.h>

#include <cmath>

#include "pamk/errors.hpp"
#include "pamk/features.hpp"
#include "pamk/rng.hpp"

using namespace pamk;
using namespace pamk::features;

namespace {

ComplexSeries random_series(std::uint64_t seed, std::size_t n) {
    Rng rng(seed);
    std::vector<cplx> v(n);
    for (auto& x : v) x = {rng.uniform_symmetric(0.7), rng.uniform_symmetric(0.7)};
    return ComplexSeries(std::move(v), 1e6);
}

} // namespace

TEST_CASE("constant unit signal fills the matrix with ones and zeros") {
    ComplexSeries x(std::vector<cplx>(8, cplx(1.0, 0.0)), 1e6);
    FeatureConfig cfg;
    cfg.M = 1;
    const std::vector<double> mat = build_carrier_matrix(x, 5, cfg);
    // rows x lags = 5 x 2
    const std::vector<double> expect{1, 1, 0, 0, 1, 1, 1, 1, 1, 1};
    REQUIRE(mat.size() == expect.size());
    for (std::size_t i = 0; i < mat.size(); ++i) CHECK(mat[i] == doctest::Approx(expect[i]));
}

TEST_CASE("memoryless column for a 3-4-5 sample") {
    ComplexSeries x(std::vector<cplx>{cplx(0.6, 0.8)}, 1e6);
    FeatureConfig cfg;
    cfg.M = 0;
    const std::vector<double> mat = build_carrier_matrix(x, 0, cfg);
    REQUIRE(mat.size() == 5);
    CHECK(mat[0] == doctest::Approx(0.6));
    CHECK(mat[1] == doctest::Approx(0.8));
    CHECK(mat[2] == doctest::Approx(1.0));
    CHECK(mat[3] == doctest::Approx(1.0));
    CHECK(mat[4] == doctest::Approx(1.0));
}

TEST_CASE("lag columns carry the envelope powers of the lagged samples") {
    ComplexSeries x(std::vector<cplx>{cplx(0.5, 0.0), cplx(0.0, 0.5)}, 1e6);
    FeatureConfig cfg;
    cfg.M = 1;
    const std::vector<double> mat = build_carrier_matrix(x, 1, cfg);
    const int lags = 2;
    // column 0 = current sample 0.5j, column 1 = previous sample 0.5
    CHECK(mat[0 * lags + 0] == doctest::Approx(0.0));
    CHECK(mat[1 * lags + 0] == doctest::Approx(0.5));
    CHECK(mat[2 * lags + 0] == doctest::Approx(0.5));
    CHECK(mat[3 * lags + 0] == doctest::Approx(0.25));
    CHECK(mat[4 * lags + 0] == doctest::Approx(0.125));
    CHECK(mat[0 * lags + 1] == doctest::Approx(0.5));
    CHECK(mat[1 * lags + 1] == doctest::Approx(0.0));
    CHECK(mat[2 * lags + 1] == doctest::Approx(0.5));
    CHECK(mat[3 * lags + 1] == doctest::Approx(0.25));
    CHECK(mat[4 * lags + 1] == doctest::Approx(0.125));
}

TEST_CASE("out-of-range time index is rejected") {
    ComplexSeries x(std::vector<cplx>(4, cplx(0.1, 0.0)), 1e6);
    FeatureConfig cfg;
    CHECK_THROWS_AS(build_carrier_matrix(x, 4, cfg), ArgumentError);
    CHECK_THROWS_AS(build_carrier_matrix(x, -1, cfg), ArgumentError);
}

TEST_CASE("tensor shapes match the configured (K, M)") {
    SUBCASE("K=1 M=3") {
        FeatureConfig cfg;
        cfg.K = 1;
        cfg.M = 3;
        const FeatureTensor t = build_input_tensor({random_series(1, 32)}, 10, cfg);
        CHECK(t.rows == 5);
        CHECK(t.lags == 4);
        CHECK(t.K == 1);
        CHECK(t.values.size() == 5 * 4 * 1);
    }
    SUBCASE("K=2 M=3") {
        FeatureConfig cfg;
        cfg.K = 2;
        cfg.M = 3;
        const FeatureTensor t =
            build_input_tensor({random_series(1, 32), random_series(2, 32)}, 10, cfg);
        CHECK(t.values.size() == 5 * 4 * 2);
    }
    SUBCASE("K=3 M=2") {
        FeatureConfig cfg;
        cfg.K = 3;
        cfg.M = 2;
        const FeatureTensor t = build_input_tensor(
            {random_series(1, 32), random_series(2, 32), random_series(3, 32)}, 10, cfg);
        CHECK(t.values.size() == 5 * 3 * 3);
    }
}

TEST_CASE("mlp feature lengths match the table dimensions") {
    FeatureConfig cfg;
    cfg.K = 1;
    cfg.M = 3;
    std::vector<ComplexSeries> one{random_series(4, 32)};
    CHECK(build_mlp_features(one, 8, cfg, MlpVariant::kArvtdnn).size() == 20);
    CHECK(build_mlp_features(one, 8, cfg, MlpVariant::kDnn).size() == 8);

    cfg.K = 3;
    cfg.M = 2;
    std::vector<ComplexSeries> three{random_series(5, 32), random_series(6, 32),
                                     random_series(7, 32)};
    CHECK(build_mlp_features(three, 8, cfg, MlpVariant::kDnn).size() == 18);
    CHECK(build_mlp_features(three, 8, cfg, MlpVariant::kArvtdnn).size() == 45);
}

TEST_CASE("envelope rows are consistent with the I/Q rows") {
    FeatureConfig cfg;
    cfg.M = 4;
    const ComplexSeries x = random_series(11, 64);
    for (const long n : {0L, 3L, 40L, 63L}) {
        const std::vector<double> mat = build_carrier_matrix(x, n, cfg);
        const int lags = cfg.lags();
        for (int c = 0; c < lags; ++c) {
            const double i = mat[static_cast<std::size_t>(0 * lags + c)];
            const double q = mat[static_cast<std::size_t>(1 * lags + c)];
            const double env = mat[static_cast<std::size_t>(2 * lags + c)];
            CHECK(std::abs(env - std::sqrt(i * i + q * q)) < 1e-12);
            CHECK(std::abs(mat[static_cast<std::size_t>(3 * lags + c)] - env * env) < 1e-12);
            CHECK(std::abs(mat[static_cast<std::size_t>(4 * lags + c)] - env * env * env) < 1e-12);
        }
    }
}

TEST_CASE("advancing the time index shifts the lag columns") {
    FeatureConfig cfg;
    cfg.M = 5;
    const ComplexSeries x = random_series(13, 64);
    const std::vector<double> at_n = build_carrier_matrix(x, 20, cfg);
    const std::vector<double> at_n1 = build_carrier_matrix(x, 21, cfg);
    const int lags = cfg.lags();
    for (int r = 0; r < cfg.rows(); ++r) {
        for (int c = 0; c + 1 < lags; ++c) {
            CHECK(at_n1[static_cast<std::size_t>(r * lags + c + 1)] ==
                  doctest::Approx(at_n[static_cast<std::size_t>(r * lags + c)]));
        }
    }
}

TEST_CASE("flatten lengths hold for a grid of K and M") {
    for (int K = 1; K <= 4; ++K) {
        for (int M = 0; M <= 4; ++M) {
            FeatureConfig cfg;
            cfg.K = K;
            cfg.M = M;
            std::vector<ComplexSeries> carriers;
            for (int k = 0; k < K; ++k)
                carriers.push_back(random_series(static_cast<std::uint64_t>(17 + k), 16));
            CHECK(build_mlp_features(carriers, 9, cfg, MlpVariant::kArvtdnn).size() ==
                  static_cast<std::size_t>(5 * (M + 1) * K));
            CHECK(build_mlp_features(carriers, 9, cfg, MlpVariant::kDnn).size() ==
                  static_cast<std::size_t>(2 * (M + 1) * K));
        }
    }
}

TEST_CASE("carrier-major flatten order") {
    FeatureConfig cfg;
    cfg.K = 2;
    cfg.M = 1;
    std::vector<ComplexSeries> carriers{random_series(19, 8), random_series(23, 8)};
    const std::vector<double> flat = build_mlp_features(carriers, 3, cfg, MlpVariant::kArvtdnn);
    const std::vector<double> m0 = build_carrier_matrix(carriers[0], 3, cfg);
    const std::vector<double> m1 = build_carrier_matrix(carriers[1], 3, cfg);
    REQUIRE(flat.size() == m0.size() + m1.size());
    for (std::size_t i = 0; i < m0.size(); ++i) CHECK(flat[i] == m0[i]);
    for (std::size_t i = 0; i < m1.size(); ++i) CHECK(flat[m0.size() + i] == m1[i]);
}

#include <doctest.h>

#include <cmath>

#include "pamk/errors.hpp"
#include "pamk/gmp.hpp"
#include "pamk/rng.hpp"
#include "pamk/signals.hpp"

using namespace pamk;
using namespace pamk::models;

namespace {

ComplexSeries proper_random_series(std::uint64_t seed, std::size_t n, double scale = 0.5) {
    Rng rng(seed);
    std::vector<cplx> v(n);
    for (auto& x : v) x = {scale * rng.normal(), scale * rng.normal()};
    return ComplexSeries(std::move(v), 1e6);
}

GmpIndex table_index() {
    GmpIndex idx;
    idx.Ka = 11;
    idx.La = 7;
    idx.Kb = 3;
    idx.Mb = 2;
    idx.Lb = 5;
    return idx;
}

double series_nmse_db(const ComplexSeries& pred, const ComplexSeries& meas) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < meas.size(); ++i) {
        num += std::norm(pred.samples[i] - meas.samples[i]);
        den += std::norm(meas.samples[i]);
    }
    return 10.0 * std::log10(num / den);
}

} // namespace

TEST_CASE("term counts follow the index arrays") {
    CHECK(table_index().num_terms() == 107);
    GmpModel m;
    m.index = table_index();
    CHECK(m.coefficient_count() == 214);

    GmpIndex empty;
    CHECK_THROWS_AS(empty.validate(), ConfigError);
}

TEST_CASE("trivial design matrices") {
    SUBCASE("Ka=1 La=1 is the signal itself") {
        const ComplexSeries x = proper_random_series(3, 50);
        GmpIndex idx;
        idx.Ka = 1;
        idx.La = 1;
        const std::vector<cplx> phi = gmp_design_matrix(x, idx);
        REQUIRE(phi.size() == 50);
        for (std::size_t i = 0; i < 50; ++i) CHECK(phi[i] == x.samples[i]);
    }
    SUBCASE("constant signal with two envelope orders") {
        const cplx c(0.3, -0.4);
        ComplexSeries x(std::vector<cplx>(10, c), 1e6);
        GmpIndex idx;
        idx.Ka = 2;
        idx.La = 1;
        const std::vector<cplx> phi = gmp_design_matrix(x, idx);
        REQUIRE(phi.size() == 20);
        CHECK(std::abs(phi[0] - c) < 1e-15);
        CHECK(std::abs(phi[1] - c * std::abs(c)) < 1e-15);
    }
    SUBCASE("column enumeration matches gmp_basis_term") {
        const ComplexSeries x = proper_random_series(5, 64);
        const GmpIndex idx = table_index();
        const std::vector<cplx> phi = gmp_design_matrix(x, idx);
        Rng rng(7);
        for (int probe = 0; probe < 50; ++probe) {
            const long n = static_cast<long>(rng.uniform_int(64));
            const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(idx.num_terms())));
            CHECK(std::abs(phi[static_cast<std::size_t>(n) * 107 + static_cast<std::size_t>(j)] -
                           gmp_basis_term(x.samples, n, idx, j)) < 1e-15);
        }
    }
}

TEST_CASE("pure gain is fitted exactly") {
    const ComplexSeries x = proper_random_series(9, 400);
    ComplexSeries y = x;
    for (cplx& v : y.samples) v *= 3.0;
    GmpIndex idx;
    idx.Ka = 1;
    idx.La = 1;
    const GmpModel m = gmp_fit(x, y, idx);
    REQUIRE(m.coeffs.size() == 1);
    CHECK(std::abs(m.coeffs[0] - cplx(3.0, 0.0)) < 1e-12);
    CHECK(!m.rank_deficient_fit);
}

TEST_CASE("planted model is recovered to near machine precision") {
    const GmpIndex idx = table_index();
    Rng rng(11);
    GmpModel planted;
    planted.index = idx;
    planted.coeffs.resize(static_cast<std::size_t>(idx.num_terms()));
    // Realistic magnitudes: higher envelope orders get smaller coefficients.
    for (int j = 0; j < idx.num_terms(); ++j) {
        const double mag = std::pow(10.0, -rng.uniform() * 2.0);
        planted.coeffs[static_cast<std::size_t>(j)] =
            std::polar(mag, 2.0 * M_PI * rng.uniform());
    }

    signals::CarrierConfig cc;
    cc.num_subcarriers = 64;
    cc.bandwidth_hz = 20e6;
    cc.oversampling = 3;
    cc.seed = 13;
    ComplexSeries x = signals::generate_ofdm_carrier(cc, 20000);
    // Unit-peak drive like the dataset pipeline produces.
    const double peak = peak_abs(x);
    for (cplx& v : x.samples) v /= peak;

    const ComplexSeries y = gmp_predict(planted, x);
    const GmpModel fitted = gmp_fit(x, y, idx);

    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < planted.coeffs.size(); ++j) {
        num += std::norm(fitted.coeffs[j] - planted.coeffs[j]);
        den += std::norm(planted.coeffs[j]);
    }
    CHECK(std::sqrt(num / den) < 1e-8);

    const ComplexSeries yhat = gmp_predict(fitted, x);
    CHECK(series_nmse_db(yhat, y) < -120.0);
}

TEST_CASE("white-noise residual matches the injected noise level") {
    Rng rng(17);
    const ComplexSeries x = proper_random_series(19, 8000);
    ComplexSeries y = x;
    double sig = 0.0, noise = 0.0;
    for (cplx& v : y.samples) {
        const cplx e(0.01 * rng.normal(), 0.01 * rng.normal());
        sig += std::norm(v);
        noise += std::norm(e);
        v += e;
    }
    GmpIndex idx;
    idx.Ka = 1;
    idx.La = 1;
    const GmpModel m = gmp_fit(x, y, idx);
    const double nsr_db = 10.0 * std::log10(noise / sig);
    const double resid_db =
        10.0 * std::log10(m.fit_residual_mse * 8000.0 / sig);
    CHECK(resid_db == doctest::Approx(nsr_db).epsilon(0.02));
}

TEST_CASE("fit is scale-equivariant in y") {
    const ComplexSeries x = proper_random_series(23, 2000);
    GmpIndex idx;
    idx.Ka = 3;
    idx.La = 2;
    idx.Kb = 1;
    idx.Mb = 1;
    idx.Lb = 2;
    ComplexSeries y = gmp_predict([&] {
        GmpModel m;
        m.index = idx;
        m.coeffs.assign(static_cast<std::size_t>(idx.num_terms()), cplx(0.2, -0.1));
        return m;
    }(), x);
    for (std::size_t i = 0; i < y.size(); ++i) y.samples[i] += x.samples[i] * 0.01;

    const GmpModel base = gmp_fit(x, y, idx);
    ComplexSeries y2 = y;
    for (cplx& v : y2.samples) v *= 2.0; // power of two keeps the scaling exact
    const GmpModel doubled = gmp_fit(x, y2, idx);
    REQUIRE(base.coeffs.size() == doubled.coeffs.size());
    for (std::size_t j = 0; j < base.coeffs.size(); ++j)
        CHECK(std::abs(doubled.coeffs[j] - 2.0 * base.coeffs[j]) <=
              1e-12 * std::abs(base.coeffs[j]));
}

TEST_CASE("constant-modulus input yields a flagged minimum-norm fit") {
    // |x| = 1 makes every aligned envelope order identical.
    Rng rng(29);
    std::vector<cplx> v(600);
    for (auto& s : v) s = std::polar(1.0, 2.0 * M_PI * rng.uniform());
    const ComplexSeries x(std::move(v), 1e6);
    const ComplexSeries y = x;
    GmpIndex idx;
    idx.Ka = 3;
    idx.La = 1;
    const GmpModel m = gmp_fit(x, y, idx);
    CHECK(m.rank_deficient_fit);
    // Minimum-norm solution spreads the unit gain evenly over the copies.
    for (const cplx& c : m.coeffs) CHECK(std::abs(c - cplx(1.0 / 3, 0.0)) < 1e-10);
}

TEST_CASE("prediction basics") {
    const ComplexSeries x = proper_random_series(31, 100);
    SUBCASE("zero coefficients give zero output") {
        GmpModel m;
        m.index = table_index();
        m.coeffs.assign(static_cast<std::size_t>(m.index.num_terms()), cplx(0.0, 0.0));
        for (const cplx& v : gmp_predict(m, x).samples) CHECK(std::abs(v) == 0.0);
    }
    SUBCASE("identity model reproduces the input") {
        GmpModel m;
        m.index.Ka = 1;
        m.index.La = 1;
        m.coeffs = {cplx(1.0, 0.0)};
        const ComplexSeries out = gmp_predict(m, x);
        for (std::size_t i = 0; i < x.size(); ++i) CHECK(out.samples[i] == x.samples[i]);
    }
    SUBCASE("fit-then-predict residual equals the reported residual") {
        const ComplexSeries xx = proper_random_series(37, 3000);
        ComplexSeries yy = xx;
        Rng rng(41);
        for (cplx& v : yy.samples)
            v = v * 0.9 + cplx(0.05 * rng.normal(), 0.05 * rng.normal());
        GmpIndex idx;
        idx.Ka = 2;
        idx.La = 2;
        const GmpModel m = gmp_fit(xx, yy, idx);
        const ComplexSeries pred = gmp_predict(m, xx);
        double resid = 0.0;
        for (std::size_t i = 0; i < yy.size(); ++i) resid += std::norm(pred.samples[i] - yy.samples[i]);
        CHECK(resid / 3000.0 == doctest::Approx(m.fit_residual_mse).epsilon(1e-9));
    }
}

TEST_CASE("fit rejects short records") {
    const ComplexSeries x = proper_random_series(43, 100);
    CHECK_THROWS_AS(gmp_fit(x, x, table_index()), ArgumentError);
}

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "pamk/kernels.hpp"
#include "pamk/rng.hpp"

using namespace pamk;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform_symmetric(1.0);
    return v;
}

std::vector<std::complex<double>> random_cvec(Rng& rng, std::size_t n) {
    std::vector<std::complex<double>> v(n);
    for (auto& x : v) x = {rng.uniform_symmetric(1.0), rng.uniform_symmetric(1.0)};
    return v;
}

} // namespace

TEST_CASE("scalar kernels match naive formulas") {
    Rng rng(7);
    const auto& k = kernels::scalar_backend();
    const std::vector<double> a = random_vec(rng, 131);
    const std::vector<double> b = random_vec(rng, 131);

    double dot = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        ss += a[i] * a[i];
    }
    CHECK(k.dot(a.data(), b.data(), a.size()) == doctest::Approx(dot).epsilon(1e-14));
    CHECK(k.sum_squares(a.data(), a.size()) == doctest::Approx(ss).epsilon(1e-14));

    std::vector<double> y = b;
    k.axpy(0.25, a.data(), y.data(), a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(y[i] == doctest::Approx(b[i] + 0.25 * a[i]).epsilon(1e-15));
}

TEST_CASE("every available backend agrees with the scalar reference") {
    Rng rng(13);
    const auto backends = kernels::available_backends();
    REQUIRE(!backends.empty());
    const auto& ref = kernels::scalar_backend();

    for (const std::size_t n : {std::size_t{1}, std::size_t{3}, std::size_t{8}, std::size_t{17},
                                std::size_t{64}, std::size_t{1001}}) {
        const std::vector<double> a = random_vec(rng, n);
        const std::vector<double> b = random_vec(rng, n);
        const auto ca = random_cvec(rng, n);
        const auto cb = random_cvec(rng, n);

        for (const kernels::Backend* k : backends) {
            INFO("backend ", k->name, " n=", n);
            CHECK(k->dot(a.data(), b.data(), n) ==
                  doctest::Approx(ref.dot(a.data(), b.data(), n)).epsilon(1e-12));
            CHECK(k->sum_squares(a.data(), n) ==
                  doctest::Approx(ref.sum_squares(a.data(), n)).epsilon(1e-12));

            std::vector<double> y1 = b, y2 = b;
            ref.axpy(1.5, a.data(), y1.data(), n);
            k->axpy(1.5, a.data(), y2.data(), n);
            for (std::size_t i = 0; i < n; ++i)
                CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-13));

            const auto d1 = ref.cdot(ca.data(), cb.data(), n);
            const auto d2 = k->cdot(ca.data(), cb.data(), n);
            CHECK(std::abs(d1 - d2) <= 1e-12 * (1.0 + std::abs(d1)));
            const auto e1 = ref.cdot_conj(ca.data(), cb.data(), n);
            const auto e2 = k->cdot_conj(ca.data(), cb.data(), n);
            CHECK(std::abs(e1 - e2) <= 1e-12 * (1.0 + std::abs(e1)));
        }
    }
}

TEST_CASE("adam kernel equivalence across backends") {
    Rng rng(29);
    const std::size_t n = 73;
    const std::vector<double> g = random_vec(rng, n);
    const std::vector<double> p0 = random_vec(rng, n);
    const std::vector<double> m0 = random_vec(rng, n);
    std::vector<double> v0 = random_vec(rng, n);
    for (double& v : v0) v = std::abs(v);

    const auto backends = kernels::available_backends();
    std::vector<std::vector<double>> results;
    for (const kernels::Backend* k : backends) {
        std::vector<double> p = p0, m = m0, v = v0;
        k->adam_update(p.data(), m.data(), v.data(), g.data(), n, 1e-3, 0.9, 0.999, 1e-8, 0.1,
                       0.001);
        results.push_back(p);
    }
    for (std::size_t bi = 1; bi < results.size(); ++bi) {
        for (std::size_t i = 0; i < n; ++i)
            CHECK(results[bi][i] == doctest::Approx(results[0][i]).epsilon(1e-14));
    }
}

TEST_CASE("cdot_conj of a vector with itself is its energy") {
    Rng rng(31);
    const auto a = random_cvec(rng, 57);
    const auto& k = kernels::active_backend();
    const auto e = k.cdot_conj(a.data(), a.data(), a.size());
    double energy = 0.0;
    for (const auto& x : a) energy += std::norm(x);
    CHECK(e.real() == doctest::Approx(energy).epsilon(1e-13));
    CHECK(std::abs(e.imag()) < 1e-12);
}

#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "pamk/errors.hpp"
#include "pamk/fft.hpp"
#include "pamk/rng.hpp"

using namespace pamk;

TEST_CASE("fft of an impulse is flat") {
    std::vector<std::complex<double>> a(16, {0.0, 0.0});
    a[0] = {1.0, 0.0};
    fft_inplace(a, false);
    for (const auto& v : a) {
        CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(v.imag()) < 1e-14);
    }
}

TEST_CASE("fft concentrates a complex sinusoid in one bin") {
    const int n = 64, bin = 5;
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        a[static_cast<std::size_t>(i)] = std::polar(1.0, 2.0 * M_PI * bin * i / n);
    fft_inplace(a, false);
    for (int i = 0; i < n; ++i) {
        if (i == bin) {
            CHECK(std::abs(a[static_cast<std::size_t>(i)]) == doctest::Approx(n).epsilon(1e-12));
        } else {
            CHECK(std::abs(a[static_cast<std::size_t>(i)]) < 1e-9);
        }
    }
}

TEST_CASE("fft round trip and Parseval") {
    Rng rng(3);
    const int n = 256;
    std::vector<std::complex<double>> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = {rng.uniform_symmetric(1.0), rng.uniform_symmetric(1.0)};
    const auto orig = a;

    fft_inplace(a, false);
    double freq_energy = 0.0;
    for (const auto& v : a) freq_energy += std::norm(v);
    double time_energy = 0.0;
    for (const auto& v : orig) time_energy += std::norm(v);
    CHECK(freq_energy / n == doctest::Approx(time_energy).epsilon(1e-12));

    fft_inplace(a, true);
    for (int i = 0; i < n; ++i)
        CHECK(std::abs(a[static_cast<std::size_t>(i)] - orig[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("fft rejects non-power-of-two sizes") {
    std::vector<std::complex<double>> a(12);
    CHECK_THROWS_AS(fft_inplace(a, false), ArgumentError);
}

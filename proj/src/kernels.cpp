#include "pamk/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "pamk/errors.hpp"

namespace pamk::kernels {

namespace {

double dot_ref(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares_ref(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

std::complex<double> cdot_ref(const std::complex<double>* a, const std::complex<double>* b,
                              std::size_t n) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        re += a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
        im += a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
    }
    return {re, im};
}

std::complex<double> cdot_conj_ref(const std::complex<double>* a, const std::complex<double>* b,
                                   std::size_t n) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        re += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
        im += a[i].imag() * b[i].real() - a[i].real() * b[i].imag();
    }
    return {re, im};
}

void adam_update_ref(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                     double beta1, double beta2, double eps, double bias1, double bias2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bias1;
        const double vhat = v[i] / bias2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

const Backend kScalar = {
    "scalar", dot_ref, sum_squares_ref, axpy_ref, cdot_ref, cdot_conj_ref, adam_update_ref,
};

const Backend* pick_active() {
    const char* env = std::getenv("PA_MODELKIT_SIMD");
    const std::string mode = env ? env : "auto";
    if (mode == "scalar") return &kScalar;
    const Backend* wide = avx2_backend();
    if (mode == "avx2") {
        if (!wide) throw ConfigError("PA_MODELKIT_SIMD=avx2 but AVX2 is not available");
        return wide;
    }
    if (mode != "auto" && mode != "") throw ConfigError("unknown PA_MODELKIT_SIMD value: " + mode);
    return wide ? wide : &kScalar;
}

} // namespace

const Backend& scalar_backend() { return kScalar; }

#if !defined(PAMK_HAVE_AVX2_TU)
const Backend* avx2_backend() { return nullptr; }
#endif

const Backend& active_backend() {
    static const Backend* chosen = pick_active();
    return *chosen;
}

std::vector<const Backend*> available_backends() {
    std::vector<const Backend*> out{&kScalar};
    if (const Backend* wide = avx2_backend()) out.push_back(wide);
    return out;
}

} // namespace pamk::kernels

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace pamk::kernels {

/// Table of the data-parallel inner loops used across the toolkit. Every
/// entry has a scalar reference implementation; SIMD variants may reassociate
/// sums but must agree with the reference to near machine precision (enforced
/// by the equivalence tests). The same entry point is always used for a whole
/// run, so results stay bitwise reproducible on a given machine.
struct Backend {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* a, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// sum_i a[i] * b[i]
    std::complex<double> (*cdot)(const std::complex<double>* a, const std::complex<double>* b,
                                 std::size_t n);
    /// sum_i a[i] * conj(b[i])
    std::complex<double> (*cdot_conj)(const std::complex<double>* a, const std::complex<double>* b,
                                      std::size_t n);
    /// Adam moment update plus parameter step, elementwise over n entries.
    /// bias1 = 1 - beta1^t, bias2 = 1 - beta2^t for the current step t.
    void (*adam_update)(double* p, double* m, double* v, const double* g, std::size_t n,
                        double lr, double beta1, double beta2, double eps, double bias1,
                        double bias2);
};

const Backend& scalar_backend();

/// AVX2+FMA table, or nullptr when the build or the running CPU lacks it.
const Backend* avx2_backend();

/// The table used by the library. Picks the widest supported variant unless
/// the environment variable PA_MODELKIT_SIMD ("scalar", "avx2", "auto")
/// overrides the choice.
const Backend& active_backend();

/// All tables usable on this machine (reference first). For equivalence tests.
std::vector<const Backend*> available_backends();

} // namespace pamk::kernels

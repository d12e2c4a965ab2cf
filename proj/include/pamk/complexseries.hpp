#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace pamk {

using cplx = std::complex<double>;

/// Uniformly sampled complex baseband signal.
struct ComplexSeries {
    std::vector<cplx> samples;
    double sample_rate_hz = 0.0;

    ComplexSeries() = default;
    ComplexSeries(std::vector<cplx> s, double fs) : samples(std::move(s)), sample_rate_hz(fs) {}

    std::size_t size() const { return samples.size(); }

    /// Enforces the type invariants: at least one sample, positive rate,
    /// finite values.
    void validate() const;
};

inline double peak_abs(const ComplexSeries& s) {
    double peak = 0.0;
    for (const cplx& x : s.samples) peak = std::max(peak, std::abs(x));
    return peak;
}

inline double mean_power(const ComplexSeries& s) {
    double acc = 0.0;
    for (const cplx& x : s.samples) acc += std::norm(x);
    return s.samples.empty() ? 0.0 : acc / static_cast<double>(s.samples.size());
}

inline double rms(const ComplexSeries& s) { return std::sqrt(mean_power(s)); }

} // namespace pamk

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace pamk {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// In-place iterative radix-2 transform. Size must be a power of two.
/// The inverse transform includes the 1/N factor.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

} // namespace pamk

#pragma once

#include <vector>

#include "pamk/complexseries.hpp"

namespace pamk::models {

/// Basis index arrays for the generalized memory polynomial:
///   y(n) = sum_{k=0}^{Ka-1} sum_{l=0}^{La-1} a_kl x(n-l)|x(n-l)|^k
///        + sum_{k=1}^{Kb} sum_{l=0}^{Lb-1} sum_{m=1}^{Mb} b_klm x(n-l)|x(n-l-m)|^k
///        + sum_{k=1}^{Kc} sum_{l=0}^{Lc-1} sum_{m=1}^{Mc} c_klm x(n-l)|x(n-l+m)|^k
/// Columns are ordered aligned block first, then lagging, then leading, each
/// by k, then l, then m.
struct GmpIndex {
    int Ka = 0, La = 0;         // aligned signal and envelope
    int Kb = 0, Mb = 0, Lb = 0; // signal and lagging envelope
    int Kc = 0, Mc = 0, Lc = 0; // signal and leading envelope

    int num_terms() const { return Ka * La + Kb * Lb * Mb + Kc * Lc * Mc; }
    void validate() const;
};

struct GmpModel {
    GmpIndex index;
    std::vector<cplx> coeffs; // one per basis term, block order as above
    bool rank_deficient_fit = false;
    double fit_residual_mse = 0.0; // mean |residual|^2 on the fitting data

    /// Real scalar count: two per complex coefficient.
    int coefficient_count() const { return 2 * index.num_terms(); }
};

/// Column j of the regression matrix evaluated at time n (zero history
/// outside the series).
cplx gmp_basis_term(const std::vector<cplx>& x, long n, const GmpIndex& idx, int column);

/// Full N x C regression matrix, row-major.
std::vector<cplx> gmp_design_matrix(const ComplexSeries& x, const GmpIndex& idx);

/// Complex least squares via a rank-revealing orthogonal decomposition with
/// column equilibration. Rank-deficient problems get the minimum-norm
/// solution and set rank_deficient_fit.
GmpModel gmp_fit(const ComplexSeries& x, const ComplexSeries& y, const GmpIndex& idx);

ComplexSeries gmp_predict(const GmpModel& model, const ComplexSeries& x);

} // namespace pamk::models

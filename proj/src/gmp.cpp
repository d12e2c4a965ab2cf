#include "pamk/gmp.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "pamk/errors.hpp"

namespace pamk::models {

void GmpIndex::validate() const {
    if (Ka < 0 || La < 0 || Kb < 0 || Mb < 0 || Lb < 0 || Kc < 0 || Mc < 0 || Lc < 0)
        throw ConfigError("GMP index arrays must be nonnegative");
    if (num_terms() == 0) throw ConfigError("empty GMP model: all index arrays are zero");
}

namespace {

cplx sample_at(const std::vector<cplx>& x, long n) {
    if (n < 0 || n >= static_cast<long>(x.size())) return {0.0, 0.0};
    return x[static_cast<std::size_t>(n)];
}

double env_pow(double a, int k) {
    double acc = 1.0;
    for (int i = 0; i < k; ++i) acc *= a;
    return acc;
}

} // namespace

cplx gmp_basis_term(const std::vector<cplx>& x, long n, const GmpIndex& idx, int column) {
    int j = column;
    if (j < idx.Ka * idx.La) {
        const int k = j / idx.La;
        const int l = j % idx.La;
        const cplx v = sample_at(x, n - l);
        return v * env_pow(std::abs(v), k);
    }
    j -= idx.Ka * idx.La;
    if (j < idx.Kb * idx.Lb * idx.Mb) {
        const int k = 1 + j / (idx.Lb * idx.Mb);
        const int l = (j / idx.Mb) % idx.Lb;
        const int m = 1 + j % idx.Mb;
        const cplx v = sample_at(x, n - l);
        return v * env_pow(std::abs(sample_at(x, n - l - m)), k);
    }
    j -= idx.Kb * idx.Lb * idx.Mb;
    const int k = 1 + j / (idx.Lc * idx.Mc);
    const int l = (j / idx.Mc) % idx.Lc;
    const int m = 1 + j % idx.Mc;
    const cplx v = sample_at(x, n - l);
    return v * env_pow(std::abs(sample_at(x, n - l + m)), k);
}

std::vector<cplx> gmp_design_matrix(const ComplexSeries& x, const GmpIndex& idx) {
    x.validate();
    idx.validate();
    const long n = static_cast<long>(x.size());
    const int c = idx.num_terms();
    std::vector<cplx> phi(static_cast<std::size_t>(n) * static_cast<std::size_t>(c));

    for (long row = 0; row < n; ++row) {
        cplx* out = phi.data() + static_cast<std::size_t>(row) * c;
        int col = 0;
        for (int k = 0; k < idx.Ka; ++k) {
            for (int l = 0; l < idx.La; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                out[col++] = v * env_pow(std::abs(v), k);
            }
        }
        for (int k = 1; k <= idx.Kb; ++k) {
            for (int l = 0; l < idx.Lb; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                for (int m = 1; m <= idx.Mb; ++m) {
                    out[col++] = v * env_pow(std::abs(sample_at(x.samples, row - l - m)), k);
                }
            }
        }
        for (int k = 1; k <= idx.Kc; ++k) {
            for (int l = 0; l < idx.Lc; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                for (int m = 1; m <= idx.Mc; ++m) {
                    out[col++] = v * env_pow(std::abs(sample_at(x.samples, row - l + m)), k);
                }
            }
        }
    }
    return phi;
}

GmpModel gmp_fit(const ComplexSeries& x, const ComplexSeries& y, const GmpIndex& idx) {
    x.validate();
    y.validate();
    idx.validate();
    if (x.size() != y.size()) throw ArgumentError("input/output length mismatch");
    const long n = static_cast<long>(x.size());
    const int c = idx.num_terms();
    if (n < 2 * c) throw ArgumentError("need at least 2C samples to fit C coefficients");

    const std::vector<cplx> phi_flat = gmp_design_matrix(x, idx);
    Eigen::MatrixXcd phi(n, c);
    for (long r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) phi(r, j) = phi_flat[static_cast<std::size_t>(r) * c + j];

    // Column equilibration keeps the high envelope orders from dominating the
    // conditioning.
    Eigen::VectorXd col_scale(c);
    for (int j = 0; j < c; ++j) {
        const double nrm = phi.col(j).norm();
        col_scale(j) = nrm > 0.0 ? nrm : 1.0;
        phi.col(j) /= col_scale(j);
    }

    Eigen::VectorXcd rhs(n);
    for (long r = 0; r < n; ++r) rhs(r) = y.samples[static_cast<std::size_t>(r)];

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd> cod(phi);
    const Eigen::VectorXcd scaled = cod.solve(rhs);

    GmpModel model;
    model.index = idx;
    model.rank_deficient_fit = cod.rank() < c;
    model.coeffs.resize(static_cast<std::size_t>(c));
    for (int j = 0; j < c; ++j)
        model.coeffs[static_cast<std::size_t>(j)] = scaled(j) / col_scale(j);

    const Eigen::VectorXcd residual = phi * scaled - rhs;
    model.fit_residual_mse = residual.squaredNorm() / static_cast<double>(n);
    return model;
}

ComplexSeries gmp_predict(const GmpModel& model, const ComplexSeries& x) {
    x.validate();
    model.index.validate();
    if (model.coeffs.size() != static_cast<std::size_t>(model.index.num_terms()))
        throw ConfigError("coefficient count does not match the index arrays");

    const GmpIndex& idx = model.index;
    const long n = static_cast<long>(x.size());
    std::vector<cplx> out(static_cast<std::size_t>(n), cplx(0.0, 0.0));
    for (long row = 0; row < n; ++row) {
        cplx acc(0.0, 0.0);
        int col = 0;
        for (int k = 0; k < idx.Ka; ++k) {
            for (int l = 0; l < idx.La; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                acc += model.coeffs[static_cast<std::size_t>(col++)] * v * env_pow(std::abs(v), k);
            }
        }
        for (int k = 1; k <= idx.Kb; ++k) {
            for (int l = 0; l < idx.Lb; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                for (int m = 1; m <= idx.Mb; ++m) {
                    acc += model.coeffs[static_cast<std::size_t>(col++)] * v *
                           env_pow(std::abs(sample_at(x.samples, row - l - m)), k);
                }
            }
        }
        for (int k = 1; k <= idx.Kc; ++k) {
            for (int l = 0; l < idx.Lc; ++l) {
                const cplx v = sample_at(x.samples, row - l);
                for (int m = 1; m <= idx.Mc; ++m) {
                    acc += model.coeffs[static_cast<std::size_t>(col++)] * v *
                           env_pow(std::abs(sample_at(x.samples, row - l + m)), k);
                }
            }
        }
        out[static_cast<std::size_t>(row)] = acc;
    }
    return ComplexSeries(std::move(out), x.sample_rate_hz);
}

} // namespace pamk::models

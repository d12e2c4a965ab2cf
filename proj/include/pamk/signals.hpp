#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "pamk/complexseries.hpp"

namespace pamk::signals {

/// One OFDM component carrier. The produced series has
/// sample_rate_hz = bandwidth_hz * oversampling by construction.
struct CarrierConfig {
    int num_subcarriers = 600;
    double bandwidth_hz = 20e6;
    int oversampling = 5;
    int qam_order = 64; // 4, 16 or 64
    std::uint64_t seed = 1;
    double rms_backoff_db = 12.0; // RMS target below unit peak

    void validate() const;
};

struct RappNl {
    double smoothness = 2.0; // p
    double sat_level = 1.0;
};

struct SalehNl {
    double alpha_a = 2.0;
    double beta_a = 1.0;
    double alpha_p = 1.0;
    double beta_p = 1.0;
};

struct PolynomialNl {
    std::vector<cplx> odd_coeffs; // orders 1, 3, 5, ... of x*|x|^(2i)
};

struct IqImbalance {
    double gain_mismatch = 0.0;
    double phase_mismatch_rad = 0.0;
};

/// Synthetic device under test: FIR, static nonlinearity, FIR, then optional
/// modulator impairments.
struct PaOracleConfig {
    std::vector<cplx> pre_fir{cplx(1.0, 0.0)};
    std::variant<RappNl, SalehNl, PolynomialNl> static_nl = RappNl{};
    std::vector<cplx> post_fir{cplx(1.0, 0.0)};
    std::optional<IqImbalance> iq_imbalance;
    std::optional<cplx> dc_offset;

    void validate() const;
};

/// Aligned per-carrier input/output records, normalized so each input carrier
/// peaks at |x| = 1. scale_factors undo the normalization.
struct Dataset {
    std::vector<ComplexSeries> carriers_in;
    std::vector<ComplexSeries> carriers_out;
    int K = 0;
    std::size_t num_samples = 0;
    std::vector<double> scale_factors;
    double sample_rate_hz = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> offsets_hz;

    void validate() const;
};

/// Random-QAM OFDM baseband generator. Deterministic for a fixed config.
ComplexSeries generate_ofdm_carrier(const CarrierConfig& cfg, std::size_t num_samples);

/// Frequency-shifts each carrier by its offset and sums:
/// out(n) = sum_k x_k(n) * exp(j 2 pi offset_k n / fs).
/// When bandwidths are given, the Nyquist bound |offset| + bw/2 < fs/2 is
/// checked per carrier.
ComplexSeries combine_carriers(const std::vector<ComplexSeries>& carriers,
                               const std::vector<double>& offsets_hz, double fs_hz,
                               const std::vector<double>& bandwidths_hz = {});

struct DemuxOptions {
    double guard_factor = 1.1;    // low-pass cutoff = bw/2 * guard_factor
    int fir_taps = 0;             // 0 = auto Kaiser design
    double stop_atten_db = 110.0; // Kaiser design target
};

struct DemuxResult {
    std::vector<ComplexSeries> carriers;
    std::vector<std::string> warnings;
    int fir_taps_used = 0;
};

/// Shifts the composite down by each offset and low-pass filters with a
/// group-delay-compensated linear-phase FIR. Overlapping carrier spectra are
/// reported as a warning, not an error.
DemuxResult demux_carriers(const ComplexSeries& composite, const std::vector<double>& offsets_hz,
                           const std::vector<double>& bandwidths_hz,
                           const DemuxOptions& opts = {});

/// Runs the Wiener-Hammerstein oracle over the input. Causal; output length
/// equals input length.
ComplexSeries reference_pa(const ComplexSeries& input, const PaOracleConfig& cfg);

/// Static-nonlinearity response for a single sample (exposed for tests).
cplx apply_static_nl(const std::variant<RappNl, SalehNl, PolynomialNl>& nl, cplx v);

struct SynthesisOptions {
    DemuxOptions demux;
    int max_align_lag = 128;
    double align_threshold = 0.5; // minimum normalized correlation peak
    std::size_t edge_margin = 0;  // 0 = auto from filter lengths
};

/// Full desk-scale measurement stand-in: generate K carriers, combine, run
/// the oracle, demux the output, align by integer-lag cross-correlation and
/// normalize each carrier pair to unit input peak.
Dataset synthesize_dataset(const std::vector<CarrierConfig>& carrier_cfgs,
                           const std::vector<double>& offsets_hz, const PaOracleConfig& pa_cfg,
                           std::size_t num_samples, const SynthesisOptions& opts = {});

/// Contiguous prefix/suffix split; train gets floor(N * train / (train+test)).
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_parts = 3,
                                          int test_parts = 2);

} // namespace pamk::signals

#include "pamk/signals.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pamk/errors.hpp"
#include "pamk/kernels.hpp"
#include "pamk/rng.hpp"

namespace pamk {

namespace {

bool all_finite(const std::vector<cplx>& v) {
    for (const cplx& x : v) {
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
    }
    return true;
}

} // namespace

void ComplexSeries::validate() const {
    if (samples.empty()) throw ArgumentError("series must hold at least one sample");
    if (!(sample_rate_hz > 0.0)) throw ArgumentError("sample rate must be positive");
    if (!all_finite(samples)) throw ArgumentError("series contains non-finite samples");
}

} // namespace pamk

namespace pamk::signals {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Square-QAM constellation with unit average symbol energy.
std::vector<cplx> qam_constellation(int order) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
    std::vector<cplx> points;
    points.reserve(static_cast<std::size_t>(order));
    double energy = 0.0;
    for (int i = 0; i < side; ++i) {
        for (int q = 0; q < side; ++q) {
            const double re = static_cast<double>(2 * i - side + 1);
            const double im = static_cast<double>(2 * q - side + 1);
            points.emplace_back(re, im);
            energy += re * re + im * im;
        }
    }
    const double scale = 1.0 / std::sqrt(energy / static_cast<double>(order));
    for (cplx& p : points) p *= scale;
    return points;
}

} // namespace

void CarrierConfig::validate() const {
    if (num_subcarriers < 1) throw ConfigError("num_subcarriers must be >= 1");
    if (!(bandwidth_hz > 0.0)) throw ConfigError("bandwidth_hz must be positive");
    if (oversampling < 1) throw ConfigError("oversampling must be >= 1");
    if (qam_order != 4 && qam_order != 16 && qam_order != 64)
        throw ConfigError("qam_order must be 4, 16 or 64");
}

void PaOracleConfig::validate() const {
    if (pre_fir.empty() || post_fir.empty())
        throw ConfigError("pre_fir and post_fir need at least one tap");
    if (pre_fir[0] == cplx(0.0, 0.0) || post_fir[0] == cplx(0.0, 0.0))
        throw ConfigError("FIR tap 0 must be nonzero");
    if (const auto* rapp = std::get_if<RappNl>(&static_nl)) {
        if (!(rapp->sat_level > 0.0)) throw ConfigError("rapp sat_level must be positive");
        if (!(rapp->smoothness > 0.0)) throw ConfigError("rapp smoothness must be positive");
    }
    if (const auto* poly = std::get_if<PolynomialNl>(&static_nl)) {
        if (poly->odd_coeffs.empty()) throw ConfigError("polynomial NL needs coefficients");
    }
}

void Dataset::validate() const {
    if (K < 1 || carriers_in.size() != static_cast<std::size_t>(K) ||
        carriers_out.size() != static_cast<std::size_t>(K))
        throw ArgumentError("dataset carrier count mismatch");
    if (scale_factors.size() != static_cast<std::size_t>(K))
        throw ArgumentError("dataset scale factor count mismatch");
    for (int k = 0; k < K; ++k) {
        if (carriers_in[k].size() != num_samples || carriers_out[k].size() != num_samples)
            throw ArgumentError("dataset series length mismatch");
        if (carriers_in[k].sample_rate_hz != sample_rate_hz ||
            carriers_out[k].sample_rate_hz != sample_rate_hz)
            throw ArgumentError("dataset sample rate mismatch");
        if (!(scale_factors[k] > 0.0)) throw ArgumentError("scale factors must be positive");
    }
}

ComplexSeries generate_ofdm_carrier(const CarrierConfig& cfg, std::size_t num_samples) {
    cfg.validate();
    if (num_samples == 0) throw ArgumentError("requested length must be positive");

    const int nsc = cfg.num_subcarriers;
    const std::size_t nfft = static_cast<std::size_t>(nsc) * static_cast<std::size_t>(cfg.oversampling);
    const double fs = cfg.bandwidth_hz * static_cast<double>(cfg.oversampling);

    // Complex roots of unity for the symbol period; subcarrier k contributes
    // roots[(k*n) mod nfft] at sample n, which keeps the synthesis exact.
    std::vector<cplx> roots(nfft);
    for (std::size_t n = 0; n < nfft; ++n)
        roots[n] = std::polar(1.0, kTwoPi * static_cast<double>(n) / static_cast<double>(nfft));

    const std::vector<cplx> constellation = qam_constellation(cfg.qam_order);
    Rng rng(cfg.seed);

    std::vector<cplx> out(num_samples, cplx(0.0, 0.0));
    const double sym_scale = 1.0 / std::sqrt(static_cast<double>(nsc));
    const std::size_t num_symbols = (num_samples + nfft - 1) / nfft;
    for (std::size_t s = 0; s < num_symbols; ++s) {
        const std::size_t start = s * nfft;
        const std::size_t len = std::min(nfft, num_samples - start);
        for (int sc = 0; sc < nsc; ++sc) {
            const cplx sym =
                constellation[rng.uniform_int(constellation.size())] * sym_scale;
            // Centered bin layout, DC included.
            const long bin = static_cast<long>(sc) - static_cast<long>(nsc / 2);
            const std::size_t k =
                static_cast<std::size_t>(((bin % static_cast<long>(nfft)) + static_cast<long>(nfft)) %
                                         static_cast<long>(nfft));
            std::size_t idx = 0;
            for (std::size_t n = 0; n < len; ++n) {
                out[start + n] += sym * roots[idx];
                idx += k;
                if (idx >= nfft) idx -= nfft;
            }
        }
    }

    ComplexSeries series(std::move(out), fs);
    const double target_rms = std::pow(10.0, -cfg.rms_backoff_db / 20.0);
    const double actual_rms = rms(series);
    if (actual_rms > 0.0) {
        const double g = target_rms / actual_rms;
        for (cplx& x : series.samples) x *= g;
    }
    return series;
}

ComplexSeries combine_carriers(const std::vector<ComplexSeries>& carriers,
                               const std::vector<double>& offsets_hz, double fs_hz,
                               const std::vector<double>& bandwidths_hz) {
    if (carriers.empty()) throw ArgumentError("no carriers to combine");
    if (carriers.size() != offsets_hz.size())
        throw ArgumentError("carrier/offset count mismatch");
    if (!(fs_hz > 0.0)) throw ArgumentError("fs must be positive");
    const std::size_t n = carriers[0].size();
    for (std::size_t k = 0; k < carriers.size(); ++k) {
        if (carriers[k].size() != n) throw ArgumentError("carriers must share length");
        const double half_bw = bandwidths_hz.empty() ? 0.0 : bandwidths_hz[k] / 2.0;
        if (std::abs(offsets_hz[k]) + half_bw >= fs_hz / 2.0)
            throw ArgumentError("carrier offset violates the Nyquist bound");
    }

    std::vector<cplx> out(n, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < carriers.size(); ++k) {
        const double f = offsets_hz[k];
        if (f == 0.0) {
            for (std::size_t i = 0; i < n; ++i) out[i] += carriers[k].samples[i];
            continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double frac = std::fmod(f * static_cast<double>(i), fs_hz) / fs_hz;
            out[i] += carriers[k].samples[i] * std::polar(1.0, kTwoPi * frac);
        }
    }
    return ComplexSeries(std::move(out), fs_hz);
}

namespace {

/// Kaiser-windowed linear-phase low-pass prototype, odd length.
std::vector<double> design_lowpass(double cutoff_hz, double fs_hz, int taps, double beta) {
    const int dly = (taps - 1) / 2;
    const double fc = cutoff_hz / fs_hz; // cycles per sample
    std::vector<double> h(static_cast<std::size_t>(taps));
    const double i0b = std::cyl_bessel_i(0.0, beta);
    for (int t = 0; t < taps; ++t) {
        const double m = static_cast<double>(t - dly);
        double sinc;
        if (m == 0.0) {
            sinc = 2.0 * fc;
        } else {
            sinc = std::sin(kTwoPi * fc * m) / (M_PI * m);
        }
        const double r = 2.0 * static_cast<double>(t) / static_cast<double>(taps - 1) - 1.0;
        const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0b;
        h[static_cast<std::size_t>(t)] = sinc * w;
    }
    return h;
}

struct KaiserSpec {
    int taps;
    double beta;
};

KaiserSpec kaiser_for(double atten_db, double transition_hz, double fs_hz) {
    const double dw = kTwoPi * transition_hz / fs_hz;
    double beta = 0.0;
    if (atten_db > 50.0) {
        beta = 0.1102 * (atten_db - 8.7);
    } else if (atten_db >= 21.0) {
        beta = 0.5842 * std::pow(atten_db - 21.0, 0.4) + 0.07886 * (atten_db - 21.0);
    }
    int taps = static_cast<int>(std::ceil((atten_db - 7.95) / (2.285 * dw))) + 1;
    if (taps < 5) taps = 5;
    if (taps % 2 == 0) ++taps;
    if (taps > 1025) taps = 1025;
    return {taps, beta};
}

} // namespace

DemuxResult demux_carriers(const ComplexSeries& composite, const std::vector<double>& offsets_hz,
                           const std::vector<double>& bandwidths_hz, const DemuxOptions& opts) {
    composite.validate();
    if (offsets_hz.size() != bandwidths_hz.size() || offsets_hz.empty())
        throw ArgumentError("offsets/bandwidths must be non-empty and equal length");
    const double fs = composite.sample_rate_hz;
    for (std::size_t k = 0; k < offsets_hz.size(); ++k) {
        if (std::abs(offsets_hz[k]) + bandwidths_hz[k] / 2.0 >= fs / 2.0)
            throw ArgumentError("carrier offset violates the Nyquist bound");
    }

    DemuxResult result;
    for (std::size_t a = 0; a < offsets_hz.size(); ++a) {
        for (std::size_t b = a + 1; b < offsets_hz.size(); ++b) {
            const double gap = std::abs(offsets_hz[a] - offsets_hz[b]);
            if (gap < (bandwidths_hz[a] + bandwidths_hz[b]) / 2.0) {
                result.warnings.push_back("carriers " + std::to_string(a) + " and " +
                                          std::to_string(b) + " have overlapping spectra");
            }
        }
    }

    const std::size_t n = composite.size();
    const auto& kern = kernels::active_backend();

    for (std::size_t k = 0; k < offsets_hz.size(); ++k) {
        // Shift the carrier of interest down to baseband.
        std::vector<cplx> shifted(n);
        const double f = offsets_hz[k];
        for (std::size_t i = 0; i < n; ++i) {
            const double frac = std::fmod(f * static_cast<double>(i), fs) / fs;
            shifted[i] = composite.samples[i] * std::polar(1.0, -kTwoPi * frac);
        }

        const double cutoff = bandwidths_hz[k] / 2.0 * opts.guard_factor;
        if (cutoff >= fs / 2.0) {
            // Wide-open filter degenerates to the identity.
            result.carriers.emplace_back(std::move(shifted), fs);
            continue;
        }

        // Transition band runs to the nearest other carrier edge, or Nyquist.
        double stop_edge = fs / 2.0;
        for (std::size_t j = 0; j < offsets_hz.size(); ++j) {
            if (j == k) continue;
            const double edge = std::abs(offsets_hz[j] - offsets_hz[k]) - bandwidths_hz[j] / 2.0;
            if (edge > cutoff) stop_edge = std::min(stop_edge, edge);
        }
        if (stop_edge <= cutoff) stop_edge = std::min(fs / 2.0, cutoff * 1.5);

        KaiserSpec spec = kaiser_for(opts.stop_atten_db, stop_edge - cutoff, fs);
        if (opts.fir_taps > 0) spec.taps = opts.fir_taps | 1;
        result.fir_taps_used = std::max(result.fir_taps_used, spec.taps);

        const std::vector<double> h = design_lowpass(cutoff, fs, spec.taps, spec.beta);
        // Complex taps reversed once so filtering reduces to a dot product.
        std::vector<cplx> hrev(h.rbegin(), h.rend());
        const int dly = (spec.taps - 1) / 2;

        // y[i] = sum_t h[t] shifted[i - t + dly], zero outside the series.
        std::vector<cplx> y(n, cplx(0.0, 0.0));
        const long taps = spec.taps;
        for (std::size_t i = 0; i < n; ++i) {
            const long lo = static_cast<long>(i) + dly - (taps - 1); // first input index
            const long from = std::max(0L, lo);
            const long to = std::min(static_cast<long>(n) - 1, static_cast<long>(i) + dly);
            if (from > to) continue;
            const long hoff = from - lo;
            y[i] = kern.cdot(shifted.data() + from, hrev.data() + hoff,
                             static_cast<std::size_t>(to - from + 1));
        }
        result.carriers.emplace_back(std::move(y), fs);
    }
    return result;
}

cplx apply_static_nl(const std::variant<RappNl, SalehNl, PolynomialNl>& nl, cplx v) {
    if (const auto* rapp = std::get_if<RappNl>(&nl)) {
        const double a = std::abs(v);
        if (a == 0.0) return v;
        const double p2 = 2.0 * rapp->smoothness;
        const double gain = 1.0 / std::pow(1.0 + std::pow(a / rapp->sat_level, p2), 1.0 / p2);
        return v * gain;
    }
    if (const auto* saleh = std::get_if<SalehNl>(&nl)) {
        const double a = std::abs(v);
        if (a == 0.0) return v;
        const double amp = saleh->alpha_a * a / (1.0 + saleh->beta_a * a * a);
        const double phase = saleh->alpha_p * a * a / (1.0 + saleh->beta_p * a * a);
        return std::polar(amp, std::arg(v) + phase);
    }
    const auto& poly = std::get<PolynomialNl>(nl);
    const double a2 = std::norm(v);
    cplx acc(0.0, 0.0);
    double env = 1.0;
    for (const cplx& c : poly.odd_coeffs) {
        acc += c * env;
        env *= a2;
    }
    return v * acc;
}

namespace {

/// Causal FIR, output truncated to the input length.
std::vector<cplx> fir_filter(const std::vector<cplx>& x, const std::vector<cplx>& taps) {
    const std::size_t n = x.size();
    const std::size_t t = taps.size();
    std::vector<cplx> y(n, cplx(0.0, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        cplx acc(0.0, 0.0);
        const std::size_t tmax = std::min(t - 1, i);
        for (std::size_t j = 0; j <= tmax; ++j) acc += taps[j] * x[i - j];
        y[i] = acc;
    }
    return y;
}

} // namespace

ComplexSeries reference_pa(const ComplexSeries& input, const PaOracleConfig& cfg) {
    input.validate();
    cfg.validate();

    std::vector<cplx> y = fir_filter(input.samples, cfg.pre_fir);
    for (cplx& v : y) v = apply_static_nl(cfg.static_nl, v);
    y = fir_filter(y, cfg.post_fir);

    if (cfg.iq_imbalance) {
        const double g = cfg.iq_imbalance->gain_mismatch;
        const cplx rot = std::polar(1.0, cfg.iq_imbalance->phase_mismatch_rad);
        for (cplx& v : y) v = cplx((1.0 + g) * v.real(), (1.0 - g) * v.imag()) * rot;
    }
    if (cfg.dc_offset) {
        for (cplx& v : y) v += *cfg.dc_offset;
    }
    return ComplexSeries(std::move(y), input.sample_rate_hz);
}

namespace {

struct Alignment {
    long lag;
    double normalized_peak;
};

/// Integer lag of the cross-correlation peak between out and in over the
/// window [start, start+len) of in. Only causal (non-negative) lags are
/// searched; the processing chain cannot advance the signal.
Alignment find_alignment(const std::vector<cplx>& in, const std::vector<cplx>& out,
                         std::size_t start, std::size_t len, int max_lag) {
    const auto& kern = kernels::active_backend();
    const double in_energy =
        kern.sum_squares(reinterpret_cast<const double*>(in.data() + start), 2 * len);
    double best = -1.0;
    long best_lag = 0;
    for (int d = 0; d <= max_lag; ++d) {
        if (start + d + len > out.size()) break;
        const cplx xc = kern.cdot_conj(out.data() + start + d, in.data() + start, len);
        const double out_energy = kern.sum_squares(
            reinterpret_cast<const double*>(out.data() + start + d), 2 * len);
        const double denom = std::sqrt(in_energy * out_energy);
        const double score = denom > 0.0 ? std::abs(xc) / denom : 0.0;
        if (score > best) {
            best = score;
            best_lag = d;
        }
    }
    return {best_lag, best};
}

} // namespace

Dataset synthesize_dataset(const std::vector<CarrierConfig>& carrier_cfgs,
                           const std::vector<double>& offsets_hz, const PaOracleConfig& pa_cfg,
                           std::size_t num_samples, const SynthesisOptions& opts) {
    if (carrier_cfgs.empty()) throw ArgumentError("need at least one carrier");
    if (carrier_cfgs.size() != offsets_hz.size())
        throw ArgumentError("carrier/offset count mismatch");
    if (num_samples < 1000) throw ArgumentError("num_samples must be >= 1000");
    pa_cfg.validate();

    const int K = static_cast<int>(carrier_cfgs.size());
    const double fs = carrier_cfgs[0].bandwidth_hz * carrier_cfgs[0].oversampling;
    std::vector<double> bandwidths(carrier_cfgs.size());
    for (std::size_t k = 0; k < carrier_cfgs.size(); ++k) {
        carrier_cfgs[k].validate();
        const double fsk = carrier_cfgs[k].bandwidth_hz * carrier_cfgs[k].oversampling;
        if (std::abs(fsk - fs) > 1e-6 * fs)
            throw ConfigError("all carriers must share one composite sample rate");
        bandwidths[k] = carrier_cfgs[k].bandwidth_hz;
    }

    std::size_t margin = opts.edge_margin;
    if (margin == 0) {
        margin = 1024 + pa_cfg.pre_fir.size() + pa_cfg.post_fir.size() +
                 static_cast<std::size_t>(opts.max_align_lag);
    }
    const std::size_t total = num_samples + 2 * margin;

    std::vector<ComplexSeries> carriers;
    carriers.reserve(carrier_cfgs.size());
    for (const CarrierConfig& cc : carrier_cfgs) carriers.push_back(generate_ofdm_carrier(cc, total));

    const ComplexSeries composite = combine_carriers(carriers, offsets_hz, fs, bandwidths);
    const ComplexSeries pa_out = reference_pa(composite, pa_cfg);
    DemuxResult demuxed = demux_carriers(pa_out, offsets_hz, bandwidths, opts.demux);

    Dataset ds;
    ds.K = K;
    ds.num_samples = num_samples;
    ds.sample_rate_hz = fs;
    ds.offsets_hz = offsets_hz;
    ds.seed = carrier_cfgs[0].seed;

    for (int k = 0; k < K; ++k) {
        const std::vector<cplx>& in = carriers[static_cast<std::size_t>(k)].samples;
        const std::vector<cplx>& out = demuxed.carriers[static_cast<std::size_t>(k)].samples;

        const Alignment al = find_alignment(in, out, margin, num_samples, opts.max_align_lag);
        if (al.normalized_peak < opts.align_threshold)
            throw PipelineError("carrier " + std::to_string(k) +
                                ": alignment correlation peak " +
                                std::to_string(al.normalized_peak) + " below threshold");

        std::vector<cplx> in_w(in.begin() + static_cast<long>(margin),
                               in.begin() + static_cast<long>(margin + num_samples));
        std::vector<cplx> out_w(out.begin() + static_cast<long>(margin) + al.lag,
                                out.begin() + static_cast<long>(margin + num_samples) + al.lag);

        double peak = 0.0;
        for (const cplx& x : in_w) peak = std::max(peak, std::abs(x));
        if (peak == 0.0) throw PipelineError("carrier " + std::to_string(k) + " is silent");
        const double scale = 1.0 / peak;
        for (cplx& x : in_w) x *= scale;
        for (cplx& x : out_w) x *= scale;

        ds.carriers_in.emplace_back(std::move(in_w), fs);
        ds.carriers_out.emplace_back(std::move(out_w), fs);
        ds.scale_factors.push_back(scale);
    }
    ds.validate();
    return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, int train_parts, int test_parts) {
    if (train_parts < 1 || test_parts < 1) throw ArgumentError("split parts must be positive");
    if (ds.num_samples == 0 || ds.carriers_in.empty()) throw ArgumentError("empty dataset");

    const std::size_t n_train =
        ds.num_samples * static_cast<std::size_t>(train_parts) /
        static_cast<std::size_t>(train_parts + test_parts);

    auto take = [&](std::size_t from, std::size_t count) {
        Dataset part;
        part.K = ds.K;
        part.num_samples = count;
        part.sample_rate_hz = ds.sample_rate_hz;
        part.scale_factors = ds.scale_factors;
        part.offsets_hz = ds.offsets_hz;
        part.seed = ds.seed;
        for (int k = 0; k < ds.K; ++k) {
            const auto& in = ds.carriers_in[static_cast<std::size_t>(k)].samples;
            const auto& out = ds.carriers_out[static_cast<std::size_t>(k)].samples;
            part.carriers_in.emplace_back(
                std::vector<cplx>(in.begin() + static_cast<long>(from),
                                  in.begin() + static_cast<long>(from + count)),
                ds.sample_rate_hz);
            part.carriers_out.emplace_back(
                std::vector<cplx>(out.begin() + static_cast<long>(from),
                                  out.begin() + static_cast<long>(from + count)),
                ds.sample_rate_hz);
        }
        return part;
    };

    return {take(0, n_train), take(n_train, ds.num_samples - n_train)};
}

} // namespace pamk::signals

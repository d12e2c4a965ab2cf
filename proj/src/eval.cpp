#include "pamk/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "pamk/errors.hpp"
#include "pamk/fft.hpp"
#include "pamk/kernels.hpp"
#include "pamk/textio.hpp"

namespace pamk::eval {

double nmse_db(const ComplexSeries& pred, const ComplexSeries& meas) {
    if (pred.size() != meas.size() || meas.size() == 0)
        throw ArgumentError("series must be non-empty and of equal length");
    const auto& kern = kernels::active_backend();
    const std::size_t n2 = 2 * meas.size();
    const double denom =
        kern.sum_squares(reinterpret_cast<const double*>(meas.samples.data()), n2);
    if (denom == 0.0) throw ArgumentError("NMSE undefined for an all-zero measurement");

    double num = 0.0;
    for (std::size_t i = 0; i < meas.size(); ++i) num += std::norm(pred.samples[i] - meas.samples[i]);
    if (num == 0.0) return -HUGE_VAL;
    return 10.0 * std::log10(num / denom);
}

void welch_psd(const ComplexSeries& x, int nfft, double overlap, std::vector<double>& freqs_hz,
               std::vector<double>& psd) {
    if (nfft < 2 || !is_pow2(static_cast<std::size_t>(nfft)))
        throw ArgumentError("nfft must be a power of two >= 2");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ArgumentError("overlap must lie in [0, 1)");
    if (x.size() < static_cast<std::size_t>(nfft))
        throw ArgumentError("series shorter than nfft");
    const double fs = x.sample_rate_hz;

    std::vector<double> window(static_cast<std::size_t>(nfft));
    double u = 0.0;
    for (int i = 0; i < nfft; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / static_cast<double>(nfft));
        window[static_cast<std::size_t>(i)] = w;
        u += w * w;
    }

    std::size_t hop = static_cast<std::size_t>(std::lround(nfft * (1.0 - overlap)));
    if (hop == 0) hop = 1;
    const std::size_t nseg = 1 + (x.size() - static_cast<std::size_t>(nfft)) / hop;

    std::vector<double> acc(static_cast<std::size_t>(nfft), 0.0);
    std::vector<cplx> seg(static_cast<std::size_t>(nfft));
    for (std::size_t s = 0; s < nseg; ++s) {
        const std::size_t at = s * hop;
        for (int i = 0; i < nfft; ++i)
            seg[static_cast<std::size_t>(i)] =
                x.samples[at + static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
        fft_inplace(seg, false);
        for (int i = 0; i < nfft; ++i) acc[static_cast<std::size_t>(i)] += std::norm(seg[static_cast<std::size_t>(i)]);
    }

    const double scale = 1.0 / (static_cast<double>(nseg) * fs * u);
    freqs_hz.resize(static_cast<std::size_t>(nfft));
    psd.resize(static_cast<std::size_t>(nfft));
    for (int i = 0; i < nfft; ++i) {
        // Centered axis: bin order rotated by nfft/2.
        const int src = (i + nfft / 2) % nfft;
        freqs_hz[static_cast<std::size_t>(i)] =
            (static_cast<double>(i) - nfft / 2.0) * fs / static_cast<double>(nfft);
        psd[static_cast<std::size_t>(i)] = acc[static_cast<std::size_t>(src)] * scale;
    }
}

SpectrumTrace error_spectrum(const ComplexSeries& pred, const ComplexSeries& meas, int nfft,
                             double overlap, const std::string& label) {
    if (pred.size() != meas.size()) throw ArgumentError("series must share length");
    ComplexSeries err;
    err.sample_rate_hz = meas.sample_rate_hz;
    err.samples.resize(meas.size());
    for (std::size_t i = 0; i < meas.size(); ++i)
        err.samples[i] = meas.samples[i] - pred.samples[i];

    SpectrumTrace trace;
    trace.label = label;
    std::vector<double> err_psd, meas_psd, meas_freqs;
    welch_psd(err, nfft, overlap, trace.freqs_hz, err_psd);
    welch_psd(meas, nfft, overlap, meas_freqs, meas_psd);

    double peak = 0.0;
    for (const double p : meas_psd) peak = std::max(peak, p);
    if (peak == 0.0) throw ArgumentError("measured signal has no power");

    trace.psd_db.resize(err_psd.size());
    for (std::size_t i = 0; i < err_psd.size(); ++i) {
        const double rel = err_psd[i] / peak;
        trace.psd_db[i] =
            rel > 0.0 ? std::max(kNmseFloorDb, 10.0 * std::log10(rel)) : kNmseFloorDb;
    }
    return trace;
}

std::string CompareReport::to_csv() const {
    std::string out = "model,coefficients,nmse_db\n";
    for (const NmseReport& row : rows) {
        out += row.model_name + "," + std::to_string(row.coefficient_count) + ",";
        for (std::size_t k = 0; k < row.per_carrier_nmse_db.size(); ++k) {
            if (k) out += "/";
            out += format_double(row.per_carrier_nmse_db[k]);
        }
        out += "\n";
    }
    return out;
}

std::string CompareReport::to_json() const {
    nlohmann::json doc;
    doc["rows"] = nlohmann::json::array();
    for (const NmseReport& row : rows) {
        nlohmann::json r;
        r["model"] = row.model_name;
        r["coefficients"] = row.coefficient_count;
        r["dataset"] = row.dataset_id;
        r["split"] = row.split;
        nlohmann::json vals = nlohmann::json::array();
        for (const double v : row.per_carrier_nmse_db) {
            if (std::isinf(v)) {
                vals.push_back(v > 0 ? "inf" : "-inf");
            } else {
                vals.push_back(v);
            }
        }
        r["nmse_db"] = std::move(vals);
        doc["rows"].push_back(std::move(r));
    }
    return doc.dump(2) + "\n";
}

CompareReport compare_report(const std::vector<models::TrainedModel>& trained,
                             const signals::Dataset& test, const std::string& split_name) {
    test.validate();
    CompareReport report;
    for (const models::TrainedModel& model : trained) {
        if (model.feature.K != test.K)
            throw ConfigError("model '" + model.name + "' was built for K=" +
                              std::to_string(model.feature.K) + ", dataset has K=" +
                              std::to_string(test.K));
        const std::vector<ComplexSeries> pred = model.predict(test.carriers_in);
        NmseReport row;
        row.model_name = model.name;
        row.coefficient_count = model.coefficient_count();
        row.dataset_id = model.dataset_id.empty()
                             ? "seed" + std::to_string(test.seed) + "-K" + std::to_string(test.K)
                             : model.dataset_id;
        row.split = split_name;
        for (int k = 0; k < test.K; ++k) {
            row.per_carrier_nmse_db.push_back(
                nmse_db(pred[static_cast<std::size_t>(k)],
                        test.carriers_out[static_cast<std::size_t>(k)]));
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

} // namespace pamk::eval

#pragma once

#include <string>
#include <vector>

#include "pamk/complexseries.hpp"
#include "pamk/models.hpp"
#include "pamk/signals.hpp"

namespace pamk::eval {

/// Sentinel floor used when an error power is exactly zero.
constexpr double kNmseFloorDb = -300.0;

/// 10 log10( sum((Ip-Im)^2 + (Qp-Qm)^2) / sum(Im^2 + Qm^2) ).
/// A perfect prediction returns -infinity.
double nmse_db(const ComplexSeries& pred, const ComplexSeries& meas);

struct SpectrumTrace {
    std::vector<double> freqs_hz; // strictly increasing, centered at 0
    std::vector<double> psd_db;   // relative to the measured-signal PSD peak
    std::string label;
};

/// Averaged-periodogram PSD (Hann window). Returns centered frequencies and
/// the two-sided PSD in linear power-per-Hz units.
void welch_psd(const ComplexSeries& x, int nfft, double overlap,
               std::vector<double>& freqs_hz, std::vector<double>& psd);

/// PSD of (meas - pred) in dB relative to the peak PSD of meas, floored at
/// kNmseFloorDb.
SpectrumTrace error_spectrum(const ComplexSeries& pred, const ComplexSeries& meas, int nfft = 1024,
                             double overlap = 0.5, const std::string& label = "");

struct NmseReport {
    std::string model_name;
    int coefficient_count = 0;
    std::vector<double> per_carrier_nmse_db;
    std::string dataset_id;
    std::string split; // "train" or "test"
};

struct CompareReport {
    std::vector<NmseReport> rows;

    /// `model,coefficients,nmse_db` with per-carrier values joined by '/'.
    std::string to_csv() const;
    std::string to_json() const;
};

/// Evaluates every model on the given split and assembles the table rows.
CompareReport compare_report(const std::vector<models::TrainedModel>& trained,
                             const signals::Dataset& test, const std::string& split_name);

} // namespace pamk::eval

#pragma once

#include <string>

#include "pamk/eval.hpp"
#include "pamk/models.hpp"
#include "pamk/signals.hpp"

namespace pamk::io {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// CSV layout: n,I_in_1,Q_in_1,...,I_in_K,Q_in_K,I_out_1,Q_out_1,...,Q_out_K.
/// Values are written in shortest round-trip decimal form. The JSON sidecar
/// carries sample_rate_hz, K, num_samples, scale_factors, seed and offsets.
void write_dataset(const signals::Dataset& ds, const std::string& csv_path,
                   const std::string& sidecar_path);

signals::Dataset read_dataset(const std::string& csv_path, const std::string& sidecar_path);

/// CSV layout: stage,epoch,mean_mse.
void write_train_log(const models::TrainLog& log, const std::string& path);

/// CSV layout: freq_hz,psd_db.
void write_spectrum(const eval::SpectrumTrace& trace, const std::string& path);

} // namespace pamk::io

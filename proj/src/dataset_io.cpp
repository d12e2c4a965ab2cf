#include "pamk/dataset_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pamk/errors.hpp"
#include "pamk/textio.hpp"

namespace pamk::io {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

void write_dataset(const signals::Dataset& ds, const std::string& csv_path,
                   const std::string& sidecar_path) {
    ds.validate();
    std::string csv = "n";
    for (int k = 1; k <= ds.K; ++k)
        csv += ",I_in_" + std::to_string(k) + ",Q_in_" + std::to_string(k);
    for (int k = 1; k <= ds.K; ++k)
        csv += ",I_out_" + std::to_string(k) + ",Q_out_" + std::to_string(k);
    csv += "\n";
    for (std::size_t n = 0; n < ds.num_samples; ++n) {
        csv += std::to_string(n);
        for (int k = 0; k < ds.K; ++k) {
            const cplx v = ds.carriers_in[static_cast<std::size_t>(k)].samples[n];
            csv += "," + format_double(v.real()) + "," + format_double(v.imag());
        }
        for (int k = 0; k < ds.K; ++k) {
            const cplx v = ds.carriers_out[static_cast<std::size_t>(k)].samples[n];
            csv += "," + format_double(v.real()) + "," + format_double(v.imag());
        }
        csv += "\n";
    }
    write_text_file(csv_path, csv);

    nlohmann::json side;
    side["sample_rate_hz"] = ds.sample_rate_hz;
    side["K"] = ds.K;
    side["num_samples"] = ds.num_samples;
    side["scale_factors"] = ds.scale_factors;
    side["seed"] = ds.seed;
    side["offsets_hz"] = ds.offsets_hz;
    write_text_file(sidecar_path, side.dump(2) + "\n");
}

signals::Dataset read_dataset(const std::string& csv_path, const std::string& sidecar_path) {
    nlohmann::json side;
    try {
        side = nlohmann::json::parse(read_text_file(sidecar_path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("bad dataset sidecar " + sidecar_path + ": " + e.what());
    }

    signals::Dataset ds;
    ds.K = side.at("K").get<int>();
    ds.num_samples = side.at("num_samples").get<std::size_t>();
    ds.sample_rate_hz = side.at("sample_rate_hz").get<double>();
    ds.scale_factors = side.at("scale_factors").get<std::vector<double>>();
    ds.seed = side.value("seed", 0ULL);
    ds.offsets_hz = side.value("offsets_hz", std::vector<double>{});
    if (ds.K < 1) throw IoError("sidecar K must be >= 1");

    const std::string csv = read_text_file(csv_path);
    ds.carriers_in.assign(static_cast<std::size_t>(ds.K), ComplexSeries{});
    ds.carriers_out.assign(static_cast<std::size_t>(ds.K), ComplexSeries{});
    for (int k = 0; k < ds.K; ++k) {
        ds.carriers_in[static_cast<std::size_t>(k)].sample_rate_hz = ds.sample_rate_hz;
        ds.carriers_in[static_cast<std::size_t>(k)].samples.reserve(ds.num_samples);
        ds.carriers_out[static_cast<std::size_t>(k)].sample_rate_hz = ds.sample_rate_hz;
        ds.carriers_out[static_cast<std::size_t>(k)].samples.reserve(ds.num_samples);
    }

    std::size_t pos = csv.find('\n');
    if (pos == std::string::npos) throw IoError("dataset CSV has no rows");
    const std::size_t expected_fields = 1 + 4 * static_cast<std::size_t>(ds.K);
    std::size_t rows = 0;
    while (pos + 1 < csv.size()) {
        const std::size_t end = csv.find('\n', pos + 1);
        const std::string_view line(csv.data() + pos + 1,
                                    (end == std::string::npos ? csv.size() : end) - pos - 1);
        pos = end == std::string::npos ? csv.size() : end;
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        std::size_t at = 0;
        while (at != std::string_view::npos && fields.size() < expected_fields + 1) {
            const std::size_t comma = line.find(',', at);
            fields.push_back(line.substr(at, comma == std::string_view::npos ? comma : comma - at));
            at = comma == std::string_view::npos ? std::string_view::npos : comma + 1;
        }
        if (fields.size() != expected_fields)
            throw IoError("dataset CSV row has " + std::to_string(fields.size()) +
                          " fields, expected " + std::to_string(expected_fields));
        for (int k = 0; k < ds.K; ++k) {
            ds.carriers_in[static_cast<std::size_t>(k)].samples.emplace_back(
                parse_double(fields[static_cast<std::size_t>(1 + 2 * k)]),
                parse_double(fields[static_cast<std::size_t>(2 + 2 * k)]));
            ds.carriers_out[static_cast<std::size_t>(k)].samples.emplace_back(
                parse_double(fields[static_cast<std::size_t>(1 + 2 * ds.K + 2 * k)]),
                parse_double(fields[static_cast<std::size_t>(2 + 2 * ds.K + 2 * k)]));
        }
        ++rows;
    }
    if (rows != ds.num_samples)
        throw IoError("dataset CSV has " + std::to_string(rows) + " rows, sidecar says " +
                      std::to_string(ds.num_samples));
    ds.validate();
    return ds;
}

void write_train_log(const models::TrainLog& log, const std::string& path) {
    std::string csv = "stage,epoch,mean_mse\n";
    for (const models::TrainLogRow& row : log) {
        csv += std::to_string(row.stage) + "," + std::to_string(row.epoch) + "," +
               format_double(row.mean_mse) + "\n";
    }
    write_text_file(path, csv);
}

void write_spectrum(const eval::SpectrumTrace& trace, const std::string& path) {
    std::string csv = "freq_hz,psd_db\n";
    for (std::size_t i = 0; i < trace.freqs_hz.size(); ++i) {
        csv += format_double(trace.freqs_hz[i]) + "," + format_double(trace.psd_db[i]) + "\n";
    }
    write_text_file(path, csv);
}

} // namespace pamk::io

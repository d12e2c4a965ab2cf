#include "pamk/experiment.hpp"

#include <filesystem>
#include <ostream>

#include <json.hpp>

#include "pamk/dataset_io.hpp"
#include "pamk/errors.hpp"
#include "pamk/eval.hpp"
#include "pamk/model_io.hpp"
#include "pamk/rng.hpp"

namespace pamk::experiment {

namespace {

using nlohmann::json;

cplx parse_cplx(const json& j) {
    if (!j.is_array() || j.size() != 2)
        throw ConfigError("complex values are written as [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<cplx> parse_cplx_vector(const json& j) {
    std::vector<cplx> out;
    for (const json& e : j) out.push_back(parse_cplx(e));
    return out;
}

signals::PaOracleConfig parse_pa(const json& j) {
    signals::PaOracleConfig pa;
    if (j.contains("pre_fir")) pa.pre_fir = parse_cplx_vector(j.at("pre_fir"));
    if (j.contains("post_fir")) pa.post_fir = parse_cplx_vector(j.at("post_fir"));
    if (j.contains("static_nl")) {
        const json& nl = j.at("static_nl");
        const std::string type = nl.value("type", "rapp");
        if (type == "rapp") {
            signals::RappNl rapp;
            rapp.smoothness = nl.value("smoothness", 2.0);
            rapp.sat_level = nl.value("sat_level", 1.0);
            pa.static_nl = rapp;
        } else if (type == "saleh") {
            signals::SalehNl saleh;
            saleh.alpha_a = nl.value("alpha_a", 2.0);
            saleh.beta_a = nl.value("beta_a", 1.0);
            saleh.alpha_p = nl.value("alpha_p", 1.0);
            saleh.beta_p = nl.value("beta_p", 1.0);
            pa.static_nl = saleh;
        } else if (type == "polynomial") {
            signals::PolynomialNl poly;
            poly.odd_coeffs = parse_cplx_vector(nl.at("odd_coeffs"));
            pa.static_nl = poly;
        } else {
            throw ConfigError("unknown static_nl type: " + type);
        }
    }
    if (j.contains("iq_imbalance") && !j.at("iq_imbalance").is_null()) {
        signals::IqImbalance iq;
        iq.gain_mismatch = j.at("iq_imbalance").value("gain_mismatch", 0.0);
        iq.phase_mismatch_rad = j.at("iq_imbalance").value("phase_mismatch_rad", 0.0);
        pa.iq_imbalance = iq;
    }
    if (j.contains("dc_offset") && !j.at("dc_offset").is_null())
        pa.dc_offset = parse_cplx(j.at("dc_offset"));
    return pa;
}

} // namespace

std::string ExperimentConfig::dataset_id() const {
    return "seed" + std::to_string(seed) + "-K" + std::to_string(K()) + "-N" +
           std::to_string(num_samples);
}

void ExperimentConfig::validate() const {
    if (carriers.empty()) throw ConfigError("config needs at least one carrier");
    if (carriers.size() != offsets_hz.size())
        throw ConfigError("offsets_hz must list one offset per carrier");
    for (const signals::CarrierConfig& c : carriers) c.validate();
    pa.validate();
    feature.validate();
    if (feature.K != K()) throw ConfigError("feature K must match the carrier count");
    train.validate();
    if (split_train < 1 || split_test < 1) throw ConfigError("split parts must be positive");
    if (models.empty()) throw ConfigError("config needs at least one model");
    for (const ModelSpec& m : models) {
        if (m.type != "drvcnn" && m.type != "arvtdnn" && m.type != "dnn" && m.type != "gmp")
            throw ConfigError("unknown model type: " + m.type);
    }
}

ExperimentConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.seed = doc.value("seed", 1ULL);

    const json& signal = doc.at("signal");
    int k = 0;
    for (const json& cj : signal.at("carriers")) {
        signals::CarrierConfig cc;
        cc.num_subcarriers = cj.value("num_subcarriers", 600);
        cc.bandwidth_hz = cj.at("bandwidth_hz").get<double>();
        cc.oversampling = cj.value("oversampling", 5);
        cc.qam_order = cj.value("qam_order", 64);
        cc.rms_backoff_db = cj.value("rms_backoff_db", 12.0);
        cc.seed = cj.contains("seed") ? cj.at("seed").get<std::uint64_t>()
                                      : derive_seed(cfg.seed, "carrier/" + std::to_string(k));
        cfg.carriers.push_back(cc);
        ++k;
    }
    cfg.offsets_hz = signal.value("offsets_hz", std::vector<double>{});
    if (cfg.offsets_hz.empty() && cfg.carriers.size() == 1) cfg.offsets_hz = {0.0};
    cfg.num_samples = signal.value("num_samples", std::size_t{20000});

    if (doc.contains("pa")) cfg.pa = parse_pa(doc.at("pa"));

    if (doc.contains("feature")) {
        const json& f = doc.at("feature");
        cfg.feature.M = f.value("M", 3);
        if (f.contains("envelope_exponents"))
            cfg.feature.envelope_exponents = f.at("envelope_exponents").get<std::vector<int>>();
        cfg.feature.edge_policy = f.value("edge_policy", "zero_pad") == "drop"
                                      ? features::EdgePolicy::kDrop
                                      : features::EdgePolicy::kZeroPad;
    }
    cfg.feature.K = cfg.K();

    for (const json& mj : doc.value("models", json::array())) {
        ModelSpec spec;
        spec.type = mj.at("type").get<std::string>();
        spec.name = mj.value("name", spec.type);
        if (spec.type == "arvtdnn") spec.arvtdnn_hidden = mj.value("hidden", 0);
        if (spec.type == "dnn" && mj.contains("hidden"))
            spec.dnn_hidden = mj.at("hidden").get<std::vector<int>>();
        if (spec.type == "gmp") {
            spec.gmp_index.Ka = mj.value("Ka", 11);
            spec.gmp_index.La = mj.value("La", 7);
            spec.gmp_index.Kb = mj.value("Kb", 3);
            spec.gmp_index.Mb = mj.value("Mb", 2);
            spec.gmp_index.Lb = mj.value("Lb", 5);
            spec.gmp_index.Kc = mj.value("Kc", 0);
            spec.gmp_index.Mc = mj.value("Mc", 0);
            spec.gmp_index.Lc = mj.value("Lc", 0);
        }
        spec.predesigned_filter = mj.value("predesigned_filter", "");
        cfg.models.push_back(std::move(spec));
    }

    if (doc.contains("train")) {
        const json& t = doc.at("train");
        cfg.train.lr = t.value("lr", 1e-3);
        cfg.train.beta1 = t.value("beta1", 0.9);
        cfg.train.beta2 = t.value("beta2", 0.999);
        cfg.train.eps = t.value("eps", 1e-8);
        cfg.train.batch_size = t.value("batch_size", 256);
        cfg.train.L1 = t.value("L1", 200);
        cfg.train.L2 = t.value("L2", 100);
        if (t.contains("mse_target") && !t.at("mse_target").is_null())
            cfg.train.mse_target = t.at("mse_target").get<double>();
        cfg.train.shuffle = t.value("shuffle", true);
    }

    if (doc.contains("split")) {
        const std::vector<int> split = doc.at("split").get<std::vector<int>>();
        if (split.size() != 2) throw ConfigError("split must be [train_parts, test_parts]");
        cfg.split_train = split[0];
        cfg.split_test = split[1];
    }
    if (doc.contains("eval")) {
        cfg.nfft = doc.at("eval").value("nfft", 1024);
        cfg.overlap = doc.at("eval").value("overlap", 0.5);
    }
    cfg.output_dir = doc.value("output_dir", "out");

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    return parse_config(io::read_text_file(path));
}

namespace {

std::string join_path(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string sidecar_path_for(const std::string& csv_path) {
    std::filesystem::path p(csv_path);
    p.replace_extension(".json");
    return p.string();
}

} // namespace

void cmd_generate(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const signals::Dataset ds =
        signals::synthesize_dataset(cfg.carriers, cfg.offsets_hz, cfg.pa, cfg.num_samples);
    const std::string csv = join_path(out_dir, "dataset.csv");
    io::write_dataset(ds, csv, join_path(out_dir, "dataset.json"));
    log << "wrote " << csv << " (" << ds.num_samples << " samples, K=" << ds.K << ")\n";
}

void cmd_train(const ExperimentConfig& cfg, const std::string& dataset_csv,
               const std::string& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const signals::Dataset ds = io::read_dataset(dataset_csv, sidecar_path_for(dataset_csv));
    if (ds.K != cfg.K()) throw ConfigError("dataset K does not match the config");
    const auto [train_ds, test_ds] = signals::split_dataset(ds, cfg.split_train, cfg.split_test);
    (void)test_ds;

    for (const ModelSpec& spec : cfg.models) {
        models::TrainedModel out;
        out.type = spec.type;
        out.name = spec.name;
        out.feature = cfg.feature;
        out.scale_factors = ds.scale_factors;
        out.dataset_id = cfg.dataset_id();

        models::TrainConfig tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, "train/" + spec.name);
        const std::uint64_t init_seed = derive_seed(cfg.seed, "init/" + spec.name);
        models::TrainLog tlog;

        if (spec.type == "gmp") {
            if (ds.K > 1)
                throw UnsupportedError("multi-carrier GMP unsupported: the cross-carrier term "
                                       "structure is not defined for K>1");
            models::GmpModel g =
                models::gmp_fit(train_ds.carriers_in[0], train_ds.carriers_out[0], spec.gmp_index);
            tlog.push_back({1, 1, g.fit_residual_mse});
            out.impl = std::move(g);
        } else if (spec.type == "drvcnn") {
            nn::DrvcnnNet net = models::build_drvcnn(cfg.K(), cfg.feature.M, init_seed);
            const models::TensorDataset data = models::build_tensor_dataset(train_ds, cfg.feature);
            if (!spec.predesigned_filter.empty()) {
                const models::TrainedModel donor = io::read_model(spec.predesigned_filter);
                const auto* donor_net = std::get_if<nn::DrvcnnNet>(&donor.impl);
                if (!donor_net) throw ConfigError("predesigned_filter must be a drvcnn model");
                if (donor_net->S != net.S || donor_net->in_c != net.in_c)
                    throw ConfigError("predesigned filter shape does not match the model");
                const std::size_t nk = static_cast<std::size_t>(net.S) * 9 * net.in_c;
                models::load_predesigned_filter(
                    net, {donor_net->params.data(), nk},
                    {donor_net->params.data() + nk, static_cast<std::size_t>(net.S)});
                tlog = models::train_stage2_only(net, data, tc);
            } else {
                tlog = models::train_two_stage(net, data, tc);
            }
            out.impl = std::move(net);
        } else if (spec.type == "arvtdnn") {
            const int hidden =
                spec.arvtdnn_hidden > 0 ? spec.arvtdnn_hidden : models::default_arvtdnn_hidden(cfg.K());
            nn::MlpNet net = models::build_arvtdnn(cfg.K(), cfg.feature.M, hidden, init_seed);
            const models::VectorDataset data =
                models::build_vector_dataset(train_ds, cfg.feature, features::MlpVariant::kArvtdnn);
            tlog = models::train_mlp(net, data, tc);
            out.impl = std::move(net);
        } else {
            const std::vector<int> hidden =
                spec.dnn_hidden.empty() ? models::default_dnn_hidden(cfg.K()) : spec.dnn_hidden;
            nn::MlpNet net = models::build_dnn(cfg.K(), cfg.feature.M, hidden, init_seed);
            const models::VectorDataset data =
                models::build_vector_dataset(train_ds, cfg.feature, features::MlpVariant::kDnn);
            tlog = models::train_mlp(net, data, tc);
            out.impl = std::move(net);
        }

        const std::string model_path = join_path(out_dir, spec.name + ".model.json");
        io::write_model(out, model_path);
        io::write_train_log(tlog, join_path(out_dir, spec.name + ".train_log.csv"));
        log << "trained " << spec.name << " (" << out.coefficient_count()
            << " coefficients) -> " << model_path << "\n";
    }
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& dataset_csv,
                  const std::string& models_dir, const std::string& out_dir, std::ostream& log) {
    ensure_dir(out_dir);
    const signals::Dataset ds = io::read_dataset(dataset_csv, sidecar_path_for(dataset_csv));
    if (ds.K != cfg.K()) throw ConfigError("dataset K does not match the config");
    const auto [train_ds, test_ds] = signals::split_dataset(ds, cfg.split_train, cfg.split_test);
    (void)train_ds;

    std::vector<models::TrainedModel> trained;
    for (const ModelSpec& spec : cfg.models) {
        const std::string path = join_path(models_dir, spec.name + ".model.json");
        if (!std::filesystem::exists(path)) throw IoError("missing model file " + path);
        trained.push_back(io::read_model(path));
    }

    const eval::CompareReport report = eval::compare_report(trained, test_ds, "test");
    io::write_text_file(join_path(out_dir, "report.csv"), report.to_csv());
    io::write_text_file(join_path(out_dir, "report.json"), report.to_json());

    for (const models::TrainedModel& model : trained) {
        const std::vector<ComplexSeries> pred = model.predict(test_ds.carriers_in);
        const int kp = static_cast<int>(pred.size());
        for (int k = 0; k < kp; ++k) {
            const eval::SpectrumTrace trace = eval::error_spectrum(
                pred[static_cast<std::size_t>(k)], test_ds.carriers_out[static_cast<std::size_t>(k)],
                cfg.nfft, cfg.overlap, model.name + "/carrier" + std::to_string(k + 1));
            io::write_spectrum(trace, join_path(out_dir, "spectrum_" + model.name + "_carrier" +
                                                             std::to_string(k + 1) + ".csv"));
        }
    }

    log << report.to_csv();
}

} // namespace pamk::experiment

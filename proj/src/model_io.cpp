#include "pamk/model_io.hpp"

#include <json.hpp>

#include "pamk/dataset_io.hpp"
#include "pamk/errors.hpp"

namespace pamk::io {

namespace {

using nlohmann::json;

json params_to_json(const std::vector<double>& params,
                    const std::vector<nn::ParamBlock>& blocks) {
    json out = json::object();
    for (const nn::ParamBlock& b : blocks) {
        json entry;
        entry["shape"] = b.shape;
        entry["values"] = std::vector<double>(params.begin() + static_cast<long>(b.offset),
                                              params.begin() +
                                                  static_cast<long>(b.offset + b.count));
        out[b.name] = std::move(entry);
    }
    return out;
}

void params_from_json(const json& doc, const std::vector<nn::ParamBlock>& blocks,
                      std::vector<double>& params) {
    for (const nn::ParamBlock& b : blocks) {
        if (!doc.contains(b.name)) throw IoError("model file misses block " + b.name);
        const json& entry = doc.at(b.name);
        const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
        if (shape != b.shape) throw IoError("block " + b.name + " has an unexpected shape");
        const std::vector<double> values = entry.at("values").get<std::vector<double>>();
        if (values.size() != b.count) throw IoError("block " + b.name + " has wrong size");
        std::copy(values.begin(), values.end(), params.begin() + static_cast<long>(b.offset));
    }
}

json feature_to_json(const features::FeatureConfig& fc) {
    json out;
    out["M"] = fc.M;
    out["K"] = fc.K;
    out["envelope_exponents"] = fc.envelope_exponents;
    out["edge_policy"] = fc.edge_policy == features::EdgePolicy::kDrop ? "drop" : "zero_pad";
    return out;
}

features::FeatureConfig feature_from_json(const json& doc) {
    features::FeatureConfig fc;
    fc.M = doc.at("M").get<int>();
    fc.K = doc.at("K").get<int>();
    fc.envelope_exponents = doc.at("envelope_exponents").get<std::vector<int>>();
    fc.edge_policy = doc.value("edge_policy", "zero_pad") == "drop"
                         ? features::EdgePolicy::kDrop
                         : features::EdgePolicy::kZeroPad;
    fc.validate();
    return fc;
}

} // namespace

void write_model(const models::TrainedModel& model, const std::string& path) {
    json doc;
    doc["format"] = "pa-modelkit-model";
    doc["version"] = 1;

    json meta;
    meta["type"] = model.type;
    meta["name"] = model.name;
    meta["feature"] = feature_to_json(model.feature);
    // Carrier-major, row-major flatten; must match the FC input ordering.
    meta["flatten_order"] = "carrier-major,row-major";
    meta["scale_factors"] = model.scale_factors;
    meta["dataset_id"] = model.dataset_id;

    if (const auto* g = std::get_if<models::GmpModel>(&model.impl)) {
        meta["index_arrays"] = {{"Ka", g->index.Ka}, {"La", g->index.La}, {"Kb", g->index.Kb},
                                {"Mb", g->index.Mb}, {"Lb", g->index.Lb}, {"Kc", g->index.Kc},
                                {"Mc", g->index.Mc}, {"Lc", g->index.Lc}};
        meta["block_order"] = "aligned(k,l), lagging(k,l,m), leading(k,l,m)";
        meta["rank_deficient_fit"] = g->rank_deficient_fit;
        meta["fit_residual_mse"] = g->fit_residual_mse;
        std::vector<double> flat;
        flat.reserve(2 * g->coeffs.size());
        for (const cplx& c : g->coeffs) {
            flat.push_back(c.real());
            flat.push_back(c.imag());
        }
        doc["coeffs"] = {{"shape", {static_cast<int>(g->coeffs.size()), 2}}, {"values", flat}};
    } else if (const auto* d = std::get_if<nn::DrvcnnNet>(&model.impl)) {
        meta["frozen_conv"] = d->frozen_conv;
        meta["conv_flatten_order"] = "channel-major(s,h,w)";
        doc["params"] = params_to_json(d->params, d->blocks());
    } else {
        const auto& m = std::get<nn::MlpNet>(model.impl);
        meta["hidden"] = m.hidden;
        doc["params"] = params_to_json(m.params, m.blocks());
    }
    doc["meta"] = std::move(meta);
    write_text_file(path, doc.dump(2) + "\n");
}

models::TrainedModel read_model(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw IoError("bad model file " + path + ": " + e.what());
    }
    if (doc.value("format", "") != "pa-modelkit-model")
        throw IoError(path + " is not a model file");

    const json& meta = doc.at("meta");
    models::TrainedModel model;
    model.type = meta.at("type").get<std::string>();
    model.name = meta.value("name", model.type);
    model.feature = feature_from_json(meta.at("feature"));
    model.scale_factors = meta.value("scale_factors", std::vector<double>{});
    model.dataset_id = meta.value("dataset_id", "");

    if (model.type == "gmp") {
        models::GmpModel g;
        const json& idx = meta.at("index_arrays");
        g.index.Ka = idx.at("Ka").get<int>();
        g.index.La = idx.at("La").get<int>();
        g.index.Kb = idx.at("Kb").get<int>();
        g.index.Mb = idx.at("Mb").get<int>();
        g.index.Lb = idx.at("Lb").get<int>();
        g.index.Kc = idx.at("Kc").get<int>();
        g.index.Mc = idx.at("Mc").get<int>();
        g.index.Lc = idx.at("Lc").get<int>();
        g.rank_deficient_fit = meta.value("rank_deficient_fit", false);
        g.fit_residual_mse = meta.value("fit_residual_mse", 0.0);
        const std::vector<double> flat = doc.at("coeffs").at("values").get<std::vector<double>>();
        if (flat.size() != 2 * static_cast<std::size_t>(g.index.num_terms()))
            throw IoError("GMP coefficient count does not match the index arrays");
        for (std::size_t i = 0; i < flat.size(); i += 2) g.coeffs.emplace_back(flat[i], flat[i + 1]);
        model.impl = std::move(g);
    } else if (model.type == "drvcnn") {
        nn::DrvcnnNet net = nn::make_drvcnn_shape(model.feature.K, model.feature.M,
                                                  model.feature.rows());
        net.frozen_conv = meta.value("frozen_conv", false);
        params_from_json(doc.at("params"), net.blocks(), net.params);
        model.impl = std::move(net);
    } else if (model.type == "arvtdnn" || model.type == "dnn") {
        const std::vector<int> hidden = meta.at("hidden").get<std::vector<int>>();
        const int in_dim = model.type == "dnn"
                               ? 2 * model.feature.lags() * model.feature.K
                               : model.feature.rows() * model.feature.lags() * model.feature.K;
        nn::MlpNet net = nn::make_mlp_shape(in_dim, hidden, 2 * model.feature.K);
        params_from_json(doc.at("params"), net.blocks(), net.params);
        model.impl = std::move(net);
    } else {
        throw IoError("unknown model type: " + model.type);
    }
    return model;
}

} // namespace pamk::io

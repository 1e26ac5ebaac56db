#include "sarma/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sarma/errors.hpp"

namespace sarma {

using nlohmann::json;

std::string to_string(Beta0Mode mode) {
    return mode == Beta0Mode::FixedOne ? "fixed_one" : "free";
}

Beta0Mode beta0_mode_from_string(const std::string& text) {
    if (text == "fixed_one" || text == "fixed") return Beta0Mode::FixedOne;
    if (text == "free") return Beta0Mode::Free;
    fail(ErrorCode::SchemaError, "beta0_mode must be 'fixed_one' or 'free', got '" + text + "'");
}

void ModelStructure::validate(const std::string& self_id) const {
    if (p < 0 || q < 0 || d < 0) fail(ErrorCode::SchemaError, "structure orders must be nonnegative");
    std::set<CrossPredictor> seen;
    for (const auto& xp : cross_predictors) {
        if (xp.lag < 0) fail(ErrorCode::SchemaError, "cross predictor lag must be nonnegative");
        if (xp.source.empty()) fail(ErrorCode::SchemaError, "cross predictor needs a source id");
        if (xp.lag == 0 && !self_id.empty() && xp.source == self_id) {
            fail(ErrorCode::SchemaError, "series '" + self_id + "' cannot predict itself at lag 0");
        }
        if (!seen.insert(xp).second) {
            fail(ErrorCode::SchemaError,
                 "duplicate cross predictor " + xp.source + ":" + std::to_string(xp.lag));
        }
    }
}

void Parameters::validate(const ModelStructure& structure) const {
    if (static_cast<int>(beta.size()) != structure.q) {
        fail(ErrorCode::SchemaError, "beta has length " + std::to_string(beta.size()) +
                                         ", structure has q = " + std::to_string(structure.q));
    }
    if (static_cast<int>(alpha.size()) != structure.p) {
        fail(ErrorCode::SchemaError, "alpha has length " + std::to_string(alpha.size()) +
                                         ", structure has p = " + std::to_string(structure.p));
    }
    if (static_cast<int>(eta.size()) != structure.cross_count()) {
        fail(ErrorCode::SchemaError, "eta has length " + std::to_string(eta.size()) + ", structure has " +
                                         std::to_string(structure.cross_count()) +
                                         " cross predictors");
    }
    if (!(gamma > 0.0)) fail(ErrorCode::SchemaError, "gamma must be positive");
    if (!(sigma >= 0.0)) fail(ErrorCode::SchemaError, "sigma must be nonnegative");
    if (structure.beta0_mode == Beta0Mode::FixedOne && beta0 != 1.0) {
        fail(ErrorCode::SchemaError, "beta0 must equal 1 when beta0_mode is fixed_one");
    }
}

void MultiModel::add(const std::string& id, SeriesModel model) {
    if (!per_series.contains(id)) order.push_back(id);
    per_series[id] = std::move(model);
}

const SeriesModel& MultiModel::at(const std::string& id) const {
    auto it = per_series.find(id);
    if (it == per_series.end()) fail(ErrorCode::InvalidArgument, "model has no series '" + id + "'");
    return it->second;
}

void MultiModel::validate(const std::vector<std::string>& extra_ids) const {
    for (const auto& [id, m] : per_series) {
        m.structure.validate(id);
        m.params.validate(m.structure);
        for (const auto& xp : m.structure.cross_predictors) {
            const bool known = per_series.contains(xp.source) ||
                               std::find(extra_ids.begin(), extra_ids.end(), xp.source) != extra_ids.end();
            if (!known) {
                fail(ErrorCode::SchemaError,
                     "series '" + id + "' references unknown cross predictor source '" + xp.source + "'");
            }
        }
    }
}

Parameters init_parameters(const ModelStructure& structure, const TimeSeries& data, double sigma) {
    Parameters params;
    params.zeta = 0.0;
    params.beta0 = 1.0;
    params.beta.assign(structure.q, 0.0);
    params.alpha.assign(structure.p, 0.0);
    params.eta.assign(structure.cross_predictors.size(), 0.0);
    params.sigma = sigma;

    double sum = 0.0;
    double n = 0.0;
    for (const auto& v : data.values) {
        if (v) {
            sum += *v;
            n += 1.0;
        }
    }
    double gamma = 1.0;
    if (n >= 2.0) {
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& v : data.values) {
            if (v) ss += (*v - mean) * (*v - mean);
        }
        if (ss > 0.0) gamma = ss / n;
    }
    params.gamma = gamma;
    return params;
}

json to_json(const ModelStructure& s) {
    json xps = json::array();
    for (const auto& xp : s.cross_predictors) xps.push_back({{"source", xp.source}, {"lag", xp.lag}});
    return {{"p", s.p},
            {"q", s.q},
            {"d", s.d},
            {"beta0_mode", to_string(s.beta0_mode)},
            {"cross_predictors", xps}};
}

json to_json(const Parameters& p) {
    return {{"zeta", p.zeta},   {"beta0", p.beta0}, {"beta", p.beta},   {"alpha", p.alpha},
            {"eta", p.eta},     {"gamma", p.gamma}, {"sigma", p.sigma}};
}

json serialize(const MultiModel& model) {
    json series = json::array();
    for (const auto& id : model.order) {
        const auto& m = model.at(id);
        json entry = {{"id", id},
                      {"structure", to_json(m.structure)},
                      {"parameters", to_json(m.params)},
                      {"metadata", {{"cross_filled", m.cross_filled}}}};
        if (m.transform) entry["transform"] = {{"mean", m.transform->mean}, {"std", m.transform->std}};
        series.push_back(std::move(entry));
    }
    return {{"version", kModelSchemaVersion}, {"series", series}};
}

namespace {

const json& require(const json& doc, const char* key, const std::string& path) {
    if (!doc.is_object() || !doc.contains(key)) {
        fail(ErrorCode::SchemaError, "missing field '" + path + "." + key + "'");
    }
    return doc.at(key);
}

int require_int(const json& doc, const char* key, const std::string& path) {
    const auto& v = require(doc, key, path);
    if (!v.is_number_integer()) fail(ErrorCode::SchemaError, "field '" + path + "." + key + "' must be an integer");
    return v.get<int>();
}

double require_number(const json& doc, const char* key, const std::string& path) {
    const auto& v = require(doc, key, path);
    if (!v.is_number()) fail(ErrorCode::SchemaError, "field '" + path + "." + key + "' must be a number");
    return v.get<double>();
}

std::vector<double> require_vector(const json& doc, const char* key, const std::string& path,
                                   std::size_t expected) {
    const auto& v = require(doc, key, path);
    if (!v.is_array()) fail(ErrorCode::SchemaError, "field '" + path + "." + key + "' must be an array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(ErrorCode::SchemaError, "field '" + path + "." + key + "' must hold numbers");
        out.push_back(x.get<double>());
    }
    if (out.size() != expected) {
        fail(ErrorCode::SchemaError, "field '" + path + "." + key + "' has length " +
                                         std::to_string(out.size()) + ", expected " +
                                         std::to_string(expected));
    }
    return out;
}

}  // namespace

ModelStructure structure_from_json(const json& doc, const std::string& path) {
    ModelStructure s;
    s.p = require_int(doc, "p", path);
    s.q = require_int(doc, "q", path);
    s.d = doc.contains("d") ? require_int(doc, "d", path) : 0;
    if (doc.contains("beta0_mode")) {
        const auto& m = doc.at("beta0_mode");
        if (!m.is_string()) fail(ErrorCode::SchemaError, "field '" + path + ".beta0_mode' must be a string");
        s.beta0_mode = beta0_mode_from_string(m.get<std::string>());
    }
    if (doc.contains("cross_predictors")) {
        const auto& xps = doc.at("cross_predictors");
        if (!xps.is_array()) fail(ErrorCode::SchemaError, "field '" + path + ".cross_predictors' must be an array");
        for (std::size_t i = 0; i < xps.size(); ++i) {
            const std::string sub = path + ".cross_predictors[" + std::to_string(i) + "]";
            const auto& src = require(xps[i], "source", sub);
            if (!src.is_string()) fail(ErrorCode::SchemaError, "field '" + sub + ".source' must be a string");
            s.cross_predictors.push_back({src.get<std::string>(), require_int(xps[i], "lag", sub)});
        }
    }
    if (s.p < 0 || s.q < 0 || s.d < 0) {
        fail(ErrorCode::SchemaError, "field '" + path + "' has a negative order");
    }
    s.validate();
    return s;
}

Parameters parameters_from_json(const json& doc, const ModelStructure& s, const std::string& path) {
    Parameters p;
    p.zeta = require_number(doc, "zeta", path);
    p.beta = require_vector(doc, "beta", path, static_cast<std::size_t>(s.q));
    p.alpha = require_vector(doc, "alpha", path, static_cast<std::size_t>(s.p));
    p.eta = require_vector(doc, "eta", path, s.cross_predictors.size());
    p.gamma = require_number(doc, "gamma", path);
    p.sigma = doc.contains("sigma") ? require_number(doc, "sigma", path) : kDefaultSigma;
    // A fixed-one structure always exposes beta0 = 1, whatever the document says.
    p.beta0 = s.beta0_mode == Beta0Mode::FixedOne
                  ? 1.0
                  : (doc.contains("beta0") ? require_number(doc, "beta0", path) : 1.0);
    if (!(p.gamma > 0.0)) fail(ErrorCode::SchemaError, "field '" + path + ".gamma' must be positive");
    if (!(p.sigma >= 0.0)) fail(ErrorCode::SchemaError, "field '" + path + ".sigma' must be nonnegative");
    return p;
}

MultiModel deserialize(const json& doc) {
    const int version = require_int(doc, "version", "model");
    if (version != kModelSchemaVersion) {
        fail(ErrorCode::SchemaError, "field 'model.version' is " + std::to_string(version) +
                                         ", only version " + std::to_string(kModelSchemaVersion) +
                                         " is supported");
    }
    const auto& series = require(doc, "series", "model");
    if (!series.is_array()) fail(ErrorCode::SchemaError, "field 'model.series' must be an array");
    MultiModel model;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const std::string path = "model.series[" + std::to_string(i) + "]";
        const auto& entry = series[i];
        const auto& id = require(entry, "id", path);
        if (!id.is_string()) fail(ErrorCode::SchemaError, "field '" + path + ".id' must be a string");
        SeriesModel m;
        m.structure = structure_from_json(require(entry, "structure", path), path + ".structure");
        m.structure.validate(id.get<std::string>());
        m.params = parameters_from_json(require(entry, "parameters", path), m.structure, path + ".parameters");
        if (entry.contains("transform")) {
            const auto& tr = entry.at("transform");
            StandardizeRecord rec{require_number(tr, "mean", path + ".transform"),
                                  require_number(tr, "std", path + ".transform")};
            if (!(rec.std > 0.0)) fail(ErrorCode::SchemaError, "field '" + path + ".transform.std' must be positive");
            m.transform = rec;
        }
        if (entry.contains("metadata") && entry.at("metadata").contains("cross_filled")) {
            m.cross_filled = entry.at("metadata").at("cross_filled").get<bool>();
        }
        if (model.per_series.contains(id.get<std::string>())) {
            fail(ErrorCode::SchemaError, "field '" + path + ".id' duplicates '" + id.get<std::string>() + "'");
        }
        model.add(id.get<std::string>(), std::move(m));
    }
    return model;
}

MultiModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open model file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, "model file " + path.string() + ": " + e.what());
    }
    return deserialize(doc);
}

void save_model(const MultiModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write model file " + path.string());
    out << serialize(model).dump(2) << '\n';
}

}  // namespace sarma

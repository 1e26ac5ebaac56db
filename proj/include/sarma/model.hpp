#ifndef SARMA_MODEL_HPP
#define SARMA_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarma/data.hpp"

namespace sarma {

enum class Beta0Mode { FixedOne, Free };

struct CrossPredictor {
    std::string source;
    int lag = 1;

    friend bool operator==(const CrossPredictor&, const CrossPredictor&) = default;
    friend auto operator<=>(const CrossPredictor&, const CrossPredictor&) = default;
};

struct ModelStructure {
    int p = 0;
    int q = 0;
    int d = 0;
    Beta0Mode beta0_mode = Beta0Mode::FixedOne;
    std::vector<CrossPredictor> cross_predictors;

    /// Conditioning horizon max(p, q).
    int horizon() const { return p > q ? p : q; }
    int cross_count() const { return static_cast<int>(cross_predictors.size()); }

    /// Throws SchemaError on negative orders, negative lags or lag-0
    /// self-reference. `self_id` may be empty when unknown.
    void validate(const std::string& self_id = {}) const;

    friend bool operator==(const ModelStructure&, const ModelStructure&) = default;
};

struct Parameters {
    double zeta = 0.0;
    double beta0 = 1.0;
    std::vector<double> beta;   // beta[j-1] multiplies E_{t-j}
    std::vector<double> alpha;  // alpha[i-1] multiplies Y_{t-i}
    std::vector<double> eta;    // one per cross predictor
    double gamma = 1.0;
    double sigma = 0.01;

    void validate(const ModelStructure& structure) const;

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

inline constexpr double kDefaultSigma = 0.01;

/// One fitted series: structure, parameters and the preprocessing needed to
/// map forecasts back to the original scale.
struct SeriesModel {
    ModelStructure structure;
    Parameters params;
    std::optional<StandardizeRecord> transform;
    bool cross_filled = false;  // cross-predictor sources were fill_in'd for training
};

struct MultiModel {
    std::map<std::string, SeriesModel> per_series;
    std::vector<std::string> order;

    void add(const std::string& id, SeriesModel model);
    const SeriesModel& at(const std::string& id) const;

    /// Every cross-predictor source must be a member or appear in `extra_ids`.
    void validate(const std::vector<std::string>& extra_ids = {}) const;
};

/// Zero coefficients, beta0 = 1, gamma = population variance of the observed
/// values (1.0 when undefined), sigma = `sigma`.
Parameters init_parameters(const ModelStructure& structure, const TimeSeries& data,
                           double sigma = kDefaultSigma);

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const ModelStructure& structure);
nlohmann::json to_json(const Parameters& params);
nlohmann::json serialize(const MultiModel& model);

ModelStructure structure_from_json(const nlohmann::json& doc, const std::string& path = "structure");
Parameters parameters_from_json(const nlohmann::json& doc, const ModelStructure& structure,
                                const std::string& path = "parameters");
MultiModel deserialize(const nlohmann::json& doc);

MultiModel load_model(const std::filesystem::path& path);
void save_model(const MultiModel& model, const std::filesystem::path& path);

std::string to_string(Beta0Mode mode);
Beta0Mode beta0_mode_from_string(const std::string& text);

}  // namespace sarma

#endif  // SARMA_MODEL_HPP

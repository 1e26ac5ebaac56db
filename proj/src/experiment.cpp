#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "sarma/errors.hpp"
#include "sarma/estimation.hpp"
#include "sarma/evaluation.hpp"
#include "sarma/search.hpp"
#include "sarma/simulate.hpp"

namespace sarma {

using nlohmann::json;

namespace {

// ---- spec access with paths in error messages ----

const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) fail(ErrorCode::SpecError, path + "." + key + " is required");
    return obj.at(key);
}

template <typename T>
T as(const json& v, const std::string& path) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::SpecError, path + " has the wrong type");
    }
}

template <typename T>
T optional_field(const json& obj, const std::string& key, T fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    return as<T>(obj.at(key), path + "." + key);
}

std::pair<int, int> int_range(const json& obj, const std::string& key, std::pair<int, int> fallback,
                              const std::string& path) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (v.is_number_integer()) {
        const int x = v.get<int>();
        return {x, x};
    }
    auto r = as<std::vector<int>>(v, path + "." + key);
    if (r.size() != 2 || r[0] > r[1] || r[0] < 0) fail(ErrorCode::SpecError, path + "." + key + " must be [lo, hi]");
    return {r[0], r[1]};
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // splitmix64 step over the combined value
    std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// ---- random generator ----

double spectral_radius(const std::vector<double>& coef) {
    const int n = static_cast<int>(coef.size());
    if (n == 0) return 0.0;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) companion(0, i) = coef[i];
    for (int i = 1; i < n; ++i) companion(i, i - 1) = 1.0;
    return Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<double> draw_coefficients(int n, double lo, double hi, std::mt19937_64& rng, bool negate_for_ma) {
    std::uniform_real_distribution<double> mag(lo, hi);
    std::bernoulli_distribution sign(0.5);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<double> c(n);
        for (auto& x : c) x = (sign(rng) ? 1.0 : -1.0) * mag(rng);
        // Stationarity (AR) or invertibility (MA, roots of 1 + sum b z^j).
        std::vector<double> test = c;
        if (negate_for_ma) {
            for (auto& x : test) x = -x;
        }
        if (spectral_radius(test) < 0.95) return c;
    }
    return std::vector<double>(n, 0.0);
}

Collection random_collection(const json& g, std::uint64_t seed, const std::string& path, int holdout) {
    const int n = optional_field<int>(g, "series", 30, path);
    const int length = optional_field<int>(g, "length", 120, path);
    if (n < 1 || length < 4) fail(ErrorCode::SpecError, path + " needs series >= 1 and length >= 4");
    const auto [p_lo, p_hi] = int_range(g, "p", {0, 2}, path);
    const auto [q_lo, q_hi] = int_range(g, "q", {0, 2}, path);
    const auto alpha = optional_field<std::vector<double>>(g, "alpha_magnitude", {0.1, 0.8}, path);
    const auto beta = optional_field<std::vector<double>>(g, "beta_magnitude", {0.1, 0.8}, path);
    if (alpha.size() != 2 || beta.size() != 2) fail(ErrorCode::SpecError, path + " magnitudes must be [lo, hi]");
    const double gamma = optional_field<double>(g, "gamma", 1.0, path);
    const double sigma = optional_field<double>(g, "sigma", kDefaultSigma, path);
    const double zeta = optional_field<double>(g, "zeta", 0.0, path);

    double cross_fraction = 0.0;
    double cross_eta = 0.8;
    int cross_lag = 1;
    if (g.contains("cross")) {
        const json& c = g.at("cross");
        cross_fraction = optional_field<double>(c, "fraction", 1.0, path + ".cross");
        cross_eta = optional_field<double>(c, "eta", 0.8, path + ".cross");
        cross_lag = optional_field<int>(c, "lag", 1, path + ".cross");
        if (cross_lag < 1) fail(ErrorCode::SpecError, path + ".cross.lag must be >= 1");
    }
    double contamination = 0.0;
    double contamination_scale = 1.0;
    if (g.contains("contamination")) {
        const json& c = g.at("contamination");
        contamination = optional_field<double>(c, "fraction", 0.05, path + ".contamination");
        contamination_scale = optional_field<double>(c, "scale", 3.0, path + ".contamination");
    }

    std::mt19937_64 rng(mix(seed, 0xC011EC7));
    std::uniform_int_distribution<int> pick_p(p_lo, p_hi);
    std::uniform_int_distribution<int> pick_q(q_lo, q_hi);
    std::bernoulli_distribution has_cross(cross_fraction);
    MultiModel model;
    const int width = n >= 100 ? 3 : 2;
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "s%0*d", width, i + 1);
        ids.emplace_back(buf);
    }
    for (int i = 0; i < n; ++i) {
        SeriesModel m;
        m.structure.p = pick_p(rng);
        m.structure.q = pick_q(rng);
        m.params.zeta = zeta;
        m.params.alpha = draw_coefficients(m.structure.p, alpha[0], alpha[1], rng, false);
        m.params.beta = draw_coefficients(m.structure.q, beta[0], beta[1], rng, true);
        m.params.gamma = gamma;
        m.params.sigma = sigma;
        if (i > 0 && has_cross(rng)) {
            m.structure.cross_predictors.push_back({ids[i - 1], cross_lag});
            m.params.eta.push_back(cross_eta);
        }
        model.add(ids[i], m);
    }

    // Contaminated positions: a fraction of the holdout errors get a larger scale.
    std::set<std::pair<std::string, int>> contaminated;
    if (contamination > 0.0) {
        std::mt19937_64 crng(mix(seed, 0xBADD));
        std::bernoulli_distribution hit(contamination);
        for (const auto& id : ids) {
            for (int t = std::max(0, length - holdout); t < length; ++t) {
                if (hit(crng)) contaminated.insert({id, t});
            }
        }
    }
    return simulate(model, length, mix(seed, 0x5151), [&](const std::string& id, int t) {
        return contaminated.contains({id, t}) ? contamination_scale : 1.0;
    });
}

// ---- methods ----

enum class Method { Arma, SmoothedArma, Sarma, SarmaStar, SarmaFilled, SarmaXp, SarmaStarXp, SarmaXpFilled };

const std::map<std::string, Method>& method_names() {
    static const std::map<std::string, Method> names{
        {"arma", Method::Arma},
        {"smoothed_arma", Method::SmoothedArma},
        {"sarma", Method::Sarma},
        {"sarma_star", Method::SarmaStar},
        {"sarma_filled", Method::SarmaFilled},
        {"sarma_xp", Method::SarmaXp},
        {"sarma_star_xp", Method::SarmaStarXp},
        {"sarma_xp_filled", Method::SarmaXpFilled},
    };
    return names;
}

bool uses_cross(Method m) {
    return m == Method::SarmaXp || m == Method::SarmaStarXp || m == Method::SarmaXpFilled;
}

bool uses_filled(Method m) {
    return m == Method::Arma || m == Method::SmoothedArma || m == Method::SarmaFilled || m == Method::SarmaXpFilled;
}

struct Settings {
    std::uint64_t seed = 0;
    int holdout = 12;
    double sigma = kDefaultSigma;
    std::optional<ModelStructure> fixed;  // empty => search
    SearchConfig search;
    EmConfig em;
};

/// One missingness level of the collection, standardized with training
/// statistics. `masked` keeps the gaps, `filled` has training gaps filled.
struct Prepared {
    Collection masked_train;
    Collection filled_train;
    Collection masked_full;
    Collection filled_full;
};

Prepared prepare(const Collection& raw, double rate, const Settings& st) {
    Prepared out;
    for (std::size_t i = 0; i < raw.order.size(); ++i) {
        const TimeSeries& s = raw.at(raw.order[i]);
        if (s.size() <= static_cast<std::size_t>(st.holdout) + 2) {
            fail(ErrorCode::SpecError, "series '" + s.id + "' is too short for the holdout");
        }
        const std::size_t train_len = s.size() - st.holdout;
        // One mask seed per series: masks are nested across rates.
        const TimeSeries masked = standardize(make_missing(s, rate, mix(st.seed, i), st.holdout), train_len);
        TimeSeries train = masked;
        train.values.resize(train_len);
        TimeSeries filled_train = fill_in(train);
        TimeSeries filled_full = filled_train;
        filled_full.values.insert(filled_full.values.end(), masked.values.begin() + static_cast<long>(train_len),
                                  masked.values.end());
        out.masked_train.add(train);
        out.filled_train.add(filled_train);
        out.masked_full.add(masked);
        out.filled_full.add(filled_full);
    }
    return out;
}

struct Choice {
    ModelStructure structure;
    Parameters params;
};

class Runner {
public:
    Runner(const Prepared& data, const Settings& st) : data_(data), st_(st) {}

    double score(Method m, const std::string& id, std::size_t index) {
        const bool filled = uses_filled(m);
        const Collection& train = filled ? data_.filled_train : data_.masked_train;
        const Collection& full = filled ? data_.filled_full : data_.masked_full;
        const TimeSeries& target_full = full.at(id);
        const std::size_t holdout_start = target_full.size() - st_.holdout;

        if (m == Method::Arma || m == Method::SmoothedArma) {
            const ModelStructure s = structure_for(Family::Fixed, filled, id);
            const Values& y = train.at(id).values;
            const ClassicArmaFit fit = fit_classic_arma(s, y, Eigen::MatrixXd(static_cast<Eigen::Index>(y.size()), 0),
                                                        mix(st_.seed, index));
            return arma_sequential_score(s, fit.params, target_full.values,
                                         Eigen::MatrixXd(static_cast<Eigen::Index>(target_full.size()), 0),
                                         holdout_start, m == Method::SmoothedArma ? st_.sigma : 0.0);
        }

        const Family family = m == Method::SarmaStar ? Family::Free
                              : m == Method::SarmaStarXp ? Family::FreeXp
                              : uses_cross(m) ? Family::FixedXp
                                              : Family::Fixed;
        const ModelStructure s = structure_for(family, filled, id);
        const TimeSeries& target_train = train.at(id);
        Eigen::MatrixXd cross_full(static_cast<Eigen::Index>(target_full.size()), 0);
        if (s.cross_count() > 0) {
            // Sources: training part filled, holdout observed.
            cross_full = cross_matrix(s, data_.filled_full, target_full.size(), false);
        }
        const Eigen::MatrixXd cross_train = cross_full.topRows(static_cast<Eigen::Index>(target_train.size()));
        EmConfig em = st_.em;
        em.sigma = st_.sigma;
        const FitResult fit = fit_em(s, target_train.values, cross_train, em);
        return sequential_predictive_score(s, fit.params, target_full.values, cross_full, holdout_start);
    }

private:
    enum class Family { Fixed, Free, FixedXp, FreeXp };

    ModelStructure structure_for(Family family, bool filled, const std::string& id) {
        const bool free = family == Family::Free || family == Family::FreeXp;
        const bool xp = family == Family::FixedXp || family == Family::FreeXp;
        if (st_.fixed && !xp) {
            ModelStructure s = *st_.fixed;
            s.beta0_mode = free ? Beta0Mode::Free : Beta0Mode::FixedOne;
            return s;
        }
        const std::string key = std::to_string(static_cast<int>(family)) + (filled ? "f|" : "m|") + id;
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        SearchConfig cfg = st_.search;
        cfg.em = st_.em;
        cfg.em.sigma = st_.sigma;
        cfg.beta0_mode = free ? Beta0Mode::Free : Beta0Mode::FixedOne;
        const Collection& train = filled ? data_.filled_train : data_.masked_train;
        ModelStructure s;
        if (xp) {
            s = search_xp(id, train, cfg).structure;
        } else {
            s = search_pq(train.at(id), cfg).structure;
        }
        cache_.emplace(key, s);
        return s;
    }

    const Prepared& data_;
    const Settings& st_;
    std::map<std::string, ModelStructure> cache_;
};

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

Collection generate_collection(const json& spec, std::uint64_t seed, const std::filesystem::path& base_dir) {
    const std::string path = "spec.collection";
    if (!spec.is_object()) fail(ErrorCode::SpecError, path + " must be an object");
    auto resolve = [&](const std::string& file) {
        std::filesystem::path p(file);
        return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    if (spec.contains("csv")) return read_collection(resolve(as<std::string>(spec.at("csv"), path + ".csv")));
    if (spec.contains("model")) {
        const MultiModel model = load_model(resolve(as<std::string>(spec.at("model"), path + ".model")));
        const int length = as<int>(field(spec, "length", path), path + ".length");
        return simulate(model, length, mix(seed, 0x5151));
    }
    if (spec.contains("random")) {
        const int holdout = optional_field<int>(spec, "holdout", 12, path);
        return random_collection(spec.at("random"), seed, path + ".random", holdout);
    }
    fail(ErrorCode::SpecError, path + " needs one of csv, model or random");
}

json run_experiment(const json& spec, const std::filesystem::path& base_dir) {
    if (!spec.is_object()) fail(ErrorCode::SpecError, "spec must be a JSON object");
    Settings st;
    st.seed = optional_field<std::uint64_t>(spec, "seed", 0, "spec");
    st.holdout = optional_field<int>(spec, "holdout", 12, "spec");
    st.sigma = optional_field<double>(spec, "sigma", kDefaultSigma, "spec");
    if (st.holdout < 1) fail(ErrorCode::SpecError, "spec.holdout must be >= 1");
    if (!(st.sigma > 0.0)) fail(ErrorCode::SpecError, "spec.sigma must be > 0");
    if (spec.contains("em")) {
        try {
            st.em = em_config_from_json(spec.at("em"));
        } catch (const Error& e) {
            fail(ErrorCode::SpecError, std::string("spec.em: ") + e.what());
        }
    }
    st.em.sigma = st.sigma;

    const json structure = spec.value("structure", json("search"));
    if (structure.is_object()) {
        ModelStructure s;
        s.p = optional_field<int>(structure, "p", 0, "spec.structure");
        s.q = optional_field<int>(structure, "q", 0, "spec.structure");
        if (s.p < 0 || s.q < 0) fail(ErrorCode::SpecError, "spec.structure orders must be >= 0");
        st.fixed = s;
    } else if (structure != json("search")) {
        fail(ErrorCode::SpecError, "spec.structure must be \"search\" or {\"p\", \"q\"}");
    }
    if (spec.contains("search")) {
        const json& s = spec.at("search");
        if (s.contains("max_lag")) st.search.max_lag = as<int>(s.at("max_lag"), "spec.search.max_lag");
        st.search.candidate_lags =
            optional_field<std::vector<int>>(s, "candidate_lags", st.search.candidate_lags, "spec.search");
        st.search.validation_len = optional_field<int>(s, "validation", kStructuralValidationLen, "spec.search");
    }

    std::vector<std::pair<std::string, Method>> methods;
    const json& mlist = field(spec, "methods", "spec");
    if (!mlist.is_array() || mlist.empty()) fail(ErrorCode::SpecError, "spec.methods must be a non-empty array");
    for (std::size_t i = 0; i < mlist.size(); ++i) {
        const std::string path = "spec.methods[" + std::to_string(i) + "]";
        const auto name = as<std::string>(mlist[i], path);
        auto it = method_names().find(name);
        if (it == method_names().end()) fail(ErrorCode::SpecError, path + ": unknown method '" + name + "'");
        if (st.fixed && uses_cross(it->second)) {
            fail(ErrorCode::SpecError, path + ": cross-predictor methods need structure \"search\"");
        }
        methods.emplace_back(name, it->second);
    }
    const auto rates = optional_field<std::vector<double>>(spec, "missing_rates", {0.0}, "spec");
    for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] >= 0.0 && rates[i] < 1.0)) {
            fail(ErrorCode::SpecError, "spec.missing_rates[" + std::to_string(i) + "] must lie in [0, 1)");
        }
    }

    json collection_spec = field(spec, "collection", "spec");
    if (collection_spec.is_object() && !collection_spec.contains("holdout")) collection_spec["holdout"] = st.holdout;
    const Collection raw = generate_collection(collection_spec, st.seed, base_dir);
    if (raw.order.empty()) fail(ErrorCode::SpecError, "spec.collection holds no series");

    // scores[method][rate index][series index]
    std::map<std::string, std::vector<std::vector<double>>> scores;
    for (std::size_t r = 0; r < rates.size(); ++r) {
        const Prepared data = prepare(raw, rates[r], st);
        Runner runner(data, st);
        for (const auto& [name, method] : methods) {
            auto& row = scores[name];
            row.resize(rates.size());
            for (std::size_t i = 0; i < raw.order.size(); ++i) {
                double value = std::numeric_limits<double>::quiet_NaN();
                try {
                    value = runner.score(method, raw.order[i], i);
                } catch (const Error&) {
                    // recorded as a failure for this cell
                }
                row[r].push_back(value);
            }
        }
    }

    json report;
    report["seed"] = st.seed;
    report["holdout"] = st.holdout;
    report["sigma"] = st.sigma;
    report["series"] = raw.order;
    report["cells"] = json::array();
    for (const auto& [name, method] : methods) {
        for (std::size_t r = 0; r < rates.size(); ++r) {
            const auto& v = scores[name][r];
            double total = 0.0;
            int n = 0;
            json per_series = json::array();
            for (const double x : v) {
                per_series.push_back(number_or_null(x));
                if (std::isfinite(x)) {
                    total += x;
                    ++n;
                }
            }
            report["cells"].push_back({{"method", name},
                                       {"rate", rates[r]},
                                       {"mean_score", n > 0 ? json(total / n) : json(nullptr)},
                                       {"n", n},
                                       {"failures", static_cast<int>(v.size()) - n},
                                       {"scores", per_series}});
        }
    }

    report["tests"] = json::array();
    if (spec.contains("tests")) {
        const json& tests = spec.at("tests");
        if (!tests.is_array()) fail(ErrorCode::SpecError, "spec.tests must be an array");
        for (std::size_t k = 0; k < tests.size(); ++k) {
            const std::string path = "spec.tests[" + std::to_string(k) + "]";
            const auto a = as<std::string>(field(tests[k], "a", path), path + ".a");
            const auto b = as<std::string>(field(tests[k], "b", path), path + ".b");
            if (!scores.contains(a)) fail(ErrorCode::SpecError, path + ".a names a method not in spec.methods");
            if (!scores.contains(b)) fail(ErrorCode::SpecError, path + ".b names a method not in spec.methods");
            const double alpha = optional_field<double>(tests[k], "alpha", 0.05, path);
            const auto test_rates = optional_field<std::vector<double>>(tests[k], "rates", rates, path);
            for (const double rate : test_rates) {
                auto it = std::find(rates.begin(), rates.end(), rate);
                if (it == rates.end()) fail(ErrorCode::SpecError, path + ".rates lists a rate not in spec.missing_rates");
                const std::size_t r = static_cast<std::size_t>(it - rates.begin());
                std::vector<double> sa, sb;
                for (std::size_t i = 0; i < raw.order.size(); ++i) {
                    const double x = scores[a][r][i];
                    const double y = scores[b][r][i];
                    if (std::isfinite(x) && std::isfinite(y)) {
                        sa.push_back(x);
                        sb.push_back(y);
                    }
                }
                const SignTestResult res = sign_test(sa, sb, alpha);
                report["tests"].push_back({{"a", a},
                                           {"b", b},
                                           {"rate", rate},
                                           {"wins_a", res.wins_a},
                                           {"wins_b", res.wins_b},
                                           {"ties", res.ties},
                                           {"p_value", number_or_null(res.p_value)},
                                           {"significant", res.significant},
                                           {"all_ties", res.all_ties}});
            }
        }
    }
    return report;
}

std::string report_to_csv(const json& report) {
    std::ostringstream out;
    out.precision(17);
    out << "method,rate,mean_score,n\n";
    for (const auto& cell : report.at("cells")) {
        out << cell.at("method").get<std::string>() << ',' << cell.at("rate").get<double>() << ',';
        if (!cell.at("mean_score").is_null()) out << cell.at("mean_score").get<double>();
        out << ',' << cell.at("n").get<int>() << '\n';
    }
    return out.str();
}

}  // namespace sarma

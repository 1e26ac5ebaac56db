#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "sarma/data.hpp"
#include "sarma/errors.hpp"
#include "sarma/estimation.hpp"
#include "sarma/evaluation.hpp"
#include "sarma/forecast.hpp"
#include "sarma/model.hpp"
#include "sarma/search.hpp"
#include "sarma/simulate.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace sarma;

// Structured values cross the boundary as JSON text; the Python wrapper turns
// them into dicts.

namespace {

ModelStructure make_structure(int p, int q, const std::string& beta0) {
    ModelStructure s;
    s.p = p;
    s.q = q;
    s.beta0_mode = beta0_mode_from_string(beta0);
    return s;
}

Eigen::MatrixXd no_cross(std::size_t n) { return Eigen::MatrixXd(static_cast<Eigen::Index>(n), 0); }

std::string fit(const Values& y, int p, int q, const std::string& beta0, double sigma, int max_iters) {
    const ModelStructure s = make_structure(p, q, beta0);
    EmConfig em;
    em.sigma = sigma;
    em.max_iters = max_iters;
    const FitResult r = fit_em(s, y, no_cross(y.size()), em);
    return json{{"structure", to_json(s)},
                {"parameters", to_json(r.params)},
                {"loglik", r.trace.loglik},
                {"converged", r.trace.converged}}
        .dump();
}

std::vector<std::pair<double, double>> forecast(const Values& history, const std::string& structure_json,
                                                const std::string& params_json, int steps) {
    const ModelStructure s = structure_from_json(json::parse(structure_json));
    const Parameters p = parameters_from_json(json::parse(params_json), s);
    std::vector<std::pair<double, double>> out;
    for (const auto& m : multi_step(s, p, history, no_cross(history.size()), {}, steps)) {
        out.emplace_back(m.mean, m.variance);
    }
    return out;
}

double score(const Values& series, const std::string& structure_json, const std::string& params_json,
             std::size_t holdout_start) {
    const ModelStructure s = structure_from_json(json::parse(structure_json));
    const Parameters p = parameters_from_json(json::parse(params_json), s);
    return sequential_predictive_score(s, p, series, no_cross(series.size()), holdout_start);
}

std::string search(const Values& y, std::optional<int> max_lag, int max_iters) {
    SearchConfig cfg;
    cfg.max_lag = max_lag;
    cfg.em.max_iters = max_iters;
    const SearchResult r = search_pq(TimeSeries{"y", y, std::nullopt, 0}, cfg);
    json log = json::array();
    for (const auto& c : r.log) log.push_back({{"p", c.structure.p}, {"q", c.structure.q}, {"score", c.score}});
    return json{{"structure", to_json(r.structure)}, {"parameters", to_json(r.params)}, {"score", r.score}, {"log", log}}
        .dump();
}

std::map<std::string, Values> simulate_model(const std::string& model_json, int length, std::uint64_t seed) {
    const Collection c = simulate(deserialize(json::parse(model_json)), length, seed);
    std::map<std::string, Values> out;
    for (const auto& [id, s] : c.series) out[id] = s.values;
    return out;
}

py::tuple sign(const std::vector<double>& a, const std::vector<double>& b, double alpha) {
    const SignTestResult r = sign_test(a, b, alpha);
    return py::make_tuple(r.wins_a, r.wins_b, r.ties, r.p_value, r.significant);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Stochastic ARMA models";

    py::register_exception<Error>(m, "SarmaError");

    m.def("fit", &fit, py::arg("values"), py::arg("p"), py::arg("q"), py::arg("beta0") = "fixed",
          py::arg("sigma") = kDefaultSigma, py::arg("max_iters") = EmConfig{}.max_iters);
    m.def("forecast", &forecast, py::arg("history"), py::arg("structure"), py::arg("parameters"), py::arg("steps") = 1);
    m.def("sequential_score", &score, py::arg("series"), py::arg("structure"), py::arg("parameters"),
          py::arg("holdout_start"));
    m.def("search", &search, py::arg("values"), py::arg("max_lag") = std::nullopt,
          py::arg("max_iters") = EmConfig{}.max_iters);
    m.def("simulate", &simulate_model, py::arg("model"), py::arg("length"), py::arg("seed") = 0);
    m.def("sign_test", &sign, py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05);
    m.def("fill_in", [](const Values& v) { return fill_in(TimeSeries{"", v, std::nullopt, 0}).values; });
    m.def("run_experiment", [](const std::string& spec, const std::string& base_dir) {
        return run_experiment(json::parse(spec), base_dir).dump();
    }, py::arg("spec"), py::arg("base_dir") = "");
}

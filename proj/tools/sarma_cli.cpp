#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sarma/data.hpp"
#include "sarma/errors.hpp"
#include "sarma/estimation.hpp"
#include "sarma/evaluation.hpp"
#include "sarma/forecast.hpp"
#include "sarma/model.hpp"
#include "sarma/search.hpp"
#include "sarma/simulate.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sarma;

namespace {

struct Common {
    bool json_errors = false;
    std::uint64_t seed = 0;
};

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
}

std::string pick_series(const Collection& c, const std::string& requested) {
    if (!requested.empty()) {
        c.at(requested);  // throws with the id when absent
        return requested;
    }
    if (c.order.size() != 1) {
        fail(ErrorCode::InvalidArgument, "data holds " + std::to_string(c.order.size()) + " series; pick one with --series");
    }
    return c.order.front();
}

CrossPredictor parse_xp(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0) {
        fail(ErrorCode::InvalidArgument, "cross predictor '" + text + "' must look like source:lag");
    }
    try {
        std::size_t used = 0;
        const int lag = std::stoi(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument(text);
        return {text.substr(0, colon), lag};
    } catch (const std::logic_error&) {
        fail(ErrorCode::InvalidArgument, "cross predictor '" + text + "' has a bad lag");
    }
}

/// Standardizes and differences every series the way fit/search train on.
Collection prepare(const Collection& raw, int d) {
    Collection out;
    out.holdout_len = raw.holdout_len;
    for (const auto& id : raw.order) out.add(difference(standardize(raw.at(id)), d));
    return out;
}

Eigen::MatrixXd cross_for(const ModelStructure& s, const Collection& prepared, std::size_t length, bool* filled) {
    if (s.cross_count() == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(length), 0);
    return cross_matrix(s, prepared, length, true, filled);
}

// ---- fit ----

struct FitArgs {
    std::string data, series, out_model, trace, beta0 = "fixed";
    int p = 0, q = 0, d = 0, max_iters = EmConfig{}.max_iters;
    double sigma = kDefaultSigma;
    std::vector<std::string> xp;
};

void run_fit(const FitArgs& a) {
    if (!(a.sigma > 0.0)) {
        fail(ErrorCode::InvalidArgument,
             "--sigma must be > 0: with sigma = 0 the EM updates for zeta and the AR/MA coefficients stall at "
             "their starting values (EM stall), so the fit would never move");
    }
    const Collection raw = read_collection(a.data);
    const std::string id = pick_series(raw, a.series);
    ModelStructure s;
    s.p = a.p;
    s.q = a.q;
    s.d = a.d;
    s.beta0_mode = beta0_mode_from_string(a.beta0);
    for (const auto& x : a.xp) s.cross_predictors.push_back(parse_xp(x));
    s.validate(id);

    const Collection prepared = prepare(raw, a.d);
    TimeSeries target = prepared.at(id);
    target = fill_initial_segment(target, static_cast<std::size_t>(s.horizon()));
    bool filled = false;
    const Eigen::MatrixXd cross = cross_for(s, prepared, target.size(), &filled);

    EmConfig em;
    em.sigma = a.sigma;
    em.max_iters = a.max_iters;
    const FitResult fit = fit_em(s, target.values, cross, em);

    SeriesModel m{s, fit.params, standardize(raw.at(id)).transform, filled};
    MultiModel model;
    model.add(id, m);
    save_model(model, a.out_model);
    if (!a.trace.empty()) fit.trace.write_csv(a.trace);
}

// ---- forecast ----

struct ForecastArgs {
    std::string model, data, series, out;
    int steps = 1;
};

void run_forecast(const ForecastArgs& a) {
    if (a.steps < 1) fail(ErrorCode::InvalidArgument, "--steps must be >= 1");
    const MultiModel model = load_model(a.model);
    const Collection raw = read_collection(a.data);
    std::string id = a.series;
    if (id.empty()) {
        if (model.order.size() != 1) fail(ErrorCode::InvalidArgument, "model holds several series; pick one with --series");
        id = model.order.front();
    }
    const SeriesModel& m = model.at(id);
    const ModelStructure& s = m.structure;
    const StandardizeRecord rec = m.transform.value_or(StandardizeRecord{});

    const TimeSeries level = standardize_with(raw.at(id), rec);
    const TimeSeries history = difference(level, s.d);
    // Cross sources use their own statistics over the supplied data.
    const Collection prepared = prepare(raw, s.d);
    const Eigen::MatrixXd cross = cross_for(s, prepared, history.size(), nullptr);

    const std::vector<Moments> diffs = multi_step(s, m.params, history.values, cross, {}, a.steps);
    const std::vector<Moments> moments = undifference_forecast(level, diffs, s.d);

    std::ostringstream out;
    out.precision(17);
    out << "step,mean,variance\n";
    for (std::size_t h = 0; h < moments.size(); ++h) {
        out << h + 1 << ',' << rec.invert(moments[h].mean) << ',' << moments[h].variance * rec.std * rec.std << '\n';
    }
    write_text(a.out, out.str());
}

// ---- search ----

struct SearchArgs {
    std::string data, series, out_model, log, beta0 = "fixed";
    std::vector<int> xp_candidates;
    int max_lag = -1, d = 0, max_iters = EmConfig{}.max_iters;
    double sigma = kDefaultSigma;
};

void run_search(const SearchArgs& a) {
    if (!(a.sigma > 0.0)) fail(ErrorCode::InvalidArgument, "--sigma must be > 0 (sigma = 0 stalls EM)");
    const Collection raw = read_collection(a.data);
    const std::string id = pick_series(raw, a.series);
    const Collection prepared = prepare(raw, a.d);

    SearchConfig cfg;
    cfg.em.sigma = a.sigma;
    cfg.em.max_iters = a.max_iters;
    cfg.beta0_mode = beta0_mode_from_string(a.beta0);
    if (a.max_lag >= 0) cfg.max_lag = a.max_lag;
    SearchResult r;
    if (a.xp_candidates.empty()) {
        r = search_pq(prepared.at(id), cfg);
    } else {
        cfg.candidate_lags = a.xp_candidates;
        r = search_xp(id, prepared, cfg);
    }
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';

    ModelStructure s = r.structure;
    s.d = a.d;
    MultiModel model;
    model.add(id, SeriesModel{s, r.params, standardize(raw.at(id)).transform, s.cross_count() > 0});
    save_model(model, a.out_model);

    std::ostringstream log;
    log.precision(17);
    log << "p,q,cross_predictors,score\n";
    for (const auto& c : r.log) {
        std::string xp;
        for (const auto& x : c.structure.cross_predictors) xp += (xp.empty() ? "" : " ") + x.source + ":" + std::to_string(x.lag);
        log << c.structure.p << ',' << c.structure.q << ',' << xp << ',' << c.score << '\n';
    }
    fs::path log_path = a.log;
    if (log_path.empty()) log_path = fs::path(a.out_model).replace_extension(".search.csv");
    write_text(log_path, log.str());
}

// ---- eval ----

struct EvalArgs {
    std::string spec, out;
};

void run_eval(const EvalArgs& a, const Common& common, bool seed_given) {
    json spec = read_json(a.spec);
    if (seed_given) spec["seed"] = common.seed;
    const json report = run_experiment(spec, fs::path(a.spec).parent_path());
    const bool csv = fs::path(a.out).extension() == ".csv";
    write_text(a.out, csv ? report_to_csv(report) : report.dump(2) + "\n");
}

// ---- simulate / fill ----

struct SimulateArgs {
    std::string model, collection, out;
    int length = 120;
    double missing_rate = 0.0;
    int holdout = 0;
};

void run_simulate(const SimulateArgs& a, const Common& common) {
    if (a.model.empty() == a.collection.empty()) {
        fail(ErrorCode::InvalidArgument, "give exactly one of --model or --collection-spec");
    }
    Collection c;
    if (!a.model.empty()) {
        c = simulate(load_model(a.model), a.length, common.seed);
    } else {
        c = generate_collection(read_json(a.collection), common.seed, fs::path(a.collection).parent_path());
    }
    if (a.missing_rate > 0.0) {
        Collection masked;
        for (std::size_t i = 0; i < c.order.size(); ++i) {
            masked.add(make_missing(c.at(c.order[i]), a.missing_rate, common.seed + i + 1,
                                    static_cast<std::size_t>(a.holdout)));
        }
        c = std::move(masked);
    }
    write_text(a.out, format_collection_csv(c));
}

struct FillArgs {
    std::string data, out;
};

void run_fill(const FillArgs& a) {
    const Collection raw = read_collection(a.data);
    Collection filled;
    for (const auto& id : raw.order) filled.add(fill_in(raw.at(id)));
    write_text(a.out, format_collection_csv(filled));
}

int report(const Common& common, std::string_view code, const std::string& message) {
    if (common.json_errors) {
        std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
    } else {
        std::cerr << "sarma: " << message << '\n';
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic ARMA models: fit, forecast, structure search and evaluation"};
    app.require_subcommand(1);
    Common common;
    app.add_flag("--json-errors", common.json_errors, "Write errors to stderr as JSON");
    auto* seed_opt = app.add_option("--seed", common.seed, "Random seed");

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "Fit a model to one series with EM");
    fit->add_option("--data", fa.data, "Collection CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--series", fa.series, "Series id (optional for single-series files)");
    fit->add_option("--p", fa.p, "AR order")->check(CLI::NonNegativeNumber);
    fit->add_option("--q", fa.q, "MA order")->check(CLI::NonNegativeNumber);
    fit->add_option("--d", fa.d, "Differencing order")->check(CLI::NonNegativeNumber);
    fit->add_option("--beta0", fa.beta0, "fixed or free")->check(CLI::IsMember({"fixed", "free"}));
    fit->add_option("--xp", fa.xp, "Cross predictors as source:lag");
    fit->add_option("--sigma", fa.sigma, "Observation variance");
    fit->add_option("--max-iters", fa.max_iters, "EM iteration cap");
    fit->add_option("--out-model", fa.out_model, "Model JSON to write")->required();
    fit->add_option("--trace", fa.trace, "Log-likelihood trace CSV");

    ForecastArgs fc;
    auto* forecast = app.add_subcommand("forecast", "Multi-step forecasts on the original scale");
    forecast->add_option("--model", fc.model, "Model JSON")->required()->check(CLI::ExistingFile);
    forecast->add_option("--data", fc.data, "Collection CSV with the history")->required()->check(CLI::ExistingFile);
    forecast->add_option("--series", fc.series, "Series id");
    forecast->add_option("--steps", fc.steps, "Forecast horizon");
    forecast->add_option("--out", fc.out, "Output CSV (stdout when omitted)");

    SearchArgs sa;
    auto* search = app.add_subcommand("search", "Greedy structure search");
    search->add_option("--data", sa.data, "Collection CSV (training data)")->required()->check(CLI::ExistingFile);
    search->add_option("--series", sa.series, "Target series id");
    search->add_option("--xp-candidates", sa.xp_candidates, "Candidate cross-predictor lags; enables the cross search")
        ->delimiter(',');
    search->add_option("--max-lag", sa.max_lag, "Cap on p, q and cross lags");
    search->add_option("--d", sa.d, "Differencing order")->check(CLI::NonNegativeNumber);
    search->add_option("--beta0", sa.beta0, "fixed or free")->check(CLI::IsMember({"fixed", "free"}));
    search->add_option("--sigma", sa.sigma, "Observation variance");
    search->add_option("--max-iters", sa.max_iters, "EM iteration cap per candidate");
    search->add_option("--out-model", sa.out_model, "Model JSON to write")->required();
    search->add_option("--log", sa.log, "Search log CSV (default: next to the model)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Run an experiment spec");
    eval->add_option("--spec", ea.spec, "Experiment spec JSON")->required()->check(CLI::ExistingFile);
    eval->add_option("--out", ea.out, "Report (.json or .csv; stdout JSON when omitted)");

    SimulateArgs si;
    auto* sim = app.add_subcommand("simulate", "Draw a collection from a model or a generator spec");
    sim->add_option("--model", si.model, "Model JSON");
    sim->add_option("--collection-spec", si.collection, "Collection generator JSON");
    sim->add_option("--length", si.length, "Series length for --model");
    sim->add_option("--missing-rate", si.missing_rate, "Fraction of entries to hide");
    sim->add_option("--holdout", si.holdout, "Trailing positions kept observed");
    sim->add_option("--out", si.out, "Output CSV (stdout when omitted)");

    FillArgs fl;
    auto* fill = app.add_subcommand("fill", "Linear interpolation of missing entries");
    fill->add_option("--data", fl.data, "Collection CSV")->required()->check(CLI::ExistingFile);
    fill->add_option("--out", fl.out, "Output CSV (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        return report(common, "UsageError", e.what());
    }

    try {
        if (fit->parsed()) run_fit(fa);
        if (forecast->parsed()) run_forecast(fc);
        if (search->parsed()) run_search(sa);
        if (eval->parsed()) run_eval(ea, common, seed_opt->count() > 0);
        if (sim->parsed()) run_simulate(si, common);
        if (fill->parsed()) run_fill(fl);
    } catch (const Error& e) {
        return report(common, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
        return report(common, "InternalError", e.what());
    }
    return 0;
}

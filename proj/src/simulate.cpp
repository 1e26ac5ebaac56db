#include "sarma/simulate.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "sarma/errors.hpp"

namespace sarma {

std::vector<std::string> topological_order(const MultiModel& model) {
    // Only lag-0 references constrain the order within a time step.
    std::map<std::string, std::set<std::string>> deps;
    for (const auto& id : model.order) {
        auto& d = deps[id];
        for (const auto& xp : model.at(id).structure.cross_predictors) {
            if (xp.lag == 0 && model.per_series.contains(xp.source)) d.insert(xp.source);
        }
    }
    std::vector<std::string> out;
    std::set<std::string> done;
    while (out.size() < model.order.size()) {
        bool progressed = false;
        for (const auto& id : model.order) {
            if (done.contains(id)) continue;
            bool ready = true;
            for (const auto& dep : deps[id]) ready &= done.contains(dep);
            if (ready) {
                out.push_back(id);
                done.insert(id);
                progressed = true;
            }
        }
        if (!progressed) {
            fail(ErrorCode::CyclicCrossPredictors, "lag-0 cross predictors form a cycle");
        }
    }
    return out;
}

Collection simulate(const MultiModel& model, int T, std::uint64_t seed) {
    return simulate(model, T, seed, [](const std::string&, int) { return 1.0; });
}

Collection simulate(const MultiModel& model, int T, std::uint64_t seed,
                    const std::function<double(const std::string&, int)>& noise_scale) {
    for (const auto& [id, m] : model.per_series) {
        m.structure.validate(id);
        if (static_cast<int>(m.params.beta.size()) != m.structure.q ||
            static_cast<int>(m.params.alpha.size()) != m.structure.p ||
            m.params.eta.size() != m.structure.cross_predictors.size()) {
            fail(ErrorCode::SchemaError, "parameter lengths do not match structure for '" + id + "'");
        }
        if (m.params.gamma < 0.0 || m.params.sigma < 0.0) {
            fail(ErrorCode::SchemaError, "variances must be nonnegative for '" + id + "'");
        }
        for (const auto& xp : m.structure.cross_predictors) {
            if (!model.per_series.contains(xp.source)) {
                fail(ErrorCode::SchemaError, "series '" + id + "' references unknown source '" + xp.source + "'");
            }
        }
        if (T <= m.structure.horizon()) {
            fail(ErrorCode::TooShort, "simulation length must exceed max(p, q) for '" + id + "'");
        }
    }
    const auto order = topological_order(model);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::map<std::string, std::vector<double>> y, e;
    for (const auto& id : order) {
        y[id].assign(T, 0.0);
        e[id].assign(T, 0.0);
    }
    for (int t = 0; t < T; ++t) {
        for (const auto& id : order) {
            const auto& m = model.at(id);
            const auto& par = m.params;
            auto& ys = y[id];
            auto& es = e[id];
            es[t] = normal(rng) * std::sqrt(par.gamma) * noise_scale(id, t);
            double mu = par.zeta + par.beta0 * es[t];
            for (int j = 1; j <= m.structure.q; ++j) {
                if (t - j >= 0) mu += par.beta[j - 1] * es[t - j];
            }
            for (int i = 1; i <= m.structure.p; ++i) {
                if (t - i >= 0) mu += par.alpha[i - 1] * ys[t - i];
            }
            for (std::size_t k = 0; k < m.structure.cross_predictors.size(); ++k) {
                const auto& xp = m.structure.cross_predictors[k];
                if (t - xp.lag >= 0) mu += par.eta[k] * y[xp.source][t - xp.lag];
            }
            ys[t] = mu + normal(rng) * std::sqrt(par.sigma);
        }
    }

    Collection out;
    for (const auto& id : model.order) {
        TimeSeries s;
        s.id = id;
        s.values.assign(y[id].begin(), y[id].end());
        out.add(std::move(s));
    }
    return out;
}

}  // namespace sarma

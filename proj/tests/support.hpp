#ifndef SARMA_TESTS_SUPPORT_HPP
#define SARMA_TESTS_SUPPORT_HPP

#include <cmath>
#include <algorithm>
#include <random>

#include <Eigen/Dense>

#include "sarma/data.hpp"
#include "sarma/model.hpp"
#include "sarma/simulate.hpp"

namespace sarma::testing {

struct Instance {
    ModelStructure structure;
    Parameters params;
    Values values;
    Eigen::MatrixXd cross;
};

inline double relative_gap(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double relative_gap(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.size() == 0 && b.size() == 0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff() / std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
}

/// Random model and data: p, q <= max_order, up to `max_cross` cross columns,
/// T - R in [1, max_cliques], missing fraction up to `max_missing` (never in
/// the first R positions).
inline Instance random_instance(std::mt19937_64& rng, int max_order = 3, int max_cliques = 30,
                                double max_missing = 0.6, int max_cross = 2,
                                std::optional<Beta0Mode> mode = std::nullopt) {
    std::uniform_int_distribution<int> order(0, max_order);
    std::uniform_int_distribution<int> cliques(1, max_cliques);
    std::uniform_int_distribution<int> ncross(0, max_cross);
    std::uniform_real_distribution<double> coef(-0.6, 0.6);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    Instance in;
    auto& s = in.structure;
    s.p = order(rng);
    s.q = order(rng);
    s.beta0_mode = mode ? *mode : (unit(rng) < 0.5 ? Beta0Mode::FixedOne : Beta0Mode::Free);
    const int k = ncross(rng);
    for (int c = 0; c < k; ++c) s.cross_predictors.push_back({"x" + std::to_string(c), 1});

    auto& par = in.params;
    par.zeta = coef(rng);
    par.beta0 = s.beta0_mode == Beta0Mode::Free ? 0.5 + unit(rng) : 1.0;
    for (int j = 0; j < s.q; ++j) par.beta.push_back(coef(rng));
    for (int i = 0; i < s.p; ++i) par.alpha.push_back(coef(rng) / std::max(1, s.p));
    for (int c = 0; c < k; ++c) par.eta.push_back(coef(rng));
    par.gamma = 0.3 + 1.5 * unit(rng);
    par.sigma = std::pow(10.0, -3.0 + 2.5 * unit(rng));

    const int R = s.horizon();
    const int T = R + cliques(rng);
    const double missing = max_missing * unit(rng);
    in.cross = Eigen::MatrixXd(T, k);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < k; ++c) in.cross(t, c) = normal(rng);
    }
    // Data drawn from the model itself so magnitudes stay realistic.
    std::vector<double> y(T, 0.0), e(T, 0.0);
    for (int t = 0; t < T; ++t) {
        e[t] = std::sqrt(par.gamma) * normal(rng);
        double mu = par.zeta + par.beta0 * e[t];
        for (int j = 1; j <= s.q; ++j) mu += t - j >= 0 ? par.beta[j - 1] * e[t - j] : 0.0;
        for (int i = 1; i <= s.p; ++i) mu += t - i >= 0 ? par.alpha[i - 1] * y[t - i] : 0.0;
        for (int c = 0; c < k; ++c) mu += par.eta[c] * in.cross(t, c);
        y[t] = mu + std::sqrt(par.sigma) * normal(rng);
    }
    in.values.assign(y.begin(), y.end());
    for (int t = R; t < T; ++t) {
        if (unit(rng) < missing) in.values[t].reset();
    }
    return in;
}

inline TimeSeries make_series(std::string id, const std::vector<double>& v) {
    TimeSeries s;
    s.id = std::move(id);
    s.values.assign(v.begin(), v.end());
    return s;
}

inline MultiModel single_model(const ModelStructure& s, const Parameters& p, const std::string& id = "y") {
    MultiModel m;
    m.add(id, SeriesModel{s, p, std::nullopt, false});
    return m;
}

inline std::vector<double> observed(const TimeSeries& s) {
    std::vector<double> out;
    for (const auto& v : s.values) out.push_back(v.value_or(std::nan("")));
    return out;
}

}  // namespace sarma::testing

#endif  // SARMA_TESTS_SUPPORT_HPP

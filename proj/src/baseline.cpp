#include "sarma/baseline.hpp"

#include "sarma/errors.hpp"

namespace sarma {

namespace {

std::vector<double> complete_values(const Values& series) {
    std::vector<double> y;
    y.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (!series[t]) fail(ErrorCode::MissingData, "ARMA needs complete data; position " + std::to_string(t) + " is missing");
        y.push_back(*series[t]);
    }
    return y;
}

double mean_without_error(const ModelStructure& s, const Parameters& par, std::span<const double> y,
                          std::span<const double> e, const Eigen::MatrixXd& cross, int t) {
    double mu = par.zeta;
    for (int j = 1; j <= s.q; ++j) {
        if (t - j >= 0) mu += par.beta[j - 1] * e[t - j];
    }
    for (int i = 1; i <= s.p; ++i) {
        if (t - i >= 0) mu += par.alpha[i - 1] * y[t - i];
    }
    for (int k = 0; k < s.cross_count(); ++k) mu += par.eta[k] * cross(t, k);
    return mu;
}

}  // namespace

std::vector<double> arma_errors(const ModelStructure& s, const Parameters& par, const Values& series,
                                const Eigen::MatrixXd& cross) {
    par.validate(s);
    const std::vector<double> y = complete_values(series);
    const int T = static_cast<int>(y.size());
    const int R = s.horizon();
    if (T < R) fail(ErrorCode::TooShort, "series shorter than the conditioning horizon");
    std::vector<double> e(T, 0.0);
    for (int t = R; t < T; ++t) e[t] = (y[t] - mean_without_error(s, par, y, e, cross, t)) / par.beta0;
    return e;
}

double arma_forecast_at(const ModelStructure& s, const Parameters& par, std::span<const double> y,
                        std::span<const double> errors, const Eigen::MatrixXd& cross, int t) {
    return mean_without_error(s, par, y, errors, cross, t);
}

std::vector<double> arma_reconstruct(const ModelStructure& s, const Parameters& par,
                                     std::span<const double> initial, std::span<const double> errors,
                                     const Eigen::MatrixXd& cross) {
    const int R = s.horizon();
    const int T = static_cast<int>(errors.size());
    if (static_cast<int>(initial.size()) < R) fail(ErrorCode::InvalidArgument, "need R initial values");
    std::vector<double> y(T, 0.0);
    for (int t = 0; t < std::min(R, T); ++t) y[t] = initial[t];
    for (int t = R; t < T; ++t) y[t] = mean_without_error(s, par, y, errors, cross, t) + par.beta0 * errors[t];
    return y;
}

Moments arma_one_step(const ModelStructure& s, const Parameters& par, const Values& history,
                      const Eigen::MatrixXd& cross_history, std::span<const double> cross_next) {
    if (static_cast<int>(history.size()) < s.horizon()) {
        fail(ErrorCode::ShortHistory, "history shorter than the conditioning horizon");
    }
    if (static_cast<int>(cross_next.size()) != s.cross_count()) {
        fail(ErrorCode::InvalidArgument, "cross row does not match the structure");
    }
    std::vector<double> e = arma_errors(s, par, history, cross_history);
    std::vector<double> y = complete_values(history);
    const int T = static_cast<int>(y.size());
    e.push_back(0.0);
    y.push_back(0.0);
    Eigen::MatrixXd cross(T + 1, s.cross_count());
    if (s.cross_count() > 0) {
        cross.topRows(T) = cross_history.topRows(T);
        for (int k = 0; k < s.cross_count(); ++k) cross(T, k) = cross_next[k];
    }
    return {mean_without_error(s, par, y, e, cross, T), par.beta0 * par.beta0 * par.gamma};
}

}  // namespace sarma

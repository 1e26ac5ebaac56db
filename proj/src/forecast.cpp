#include "sarma/forecast.hpp"

#include <cmath>
#include <numbers>

#include "sarma/errors.hpp"

namespace sarma {

namespace {

FilteredState history_state(const ModelStructure& s, const Parameters& params, const Values& history,
                            const Eigen::MatrixXd& cross_history) {
    const int R = s.horizon();
    if (static_cast<int>(history.size()) < R) {
        fail(ErrorCode::ShortHistory, "history of length " + std::to_string(history.size()) +
                                          " is shorter than R = " + std::to_string(R));
    }
    TimeSeries h{"", history, std::nullopt, 0};
    bool gap = false;
    for (int t = 0; t < R; ++t) gap |= !history[t].has_value();
    if (gap) h = fill_initial_segment(h, static_cast<std::size_t>(R));
    Eigen::MatrixXd cross = cross_history;
    if (s.cross_count() == 0) cross.resize(static_cast<Eigen::Index>(history.size()), 0);
    return filter_to_end(build_history_chain(s, params, h.values, cross));
}

void check_cross_row(const ModelStructure& s, const CrossRow& row) {
    if (static_cast<int>(row.size()) != s.cross_count()) {
        fail(ErrorCode::InvalidArgument, "cross row has " + std::to_string(row.size()) +
                                             " entries, structure has " +
                                             std::to_string(s.cross_count()) + " predictors");
    }
}

/// Known offset and extra variance of the next Y given one cross row.
std::pair<double, double> step_offset(const ModelStructure& s, const Parameters& params, const CrossRow* row) {
    double offset = params.zeta;
    double extra = 0.0;
    for (int k = 0; k < s.cross_count(); ++k) {
        const std::optional<double> v = row ? (*row)[k] : std::nullopt;
        if (v && std::isfinite(*v)) {
            offset += params.eta[k] * *v;
        } else {
            extra += params.eta[k] * params.eta[k];  // N(0, 1) on the standardized scale
        }
    }
    return {offset, extra};
}

}  // namespace

double normal_log_density(double x, double mean, double variance) {
    const double r = x - mean;
    return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + r * r / variance);
}

Moments one_step_closed_form(const ModelStructure& s, const Parameters& params, const Values& history,
                             const Eigen::MatrixXd& cross_history, const CrossRow& cross_next) {
    check_cross_row(s, cross_next);
    const int T = static_cast<int>(history.size());
    for (int i = 1; i <= s.p; ++i) {
        if (T - i < 0 || !history[T - i]) {
            fail(ErrorCode::InvalidArgument, "closed form needs the last p observations");
        }
    }
    for (const auto& c : cross_next) {
        if (!c) fail(ErrorCode::InvalidArgument, "closed form needs every cross value");
    }
    const FilteredState st = history_state(s, params, history, cross_history);
    const CliqueLayout lay{s.p, s.q};

    // E_{T-1..T-q} sit at error lags 0..q-1 of the clique ending at T-1.
    Eigen::VectorXd beta = Eigen::Map<const Eigen::VectorXd>(params.beta.data(), s.q);
    Eigen::VectorXd e_mean(s.q);
    Eigen::MatrixXd e_cov(s.q, s.q);
    for (int a = 0; a < s.q; ++a) {
        e_mean(a) = st.mean(lay.error(a));
        for (int b = 0; b < s.q; ++b) e_cov(a, b) = st.cov(lay.error(a), lay.error(b));
    }
    double mu = params.zeta + beta.dot(e_mean);
    for (int i = 1; i <= s.p; ++i) mu += params.alpha[i - 1] * *history[T - i];
    for (int k = 0; k < s.cross_count(); ++k) mu += params.eta[k] * *cross_next[k];
    const double var = params.sigma + beta.dot(e_cov * beta) + params.beta0 * params.beta0 * params.gamma;
    return {mu, var};
}

Moments one_step_extended(const ModelStructure& s, const Parameters& params, const Values& history,
                          const Eigen::MatrixXd& cross_history, const CrossRow& cross_next) {
    check_cross_row(s, cross_next);
    FilteredState st = history_state(s, params, history, cross_history);
    const CliqueLayout lay{s.p, s.q};
    const auto [offset, extra] = step_offset(s, params, &cross_next);
    advance_clique(lay, params, offset, extra, st.mean, st.cov);
    return {st.mean(lay.obs(0)), st.cov(lay.obs(0), lay.obs(0))};
}

Moments one_step(const ModelStructure& s, const Parameters& params, const Values& history,
                 const Eigen::MatrixXd& cross_history, const CrossRow& cross_next) {
    check_cross_row(s, cross_next);
    const int T = static_cast<int>(history.size());
    bool complete = T >= s.p;
    for (int i = 1; complete && i <= s.p; ++i) complete = history[T - i].has_value();
    for (const auto& c : cross_next) complete &= c.has_value();
    return complete ? one_step_closed_form(s, params, history, cross_history, cross_next)
                    : one_step_extended(s, params, history, cross_history, cross_next);
}

std::vector<Moments> multi_step(const ModelStructure& s, const Parameters& params, const Values& history,
                                const Eigen::MatrixXd& cross_history, const std::vector<CrossRow>& cross_future,
                                int h) {
    if (h < 1) fail(ErrorCode::InvalidArgument, "forecast horizon must be at least 1");
    for (const auto& row : cross_future) check_cross_row(s, row);
    FilteredState st = history_state(s, params, history, cross_history);
    const CliqueLayout lay{s.p, s.q};
    std::vector<Moments> out;
    out.reserve(h);
    for (int k = 0; k < h; ++k) {
        const CrossRow* row = k < static_cast<int>(cross_future.size()) ? &cross_future[k] : nullptr;
        const auto [offset, extra] = step_offset(s, params, row);
        advance_clique(lay, params, offset, extra, st.mean, st.cov);
        out.push_back({st.mean(lay.obs(0)), st.cov(lay.obs(0), lay.obs(0))});
    }
    return out;
}

double predictive_density(const ModelStructure& s, const Parameters& params, const Values& history,
                          const Eigen::MatrixXd& cross_history, const CrossRow& cross_next, double y_actual) {
    const Moments m = one_step(s, params, history, cross_history, cross_next);
    return normal_log_density(y_actual, m.mean, m.variance);
}

}  // namespace sarma

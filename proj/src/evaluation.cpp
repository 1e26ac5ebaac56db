#include "sarma/evaluation.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <unsupported/Eigen/NonLinearOptimization>

#include "sarma/baseline.hpp"
#include "sarma/errors.hpp"
#include "sarma/forecast.hpp"
#include "sarma/inference.hpp"

namespace sarma {

namespace {

void check_holdout(const Values& series, std::size_t holdout_start, int R) {
    if (holdout_start >= series.size()) fail(ErrorCode::EmptyHoldout, "holdout is empty");
    if (static_cast<int>(holdout_start) < R) {
        fail(ErrorCode::ShortHistory, "holdout starts inside the conditioning horizon");
    }
    bool any = false;
    for (std::size_t t = holdout_start; t < series.size(); ++t) any |= series[t].has_value();
    if (!any) fail(ErrorCode::EmptyHoldout, "holdout has no observed value");
}

}  // namespace

double sequential_predictive_score(const ModelStructure& s, const Parameters& params, const Values& series_full,
                                   const Eigen::MatrixXd& cross_full, std::size_t holdout_start) {
    const int R = s.horizon();
    check_holdout(series_full, holdout_start, R);
    // The forward filter's log predictive density at t conditions on every
    // value before t, which is exactly the rolling one-step forecast.
    TimeSeries h{"", series_full, std::nullopt, 0};
    h = fill_initial_segment(h, static_cast<std::size_t>(R));
    Eigen::MatrixXd cross = cross_full;
    if (s.cross_count() == 0) cross.resize(static_cast<Eigen::Index>(series_full.size()), 0);
    const CliqueChain chain = build_chain(s, params, h.values, cross);
    const std::vector<double> ld = predictive_log_densities(chain);
    double total = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < chain.cliques.size(); ++i) {
        const int t = chain.cliques[i].time;
        if (t < static_cast<int>(holdout_start) || !series_full[t]) continue;
        total += ld[i];
        ++n;
    }
    return total / n;
}

double binomial_upper_tail(int n, int k) {
    if (n < 0) fail(ErrorCode::InvalidArgument, "binomial n must be nonnegative");
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    const double log_half_n = n * std::log(0.5);
    double total = 0.0;
    for (int i = k; i <= n; ++i) {
        total += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + log_half_n);
    }
    return std::min(total, 1.0);
}

SignTestResult sign_test(std::span<const double> a, std::span<const double> b, double alpha) {
    if (a.size() != b.size()) fail(ErrorCode::InvalidArgument, "sign test needs paired scores");
    SignTestResult r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) {
            ++r.wins_a;
        } else if (b[i] > a[i]) {
            ++r.wins_b;
        } else {
            ++r.ties;
        }
    }
    const int n = r.wins_a + r.wins_b;
    if (n == 0) {
        r.all_ties = true;
        r.p_value = std::numeric_limits<double>::quiet_NaN();
        r.significant = false;
        return r;
    }
    r.p_value = binomial_upper_tail(n, r.wins_a);
    r.significant = r.p_value <= alpha;
    return r;
}

namespace {

/// Recursive CSS residuals e_t, t = R..T-1, for theta = (zeta, beta, alpha, eta).
struct CssProblem {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const ModelStructure& s;
    const std::vector<double>& y;
    const Eigen::MatrixXd& cross;
    int R;
    int T;

    int inputs() const { return 1 + s.q + s.p + s.cross_count(); }
    int values() const { return T - R; }

    Parameters unpack(const Eigen::VectorXd& th) const {
        Parameters p;
        p.zeta = th(0);
        p.beta0 = 1.0;
        for (int j = 0; j < s.q; ++j) p.beta.push_back(th(1 + j));
        for (int i = 0; i < s.p; ++i) p.alpha.push_back(th(1 + s.q + i));
        for (int c = 0; c < s.cross_count(); ++c) p.eta.push_back(th(1 + s.q + s.p + c));
        return p;
    }

    /// Residuals over the full series (zeros before R) and, when `jac` is
    /// set, their derivatives g_t = -(x_t + sum_j beta_j g_{t-j}).
    void run(const Eigen::VectorXd& th, std::vector<double>& e, Eigen::MatrixXd* jac) const {
        const int n = inputs();
        e.assign(T, 0.0);
        Eigen::MatrixXd g;
        if (jac) g = Eigen::MatrixXd::Zero(T, n);
        for (int t = R; t < T; ++t) {
            double mu = th(0);
            for (int j = 1; j <= s.q; ++j) mu += th(j) * e[t - j];
            for (int i = 1; i <= s.p; ++i) mu += th(s.q + i) * y[t - i];
            for (int c = 0; c < s.cross_count(); ++c) mu += th(1 + s.q + s.p + c) * cross(t, c);
            e[t] = y[t] - mu;
            if (!jac) continue;
            Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(n);
            x(0) = 1.0;
            for (int j = 1; j <= s.q; ++j) x(j) = e[t - j];
            for (int i = 1; i <= s.p; ++i) x(s.q + i) = y[t - i];
            for (int c = 0; c < s.cross_count(); ++c) x(1 + s.q + s.p + c) = cross(t, c);
            Eigen::RowVectorXd gt = -x;
            for (int j = 1; j <= s.q; ++j) gt -= th(j) * g.row(t - j);
            g.row(t) = gt;
        }
        if (jac) *jac = g.bottomRows(T - R);
    }

    int operator()(const Eigen::VectorXd& th, Eigen::VectorXd& fvec) const {
        std::vector<double> e;
        run(th, e, nullptr);
        fvec = Eigen::Map<const Eigen::VectorXd>(e.data() + R, T - R);
        if (!fvec.allFinite()) fvec.setConstant(1e150);
        return 0;
    }

    int df(const Eigen::VectorXd& th, Eigen::MatrixXd& fjac) const {
        std::vector<double> e;
        run(th, e, &fjac);
        if (!fjac.allFinite()) fjac.setZero();
        return 0;
    }

    double sse(const Eigen::VectorXd& th) const {
        Eigen::VectorXd f;
        (*this)(th, f);
        return f.squaredNorm();
    }
};

/// Least squares of y_t on (1, y_{t-1..t-p}, c_t) with the MA part at zero.
Eigen::VectorXd ols_start(const CssProblem& prob) {
    const auto& s = prob.s;
    const int n = prob.inputs();
    const int m = prob.values();
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd Y(m);
    for (int t = prob.R; t < prob.T; ++t) {
        const int row = t - prob.R;
        X(row, 0) = 1.0;
        for (int i = 1; i <= s.p; ++i) X(row, s.q + i) = prob.y[t - i];
        for (int c = 0; c < s.cross_count(); ++c) X(row, 1 + s.q + s.p + c) = prob.cross(t, c);
        Y(row) = prob.y[t];
    }
    // Columns of the MA part are zero; the orthogonal decomposition returns
    // the minimum-norm solution, which keeps them at zero.
    return X.completeOrthogonalDecomposition().solve(Y);
}

}  // namespace

ClassicArmaFit fit_classic_arma(const ModelStructure& structure, const Values& series, const Eigen::MatrixXd& cross,
                                std::uint64_t seed, int max_evaluations) {
    structure.validate();
    std::vector<double> y;
    y.reserve(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        if (!series[t]) fail(ErrorCode::MissingData, "ARMA baseline needs complete data; position " + std::to_string(t) + " is missing");
        y.push_back(*series[t]);
    }
    ModelStructure s = structure;
    s.beta0_mode = Beta0Mode::FixedOne;
    Eigen::MatrixXd cr = cross;
    if (s.cross_count() == 0) cr.resize(static_cast<Eigen::Index>(y.size()), 0);
    CssProblem prob{s, y, cr, s.horizon(), static_cast<int>(y.size())};
    if (prob.values() < prob.inputs()) {
        fail(ErrorCode::TooShort, "too few residuals (" + std::to_string(prob.values()) + ") for " +
                                      std::to_string(prob.inputs()) + " ARMA coefficients");
    }

    std::vector<Eigen::VectorXd> starts;
    starts.push_back(Eigen::VectorXd::Zero(prob.inputs()));
    const Eigen::VectorXd ols = ols_start(prob);
    starts.push_back(ols);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.3);
    Eigen::VectorXd perturbed = ols;
    for (int j = 1; j <= s.q; ++j) perturbed(j) = normal(rng);
    for (int i = 1; i <= s.p; ++i) perturbed(s.q + i) += 0.1 * normal(rng);
    starts.push_back(perturbed);

    Eigen::VectorXd best;
    double best_sse = std::numeric_limits<double>::infinity();
    bool best_converged = false;
    for (const auto& start : starts) {
        Eigen::VectorXd th = start;
        Eigen::LevenbergMarquardt<CssProblem> lm(prob);
        lm.parameters.maxfev = max_evaluations;
        lm.parameters.ftol = 1e-14;
        lm.parameters.xtol = 1e-12;
        const auto status = lm.minimize(th);
        const double sse = prob.sse(th);
        const bool converged = status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                               status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters;
        if (std::isfinite(sse) && sse < best_sse) {
            best_sse = sse;
            best = th;
            best_converged = converged;
        }
    }
    if (!std::isfinite(best_sse)) fail(ErrorCode::NonConvergence, "no ARMA start produced finite residuals");

    ClassicArmaFit fit;
    fit.params = prob.unpack(best);
    fit.params.gamma = best_sse / prob.values();
    fit.params.sigma = 0.0;
    fit.sse = best_sse;
    fit.converged = best_converged;
    return fit;
}

Moments smoothed_arma_predictive(const ModelStructure& s, const Parameters& arma_params, const Values& history,
                                 const Eigen::MatrixXd& cross_history, std::span<const double> cross_next,
                                 double sigma) {
    Moments m = arma_one_step(s, arma_params, history, cross_history, cross_next);
    m.variance += sigma;
    return m;
}

double arma_sequential_score(const ModelStructure& s, const Parameters& arma_params, const Values& series_full,
                             const Eigen::MatrixXd& cross_full, std::size_t holdout_start, double sigma) {
    check_holdout(series_full, holdout_start, s.horizon());
    Eigen::MatrixXd cross = cross_full;
    if (s.cross_count() == 0) cross.resize(static_cast<Eigen::Index>(series_full.size()), 0);
    // Forecasting y_t only uses errors before t, so one error pass serves
    // every holdout position.
    const std::vector<double> e = arma_errors(s, arma_params, series_full, cross);
    std::vector<double> y;
    for (const auto& v : series_full) y.push_back(*v);
    const double var = arma_params.beta0 * arma_params.beta0 * arma_params.gamma + sigma;
    double total = 0.0;
    int n = 0;
    for (std::size_t t = holdout_start; t < y.size(); ++t) {
        const double mu = arma_forecast_at(s, arma_params, y, e, cross, static_cast<int>(t));
        total += normal_log_density(y[t], mu, var);
        ++n;
    }
    return total / n;
}

}  // namespace sarma

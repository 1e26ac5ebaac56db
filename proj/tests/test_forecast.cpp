#include <doctest.h>

#include <numbers>
#include <random>

#include "sarma/dense_oracle.hpp"
#include "sarma/errors.hpp"
#include "sarma/forecast.hpp"
#include "support.hpp"

using namespace sarma;
using sarma::testing::random_instance;

namespace {

CrossRow row_of(const Eigen::MatrixXd& cross, int t) {
    CrossRow r;
    for (int c = 0; c < cross.cols(); ++c) r.push_back(cross(t, c));
    return r;
}

/// Marginal of Y at `time` from the dense oracle's last-clique marginal.
Moments dense_y(const DenseResult& d, int time) {
    const int i = d.last.index_of({VarLabel::Kind::Observation, time});
    REQUIRE(i >= 0);
    return {d.last.mean(i), d.last.cov(i, i)};
}

}  // namespace

TEST_CASE("white-noise model predicts N(zeta, sigma + gamma)") {
    ModelStructure s;
    Parameters p;
    p.zeta = 0.7;
    p.gamma = 1.3;
    p.sigma = 0.01;
    const Moments m = one_step(s, p, Values{0.1, 2.0}, Eigen::MatrixXd(2, 0), {});
    CHECK(m.mean == doctest::Approx(0.7));
    CHECK(m.variance == doctest::Approx(1.31));
}

TEST_CASE("q = 1 with a known error variance") {
    // History of length R: E_0 keeps its N(0, gamma) prior, so Sigma = gamma.
    ModelStructure s;
    s.q = 1;
    Parameters p;
    p.beta = {0.4};
    p.gamma = 2.0;
    p.sigma = 0.01;
    const Moments m = one_step(s, p, Values{1.0}, Eigen::MatrixXd(1, 0), {});
    CHECK(m.variance == doctest::Approx(0.01 + 0.16 * 2.0 + 2.0));
}

TEST_CASE("closed form and clique extension agree on complete tails") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 50; ++rep) {
        auto in = random_instance(rng, 3, 30, 0.5);
        const int T = static_cast<int>(in.values.size());
        // Make the last p values observed.
        for (int i = 1; i <= in.structure.p; ++i) {
            if (!in.values[T - i]) in.values[T - i] = 0.3 * i;
        }
        const CrossRow next = row_of(in.cross, T - 1);
        const Moments a = one_step_closed_form(in.structure, in.params, in.values, in.cross, next);
        const Moments b = one_step_extended(in.structure, in.params, in.values, in.cross, next);
        CHECK(sarma::testing::relative_gap(a.mean, b.mean) < 1e-10);
        CHECK(sarma::testing::relative_gap(a.variance, b.variance) < 1e-10);
        const double floor = in.structure.beta0_mode == Beta0Mode::FixedOne
                                 ? in.params.sigma + in.params.gamma
                                 : in.params.sigma;
        CHECK(a.variance >= floor * (1.0 - 1e-12));
    }
}

TEST_CASE("multi-step forecasts match the dense oracle") {
    std::mt19937_64 rng(8);
    int checked = 0;
    while (checked < 40) {
        auto in = random_instance(rng, 3, 25, 0.5);
        if (in.structure.p == 0) continue;
        ++checked;
        const int T = static_cast<int>(in.values.size());
        const int h = 3;
        Eigen::MatrixXd cross_ext(T + h, in.cross.cols());
        std::vector<CrossRow> future;
        std::normal_distribution<double> n;
        for (int t = 0; t < T + h; ++t) {
            for (int c = 0; c < in.cross.cols(); ++c) cross_ext(t, c) = t < T ? in.cross(t, c) : n(rng);
        }
        for (int k = 0; k < h; ++k) future.push_back(row_of(cross_ext, T + k));
        const auto fc = multi_step(in.structure, in.params, in.values, in.cross, future, h);
        REQUIRE(fc.size() == static_cast<std::size_t>(h));
        for (int k = 1; k <= h; ++k) {
            Values ext = in.values;
            ext.resize(T + k);
            const DenseResult d = dense_oracle(in.structure, in.params, ext, cross_ext.topRows(T + k));
            const Moments o = dense_y(d, T + k - 1);
            CHECK(sarma::testing::relative_gap(fc[k - 1].mean, o.mean) < 1e-8);
            CHECK(sarma::testing::relative_gap(fc[k - 1].variance, o.variance) < 1e-8);
        }
        const Moments one = one_step(in.structure, in.params, in.values, in.cross, future[0]);
        CHECK(one.mean == doctest::Approx(fc[0].mean).epsilon(1e-12));
        CHECK(one.variance == doctest::Approx(fc[0].variance).epsilon(1e-12));
    }
}

TEST_CASE("AR(1) multi-step by hand") {
    ModelStructure s;
    s.p = 1;
    Parameters p;
    p.alpha = {0.7};
    p.gamma = 0.8;
    p.sigma = 0.01;
    const Values y{0.3, -0.4, 1.5};
    const auto fc = multi_step(s, p, y, Eigen::MatrixXd(3, 0), {}, 5);
    double var = 0.0;
    for (int k = 1; k <= 5; ++k) {
        var += (p.sigma + p.gamma) * std::pow(0.7, 2 * (k - 1));
        CHECK(fc[k - 1].mean == doctest::Approx(std::pow(0.7, k) * 1.5));
        CHECK(fc[k - 1].variance == doctest::Approx(var));
    }
}

TEST_CASE("multi-step variance grows for stationary models") {
    // With alpha * beta >= 0 and y_T observed, step k adds psi_k^2 gamma with
    // psi_k = alpha^(k-1) (alpha + beta), which covers the decay of the
    // alpha^(k-1) beta E_T uncertainty (posterior variance <= gamma).
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 0.9);
    for (int rep = 0; rep < 40; ++rep) {
        ModelStructure s;
        s.p = 1;
        s.q = rep % 2;
        Parameters p;
        const double sign = rep % 4 < 2 ? 1.0 : -1.0;
        p.alpha = {sign * u(rng)};
        p.beta.assign(s.q, sign * u(rng));
        p.gamma = 0.5;
        const Values y{0.2, 0.1, std::nullopt, 0.4, -1.0};
        const auto fc = multi_step(s, p, y, Eigen::MatrixXd(5, 0), {}, 8);
        for (int k = 1; k < 8; ++k) CHECK(fc[k].variance >= fc[k - 1].variance - 1e-12);
    }
}

TEST_CASE("unobserved cross values get unit-variance marginals") {
    ModelStructure s;
    s.p = 1;
    s.cross_predictors = {{"x", 1}};
    Parameters p;
    p.alpha = {0.5};
    p.eta = {0.6};
    Eigen::MatrixXd cross(3, 1);
    cross << 0.1, -0.2, 0.3;
    const Values y{1.0, 0.5, 0.25};
    const Moments known = one_step(s, p, y, cross, {0.0});
    const Moments unknown = one_step(s, p, y, cross, {std::nullopt});
    CHECK(unknown.mean == doctest::Approx(known.mean));
    CHECK(unknown.variance == doctest::Approx(known.variance + 0.36));
}

TEST_CASE("predictive density") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const auto in = random_instance(rng, 2, 20, 0.3);
        const int T = static_cast<int>(in.values.size());
        const CrossRow next = row_of(in.cross, T - 1);
        const Moments m = one_step(in.structure, in.params, in.values, in.cross, next);
        const double at_mean = predictive_density(in.structure, in.params, in.values, in.cross, next, m.mean);
        CHECK(at_mean == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * m.variance)));
        CHECK(predictive_density(in.structure, in.params, in.values, in.cross, next, m.mean + 0.7) ==
              doctest::Approx(predictive_density(in.structure, in.params, in.values, in.cross, next, m.mean - 0.7)));

        // Conditional density from two dense-oracle likelihoods.
        Values ext = in.values;
        ext.push_back(0.42);
        Eigen::MatrixXd cross_ext(T + 1, in.cross.cols());
        cross_ext.topRows(T) = in.cross;
        if (in.cross.cols() > 0) cross_ext.row(T) = in.cross.row(T - 1);
        const double joint = dense_oracle(in.structure, in.params, ext, cross_ext).loglik;
        const double past = dense_oracle(in.structure, in.params, in.values, in.cross).loglik;
        CHECK(predictive_density(in.structure, in.params, in.values, in.cross, next, 0.42) ==
              doctest::Approx(joint - past).epsilon(1e-9));
    }
}

TEST_CASE("forecast errors") {
    ModelStructure s;
    s.p = 3;
    Parameters p;
    p.alpha = {0.1, 0.1, 0.1};
    try {
        one_step(s, p, Values{1.0, 2.0}, Eigen::MatrixXd(2, 0), {});
        FAIL("expected ShortHistory");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ShortHistory);
    }
    CHECK_THROWS_AS(multi_step(s, p, Values{1.0, 2.0, 3.0}, Eigen::MatrixXd(3, 0), {}, 0), Error);
}

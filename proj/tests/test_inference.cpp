#include <doctest.h>

#include <random>

#include "sarma/dense_oracle.hpp"
#include "sarma/errors.hpp"
#include "sarma/inference.hpp"
#include "support.hpp"

using namespace sarma;
using sarma::testing::random_instance;
using sarma::testing::relative_gap;

namespace {

double stats_gap(const SuffStats& a, const SuffStats& b) {
    double g = 0.0;
    g = std::max(g, relative_gap(a.count, b.count));
    g = std::max(g, relative_gap(a.sum_e, b.sum_e));
    g = std::max(g, relative_gap(a.sum_ee, b.sum_ee));
    g = std::max(g, relative_gap(a.sum_y, b.sum_y));
    g = std::max(g, relative_gap(a.sum_yy, b.sum_yy));
    g = std::max(g, relative_gap(a.sum_ye, b.sum_ye));
    g = std::max(g, relative_gap(a.sum_x, b.sum_x));
    g = std::max(g, relative_gap(a.sum_yx, b.sum_yx));
    g = std::max(g, relative_gap(a.sum_xe, b.sum_xe));
    g = std::max(g, relative_gap(a.sum_xx, b.sum_xx));
    g = std::max(g, relative_gap(a.init_count, b.init_count));
    g = std::max(g, relative_gap(a.init_sum_ee, b.init_sum_ee));
    return g;
}

}  // namespace

TEST_CASE("clique chain agrees with the dense joint Gaussian") {
    std::mt19937_64 rng(20240601);
    for (int rep = 0; rep < 200; ++rep) {
        const auto in = random_instance(rng);
        CAPTURE(rep);
        const CliqueChain chain = build_chain(in.structure, in.params, in.values, in.cross);
        const ChainPosterior post = propagate(chain);
        const DenseResult dense = dense_oracle(in.structure, in.params, in.values, in.cross);

        CHECK(stats_gap(posterior_moments(chain, post), dense.stats) < 1e-8);
        CHECK(relative_gap(post.loglik, dense.loglik) < 1e-8);
        CHECK(relative_gap(log_likelihood(chain), dense.loglik) < 1e-8);

        const Gaussian last = last_clique_marginal(chain, post);
        REQUIRE(last.vars == dense.last.vars);
        CHECK(relative_gap(last.mean, dense.last.mean) < 1e-8);
        CHECK(relative_gap(last.cov, dense.last.cov) < 1e-8);

        // The filtered end state is the smoothed last clique.
        const Gaussian filtered = last_clique_marginal(chain);
        CHECK(relative_gap(filtered.mean, last.mean) < 1e-10);
        CHECK(relative_gap(filtered.cov, last.cov) < 1e-10);
    }
}

TEST_CASE("smoothed clique covariances are positive semidefinite") {
    std::mt19937_64 rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        const auto in = random_instance(rng);
        const CliqueChain chain = build_chain(in.structure, in.params, in.values, in.cross);
        const ChainPosterior post = propagate(chain);
        for (std::size_t s = 0; s < post.cov.size(); ++s) {
            Gaussian g;
            g.vars = chain.cliques[s].vars;
            g.mean = post.mean[s];
            g.cov = post.cov[s];
            CHECK(g.is_psd(1e-9));
        }
    }
}

TEST_CASE("log-likelihood is the sum of the one-step predictive densities") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 30; ++rep) {
        const auto in = random_instance(rng);
        const CliqueChain chain = build_chain(in.structure, in.params, in.values, in.cross);
        double total = 0.0;
        for (const double ld : predictive_log_densities(chain)) {
            if (!std::isnan(ld)) total += ld;
        }
        CHECK(total == doctest::Approx(log_likelihood(chain)).epsilon(1e-12));
    }
}

TEST_CASE("observed Y variables are point masses in the posterior") {
    std::mt19937_64 rng(3);
    const auto in = random_instance(rng, 2, 10, 0.0);
    const CliqueChain chain = build_chain(in.structure, in.params, in.values, in.cross);
    const ChainPosterior post = propagate(chain);
    const int y0 = chain.layout.obs(0);
    for (std::size_t s = 0; s < post.mean.size(); ++s) {
        CHECK(post.mean[s](y0) == *chain.cliques[s].evidence);
        CHECK(post.cov[s](y0, y0) == 0.0);
    }
}

TEST_CASE("p = q = 0 posterior of E_t given y_t") {
    // y = zeta + E + nu: E | y ~ N(gamma (y - zeta) / (gamma + sigma), gamma sigma / (gamma + sigma)).
    ModelStructure s;
    Parameters par;
    par.zeta = 0.5;
    par.gamma = 2.0;
    par.sigma = 0.5;
    const Values y{1.5, std::nullopt};
    const CliqueChain chain = build_chain(s, par, y, Eigen::MatrixXd(2, 0));
    const ChainPosterior post = propagate(chain);
    CHECK(post.mean[0](0) == doctest::Approx(2.0 * 1.0 / 2.5));
    CHECK(post.cov[0](0, 0) == doctest::Approx(2.0 * 0.5 / 2.5));
    CHECK(post.mean[1](0) == doctest::Approx(0.0));
    CHECK(post.cov[1](0, 0) == doctest::Approx(2.0));
    CHECK(post.mean[1](1) == doctest::Approx(0.5));
    CHECK(post.cov[1](1, 1) == doctest::Approx(2.5));
    CHECK(post.loglik == doctest::Approx(-0.5 * (std::log(2.0 * M_PI * 2.5) + 1.0 / 2.5)));
}

TEST_CASE("chain construction errors") {
    ModelStructure s;
    s.p = 2;
    Parameters par;
    par.alpha = {0.1, 0.2};
    CHECK_THROWS_AS(build_chain(s, par, Values{1.0, 2.0}, Eigen::MatrixXd(2, 0)), Error);
    try {
        build_chain(s, par, Values{1.0, std::nullopt, 3.0}, Eigen::MatrixXd(3, 0));
        FAIL("expected MissingConditioning");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingConditioning);
    }
    try {
        build_chain(s, par, Values{1.0, 2.0}, Eigen::MatrixXd(2, 0));
        FAIL("expected ChainTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ChainTooShort);
    }
    // History chains allow T == R and fall back to the pre-sample state.
    const CliqueChain h = build_history_chain(s, par, Values{1.0, 2.0}, Eigen::MatrixXd(2, 0));
    const Gaussian g = last_clique_marginal(h);
    REQUIRE(g.dim() == 2);
    CHECK(g.mean(0) == 2.0);
    CHECK(g.mean(1) == 1.0);
}

TEST_CASE("dense oracle refuses large instances") {
    ModelStructure s;
    Parameters par;
    Values y(kDenseOracleMaxCliques + 1, 0.0);
    try {
        dense_oracle(s, par, y, Eigen::MatrixXd(y.size(), 0));
        FAIL("expected TooLarge");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::TooLarge);
    }
}

TEST_CASE("variable labels") {
    CHECK(VarLabel{VarLabel::Kind::Error, 4}.str() == "E@4");
    CHECK(VarLabel{VarLabel::Kind::Observation, 0}.str() == "Y@0");
}

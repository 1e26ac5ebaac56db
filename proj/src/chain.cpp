#include <cmath>
#include <numbers>

#include "sarma/errors.hpp"
#include "sarma/inference.hpp"

namespace sarma {

std::string VarLabel::str() const {
    return (kind == Kind::Error ? "E@" : "Y@") + std::to_string(time);
}

int Gaussian::index_of(const VarLabel& label) const {
    for (std::size_t i = 0; i < vars.size(); ++i) {
        if (vars[i] == label) return static_cast<int>(i);
    }
    return -1;
}

bool Gaussian::is_psd(double tol) const {
    if (cov.rows() == 0) return true;
    const double scale = std::max(1.0, cov.norm());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > tol * scale) return false;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff() >= -tol * scale;
}

int regressor_count(const ModelStructure& s) {
    return s.q + s.p + s.cross_count() + (s.beta0_mode == Beta0Mode::Free ? 1 : 0);
}

SuffStats empty_stats(const ModelStructure& s) {
    SuffStats st;
    st.mode = s.beta0_mode;
    const int k = regressor_count(s);
    st.sum_x = Eigen::VectorXd::Zero(k);
    st.sum_yx = Eigen::VectorXd::Zero(k);
    st.sum_xe = Eigen::VectorXd::Zero(k);
    st.sum_xx = Eigen::MatrixXd::Zero(k, k);
    return st;
}

namespace {

constexpr double kPivotTolerance = 1e-12;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void symmetrize(Eigen::MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Clique-to-clique map: next = F * current + offset * e_{Y_t} + noise, where
/// noise has covariance `noise` (new error and observation noise).
struct Transition {
    Eigen::MatrixXd F;
    Eigen::MatrixXd noise;
};

Transition make_transition(const CliqueLayout& lay, const Parameters& par, double extra_variance) {
    const int n = lay.dim();
    Transition tr{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
    for (int j = 1; j <= lay.q; ++j) tr.F(lay.error(j), lay.error(j - 1)) = 1.0;
    for (int i = 1; i <= lay.p; ++i) tr.F(lay.obs(i), lay.obs(i - 1)) = 1.0;
    for (int j = 1; j <= lay.q; ++j) tr.F(lay.obs(0), lay.error(j - 1)) += par.beta[j - 1];
    for (int i = 1; i <= lay.p; ++i) tr.F(lay.obs(0), lay.obs(i - 1)) += par.alpha[i - 1];

    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    g(lay.error(0)) = 1.0;
    g(lay.obs(0)) = par.beta0;
    tr.noise = par.gamma * g * g.transpose();
    tr.noise(lay.obs(0), lay.obs(0)) += par.sigma + extra_variance;
    return tr;
}

void apply_transition(const Transition& tr, const CliqueLayout& lay, double offset,
                      Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    Eigen::VectorXd m = tr.F * mean;
    m(lay.obs(0)) += offset;
    Eigen::MatrixXd c = tr.F * cov * tr.F.transpose() + tr.noise;
    symmetrize(c);
    mean = std::move(m);
    cov = std::move(c);
}

std::vector<VarLabel> clique_vars(const CliqueLayout& lay, int t) {
    std::vector<VarLabel> vars(lay.dim());
    for (int j = 0; j <= lay.q; ++j) vars[lay.error(j)] = {VarLabel::Kind::Error, t - j};
    for (int i = 0; i <= lay.p; ++i) vars[lay.obs(i)] = {VarLabel::Kind::Observation, t - i};
    return vars;
}

CliqueChain make_chain(const ModelStructure& structure, const Parameters& params,
                       const Values& observations, const Eigen::MatrixXd& cross, bool allow_empty) {
    structure.validate();
    params.validate(structure);
    const int T = static_cast<int>(observations.size());
    const int R = structure.horizon();
    if (T < R || (!allow_empty && T == R)) {
        fail(ErrorCode::ChainTooShort, "series of length " + std::to_string(T) +
                                           " leaves no cliques after conditioning on R = " +
                                           std::to_string(R) + " values");
    }
    if (cross.cols() != structure.cross_count()) {
        fail(ErrorCode::InvalidArgument, "cross matrix has " + std::to_string(cross.cols()) +
                                             " columns, structure has " +
                                             std::to_string(structure.cross_count()) + " predictors");
    }
    if (structure.cross_count() > 0 && cross.rows() < T) {
        fail(ErrorCode::InvalidArgument, "cross matrix has fewer rows than the series");
    }

    CliqueChain chain;
    chain.structure = structure;
    chain.params = params;
    chain.layout = CliqueLayout{structure.p, structure.q};
    chain.length = T;
    chain.cross = cross;
    for (int t = 0; t < R; ++t) {
        if (!observations[t]) {
            fail(ErrorCode::MissingConditioning,
                 "conditioning value at position " + std::to_string(t) + " is missing; fill it first");
        }
        chain.conditioning.push_back(*observations[t]);
    }
    chain.cliques.reserve(T - R);
    for (int t = R; t < T; ++t) {
        Clique c;
        c.time = t;
        c.vars = clique_vars(chain.layout, t);
        c.offset = params.zeta;
        for (int k = 0; k < structure.cross_count(); ++k) {
            const double v = cross(t, k);
            if (std::isnan(v)) {
                fail(ErrorCode::MissingCrossValues,
                     "cross predictor " + structure.cross_predictors[k].source + ":" +
                         std::to_string(structure.cross_predictors[k].lag) + " missing at position " +
                         std::to_string(t));
            }
            c.offset += params.eta[k] * v;
        }
        c.evidence = observations[t];
        chain.cliques.push_back(std::move(c));
    }
    return chain;
}

/// Predicted (prior to evidence at t) clique moments and the scalar
/// innovation quantities of each step.
struct ForwardPass {
    std::vector<Eigen::VectorXd> pred_mean;
    std::vector<Eigen::MatrixXd> pred_cov;
    std::vector<Eigen::VectorXd> gain;  // P_t Z' / F_t
    std::vector<double> innovation;
    std::vector<double> innovation_var;
    std::vector<double> log_density;  // NaN when unobserved
    Eigen::VectorXd final_mean;
    Eigen::MatrixXd final_cov;
    double loglik = 0.0;
};

ForwardPass run_forward(const CliqueChain& chain, bool keep_history) {
    const auto& lay = chain.layout;
    const int n = lay.dim();
    const int y0 = lay.obs(0);
    const Transition tr = make_transition(lay, chain.params, 0.0);

    FilteredState pre = presample_state(chain);
    Eigen::VectorXd mean = std::move(pre.mean);
    Eigen::MatrixXd cov = std::move(pre.cov);

    ForwardPass fp;
    const std::size_t m = chain.cliques.size();
    fp.log_density.assign(m, std::numeric_limits<double>::quiet_NaN());
    if (keep_history) {
        fp.pred_mean.resize(m);
        fp.pred_cov.resize(m);
        fp.gain.assign(m, Eigen::VectorXd::Zero(n));
        fp.innovation.assign(m, 0.0);
        fp.innovation_var.assign(m, std::numeric_limits<double>::infinity());
    }
    for (std::size_t s = 0; s < m; ++s) {
        const Clique& c = chain.cliques[s];
        apply_transition(tr, lay, c.offset, mean, cov);
        if (keep_history) {
            fp.pred_mean[s] = mean;
            fp.pred_cov[s] = cov;
        }
        if (!c.evidence) continue;

        const double f = cov(y0, y0);
        const double scale = std::max({cov.diagonal().cwiseAbs().maxCoeff(), chain.params.gamma, 1e-300});
        if (!(f > kPivotTolerance * scale) || !std::isfinite(f)) {
            fail(ErrorCode::NumericalFailure, "one-step predictive variance " + std::to_string(f) +
                                                  " at position " + std::to_string(c.time) +
                                                  " is not positive");
        }
        const double v = *c.evidence - mean(y0);
        const Eigen::VectorXd k = cov.col(y0) / f;
        mean += k * v;
        cov.noalias() -= k * cov.row(y0);
        // Exact conditioning: the observed coordinate becomes a point mass.
        mean(y0) = *c.evidence;
        cov.row(y0).setZero();
        cov.col(y0).setZero();
        symmetrize(cov);

        const double ld = -0.5 * (kLog2Pi + std::log(f) + v * v / f);
        fp.log_density[s] = ld;
        fp.loglik += ld;
        if (keep_history) {
            fp.gain[s] = k;
            fp.innovation[s] = v;
            fp.innovation_var[s] = f;
        }
    }
    fp.final_mean = std::move(mean);
    fp.final_cov = std::move(cov);
    return fp;
}

void accumulate_clique(const ModelStructure& s, const CliqueLayout& lay, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov, const Eigen::MatrixXd& cross, int t,
                       SuffStats& st) {
    // Random part of X_t, as indices into the clique vector.
    std::vector<int> idx;
    const int first_lag = s.beta0_mode == Beta0Mode::Free ? 0 : 1;
    for (int j = first_lag; j <= s.q; ++j) idx.push_back(lay.error(j));
    for (int i = 1; i <= s.p; ++i) idx.push_back(lay.obs(i));
    const int nr = static_cast<int>(idx.size());
    const int k = nr + s.cross_count();

    Eigen::VectorXd mx(k);
    Eigen::MatrixXd vx = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd cov_xy = Eigen::VectorXd::Zero(k);
    Eigen::VectorXd cov_xe = Eigen::VectorXd::Zero(k);
    const int ey = lay.obs(0);
    const int ee = lay.error(0);
    for (int a = 0; a < nr; ++a) {
        mx(a) = mean(idx[a]);
        cov_xy(a) = cov(idx[a], ey);
        cov_xe(a) = cov(idx[a], ee);
        for (int b = 0; b < nr; ++b) vx(a, b) = cov(idx[a], idx[b]);
    }
    for (int c = 0; c < s.cross_count(); ++c) mx(nr + c) = cross(t, c);

    const double my = mean(ey);
    const double me = mean(ee);
    st.count += 1;
    st.sum_e += me;
    st.sum_ee += me * me + cov(ee, ee);
    st.sum_y += my;
    st.sum_yy += my * my + cov(ey, ey);
    st.sum_ye += my * me + cov(ey, ee);
    st.sum_x += mx;
    st.sum_xx.noalias() += mx * mx.transpose() + vx;
    st.sum_yx += my * mx + cov_xy;
    st.sum_xe += me * mx + cov_xe;
}

}  // namespace

FilteredState presample_state(const CliqueChain& chain) {
    const auto& lay = chain.layout;
    const int R = chain.horizon();
    FilteredState st;
    st.time = R - 1;
    st.mean = Eigen::VectorXd::Zero(lay.dim());
    st.cov = Eigen::MatrixXd::Zero(lay.dim(), lay.dim());
    for (int j = 0; j <= lay.q; ++j) st.cov(lay.error(j), lay.error(j)) = chain.params.gamma;
    for (int i = 0; i <= lay.p; ++i) {
        const int s = R - 1 - i;
        if (s >= 0) st.mean(lay.obs(i)) = chain.conditioning[s];
    }
    return st;
}

void advance_clique(const CliqueLayout& layout, const Parameters& params, double offset,
                    double extra_variance, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
    apply_transition(make_transition(layout, params, extra_variance), layout, offset, mean, cov);
}

CliqueChain build_chain(const ModelStructure& structure, const Parameters& params,
                        const Values& observations, const Eigen::MatrixXd& cross) {
    return make_chain(structure, params, observations, cross, false);
}

CliqueChain build_history_chain(const ModelStructure& structure, const Parameters& params,
                                const Values& observations, const Eigen::MatrixXd& cross) {
    return make_chain(structure, params, observations, cross, true);
}

ChainPosterior propagate(const CliqueChain& chain) {
    const auto& lay = chain.layout;
    const int n = lay.dim();
    const int y0 = lay.obs(0);
    const ForwardPass fp = run_forward(chain, true);
    const Eigen::MatrixXd F = make_transition(lay, chain.params, 0.0).F;

    ChainPosterior post;
    const std::size_t m = chain.cliques.size();
    post.mean.resize(m);
    post.cov.resize(m);
    post.loglik = fp.loglik;

    // Backward adjoint recursion (r, N) over the chain; needs no inversion of
    // clique covariances, only the scalar innovation variances.
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t s = m; s-- > 0;) {
        if (s + 1 < m) {
            // Carry (r, N) from clique s+1 back through the transition.
            r = F.transpose() * r;
            N = F.transpose() * N * F;
        }
        if (chain.cliques[s].evidence) {
            // L = I - k Z acting on clique s itself.
            const Eigen::VectorXd& k = fp.gain[s];
            const double f = fp.innovation_var[s];
            Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
            A.col(y0) -= k;
            r = A.transpose() * r;
            r(y0) += fp.innovation[s] / f;
            N = A.transpose() * N * A;
            N(y0, y0) += 1.0 / f;
        }
        symmetrize(N);
        const auto& P = fp.pred_cov[s];
        post.mean[s] = fp.pred_mean[s] + P * r;
        Eigen::MatrixXd V = P - P * N * P;
        symmetrize(V);
        if (auto& ev = chain.cliques[s].evidence) {
            post.mean[s](y0) = *ev;
            V.row(y0).setZero();
            V.col(y0).setZero();
        }
        post.cov[s] = std::move(V);
    }
    return post;
}

SuffStats posterior_moments(const CliqueChain& chain, const ChainPosterior& post) {
    SuffStats st = empty_stats(chain.structure);
    const auto& lay = chain.layout;
    for (std::size_t s = 0; s < chain.cliques.size(); ++s) {
        accumulate_clique(chain.structure, lay, post.mean[s], post.cov[s], chain.cross,
                          chain.cliques[s].time, st);
    }
    if (!chain.cliques.empty()) {
        for (int j = 1; j <= lay.q; ++j) {
            const double m = post.mean[0](lay.error(j));
            st.init_sum_ee += m * m + post.cov[0](lay.error(j), lay.error(j));
        }
        st.init_count = lay.q;
    }
    return st;
}

SuffStats posterior_moments(const CliqueChain& chain) {
    return posterior_moments(chain, propagate(chain));
}

namespace {

Gaussian separator_marginal(const CliqueLayout& lay, int t, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& cov) {
    std::vector<int> idx;
    Gaussian g;
    for (int j = 0; j < lay.q; ++j) {
        idx.push_back(lay.error(j));
        g.vars.push_back({VarLabel::Kind::Error, t - j});
    }
    for (int i = 0; i < lay.p; ++i) {
        idx.push_back(lay.obs(i));
        g.vars.push_back({VarLabel::Kind::Observation, t - i});
    }
    const int d = static_cast<int>(idx.size());
    g.mean.resize(d);
    g.cov.resize(d, d);
    for (int a = 0; a < d; ++a) {
        g.mean(a) = mean(idx[a]);
        for (int b = 0; b < d; ++b) g.cov(a, b) = cov(idx[a], idx[b]);
    }
    return g;
}

}  // namespace

Gaussian last_clique_marginal(const CliqueChain& chain, const ChainPosterior& post) {
    if (chain.cliques.empty()) {
        const auto pre = presample_state(chain);
        return separator_marginal(chain.layout, pre.time, pre.mean, pre.cov);
    }
    const std::size_t last = chain.cliques.size() - 1;
    return separator_marginal(chain.layout, chain.cliques[last].time, post.mean[last], post.cov[last]);
}

Gaussian last_clique_marginal(const CliqueChain& chain) {
    const auto st = filter_to_end(chain);
    return separator_marginal(chain.layout, st.time, st.mean, st.cov);
}

double log_likelihood(const CliqueChain& chain) { return run_forward(chain, false).loglik; }

std::vector<double> predictive_log_densities(const CliqueChain& chain) {
    return run_forward(chain, false).log_density;
}

FilteredState filter_to_end(const CliqueChain& chain) {
    if (chain.cliques.empty()) return presample_state(chain);
    ForwardPass fp = run_forward(chain, false);
    return FilteredState{chain.cliques.back().time, std::move(fp.final_mean), std::move(fp.final_cov)};
}

}  // namespace sarma

#include "sarma/dense_oracle.hpp"

#include <cmath>
#include <numbers>

#include "sarma/errors.hpp"

namespace sarma {

DenseResult dense_oracle(const ModelStructure& s, const Parameters& par, const Values& obs,
                         const Eigen::MatrixXd& cross) {
    s.validate();
    par.validate(s);
    const int T = static_cast<int>(obs.size());
    const int R = s.horizon();
    const int m = T - R;
    if (m <= 0) fail(ErrorCode::ChainTooShort, "series too short for the conditioning horizon");
    if (m > kDenseOracleMaxCliques) {
        fail(ErrorCode::TooLarge, "dense oracle limited to " + std::to_string(kDenseOracleMaxCliques) +
                                      " modelled positions, got " + std::to_string(m));
    }
    for (int t = 0; t < R; ++t) {
        if (!obs[t]) fail(ErrorCode::MissingConditioning, "conditioning value missing");
    }

    // Latent variables: errors E_{R-q} .. E_{T-1}, then observations Y_R .. Y_{T-1}.
    // Independent sources w: the same errors followed by noises nu_R .. nu_{T-1}.
    const int ne = s.q + m;
    const int nz = ne + m;
    const int nw = ne + m;
    auto err_index = [&](int time) { return time - (R - s.q); };
    auto obs_index = [&](int time) { return ne + (time - R); };

    Eigen::VectorXd mz = Eigen::VectorXd::Zero(nz);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nz, nw);
    for (int i = 0; i < ne; ++i) A(i, i) = 1.0;
    for (int t = R; t < T; ++t) {
        const int row = obs_index(t);
        double c = par.zeta;
        for (int k = 0; k < s.cross_count(); ++k) c += par.eta[k] * cross(t, k);
        A(row, err_index(t)) += par.beta0;
        for (int j = 1; j <= s.q; ++j) A(row, err_index(t - j)) += par.beta[j - 1];
        A(row, ne + (t - R)) += 1.0;
        for (int i = 1; i <= s.p; ++i) {
            const int src = t - i;
            if (src < R) {
                c += par.alpha[i - 1] * *obs[src];
            } else {
                c += par.alpha[i - 1] * mz(obs_index(src));
                A.row(row) += par.alpha[i - 1] * A.row(obs_index(src));
            }
        }
        mz(row) = c;
    }
    Eigen::VectorXd wvar(nw);
    wvar.head(ne).setConstant(par.gamma);
    wvar.tail(m).setConstant(par.sigma);
    const Eigen::MatrixXd Sz = A * wvar.asDiagonal() * A.transpose();

    // Condition on every observed Y.
    std::vector<int> o;
    for (int t = R; t < T; ++t) {
        if (obs[t]) o.push_back(obs_index(t));
    }
    const int no = static_cast<int>(o.size());
    Eigen::VectorXd mu = mz;
    Eigen::MatrixXd V = Sz;
    double loglik = 0.0;
    if (no > 0) {
        Eigen::MatrixXd Soo(no, no);
        Eigen::MatrixXd Szo(nz, no);
        Eigen::VectorXd resid(no);
        for (int a = 0; a < no; ++a) {
            for (int b = 0; b < no; ++b) Soo(a, b) = Sz(o[a], o[b]);
            Szo.col(a) = Sz.col(o[a]);
            resid(a) = *obs[o[a] - ne + R] - mz(o[a]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(Soo);
        if (llt.info() != Eigen::Success) {
            fail(ErrorCode::NumericalFailure, "observed covariance is not positive definite");
        }
        const Eigen::VectorXd alpha = llt.solve(resid);
        mu += Szo * alpha;
        V -= Szo * llt.solve(Szo.transpose());
        V = 0.5 * (V + V.transpose()).eval();
        const Eigen::MatrixXd L = llt.matrixL();
        const double logdet = 2.0 * L.diagonal().array().log().sum();
        loglik = -0.5 * (no * std::log(2.0 * std::numbers::pi) + logdet + resid.dot(alpha));
    }

    // Moments of any chain variable; pre-horizon observations are constants.
    struct Ref {
        int index = -1;  // into z, or -1 for a constant
        double value = 0.0;
    };
    auto E = [&](int time) { return Ref{err_index(time), 0.0}; };
    auto Y = [&](int time) { return time < R ? Ref{-1, *obs[time]} : Ref{obs_index(time), 0.0}; };
    auto C = [&](int time, int k) { return Ref{-1, cross(time, k)}; };
    auto mean_of = [&](const Ref& r) { return r.index < 0 ? r.value : mu(r.index); };
    auto second = [&](const Ref& a, const Ref& b) {
        const double c = (a.index < 0 || b.index < 0) ? 0.0 : V(a.index, b.index);
        return mean_of(a) * mean_of(b) + c;
    };

    DenseResult out;
    SuffStats st;
    st.mode = s.beta0_mode;
    const int k = regressor_count(s);
    st.sum_x = Eigen::VectorXd::Zero(k);
    st.sum_yx = Eigen::VectorXd::Zero(k);
    st.sum_xe = Eigen::VectorXd::Zero(k);
    st.sum_xx = Eigen::MatrixXd::Zero(k, k);
    for (int t = R; t < T; ++t) {
        std::vector<Ref> x;
        if (s.beta0_mode == Beta0Mode::Free) x.push_back(E(t));
        for (int j = 1; j <= s.q; ++j) x.push_back(E(t - j));
        for (int i = 1; i <= s.p; ++i) x.push_back(Y(t - i));
        for (int c = 0; c < s.cross_count(); ++c) x.push_back(C(t, c));
        const Ref yt = Y(t);
        const Ref et = E(t);
        st.count += 1;
        st.sum_e += mean_of(et);
        st.sum_ee += second(et, et);
        st.sum_y += mean_of(yt);
        st.sum_yy += second(yt, yt);
        st.sum_ye += second(yt, et);
        for (int a = 0; a < k; ++a) {
            st.sum_x(a) += mean_of(x[a]);
            st.sum_yx(a) += second(yt, x[a]);
            st.sum_xe(a) += second(x[a], et);
            for (int b = 0; b < k; ++b) st.sum_xx(a, b) += second(x[a], x[b]);
        }
    }
    for (int time = R - s.q; time < R; ++time) st.init_sum_ee += second(E(time), E(time));
    st.init_count = s.q;
    out.stats = std::move(st);

    std::vector<Ref> refs;
    for (int j = 0; j < s.q; ++j) {
        out.last.vars.push_back({VarLabel::Kind::Error, T - 1 - j});
        refs.push_back(E(T - 1 - j));
    }
    for (int i = 0; i < s.p; ++i) {
        out.last.vars.push_back({VarLabel::Kind::Observation, T - 1 - i});
        refs.push_back(Y(T - 1 - i));
    }
    const int d = static_cast<int>(refs.size());
    out.last.mean.resize(d);
    out.last.cov.resize(d, d);
    for (int a = 0; a < d; ++a) {
        out.last.mean(a) = mean_of(refs[a]);
        for (int b = 0; b < d; ++b) {
            out.last.cov(a, b) = (refs[a].index < 0 || refs[b].index < 0) ? 0.0 : V(refs[a].index, refs[b].index);
        }
    }
    out.loglik = loglik;
    return out;
}

}  // namespace sarma

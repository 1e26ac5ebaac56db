#include "sarma/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <limits>

#include "sarma/errors.hpp"

namespace sarma {

using nlohmann::json;

void EmConfig::validate() const {
    if (max_iters <= 0) fail(ErrorCode::InvalidArgument, "max_iters must be positive");
    if (!(rel_tol > 0.0)) fail(ErrorCode::InvalidArgument, "rel_tol must be positive");
    if (!(pinv_cutoff > 0.0)) fail(ErrorCode::InvalidArgument, "pinv_cutoff must be positive");
    if (!(min_gamma > 0.0)) fail(ErrorCode::InvalidArgument, "min_gamma must be positive");
    if (!(sigma > 0.0)) {
        fail(ErrorCode::InvalidArgument,
             "sigma must be > 0: with sigma = 0 the E-step reproduces the current "
             "parameters and EM cannot move (EM stall)");
    }
}

EmConfig em_config_from_json(const json& doc) {
    EmConfig c;
    if (!doc.is_object()) fail(ErrorCode::SchemaError, "EM config must be an object");
    if (doc.contains("max_iters")) c.max_iters = doc.at("max_iters").get<int>();
    if (doc.contains("rel_tol")) c.rel_tol = doc.at("rel_tol").get<double>();
    if (doc.contains("pinv_cutoff")) c.pinv_cutoff = doc.at("pinv_cutoff").get<double>();
    if (doc.contains("min_gamma")) c.min_gamma = doc.at("min_gamma").get<double>();
    if (doc.contains("sigma")) c.sigma = doc.at("sigma").get<double>();
    if (doc.contains("acceleration")) {
        const auto a = doc.at("acceleration").get<std::string>();
        if (a == "none") {
            c.acceleration = Acceleration::None;
        } else if (a == "squarem") {
            c.acceleration = Acceleration::Squarem;
        } else {
            fail(ErrorCode::SchemaError, "acceleration must be 'none' or 'squarem'");
        }
    }
    return c;
}

json to_json(const EmConfig& c) {
    return {{"max_iters", c.max_iters},     {"rel_tol", c.rel_tol},     {"pinv_cutoff", c.pinv_cutoff},
            {"min_gamma", c.min_gamma},     {"sigma", c.sigma},
            {"acceleration", c.acceleration == Acceleration::None ? "none" : "squarem"}};
}

void FitTrace::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::IoError, "cannot write trace file " + path.string());
    out << "iteration,loglik\n";
    out.precision(17);
    for (std::size_t i = 0; i < loglik.size(); ++i) out << i << ',' << loglik[i] << '\n';
}

SuffStats e_step(const ModelStructure& structure, const Parameters& params, const Values& data,
                 const Eigen::MatrixXd& cross) {
    return posterior_moments(build_chain(structure, params, data, cross));
}

namespace {

/// Solves the joint normal equations [Sxx Sx; Sx' n] (phi, zeta) = rhs with an
/// SVD pseudo-inverse.
Eigen::VectorXd solve_normal_equations(const SuffStats& st, const Eigen::VectorXd& rhs, double cutoff) {
    const int k = st.regressors();
    Eigen::MatrixXd A(k + 1, k + 1);
    A.topLeftCorner(k, k) = st.sum_xx;
    A.topRightCorner(k, 1) = st.sum_x;
    A.bottomLeftCorner(1, k) = st.sum_x.transpose();
    A(k, k) = static_cast<double>(st.count);
    A = 0.5 * (A + A.transpose()).eval();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double threshold = cutoff * (sv.size() ? sv(0) : 0.0);
    Eigen::VectorXd utb = svd.matrixU().transpose() * rhs;
    for (int i = 0; i < sv.size(); ++i) utb(i) = sv(i) > threshold ? utb(i) / sv(i) : 0.0;
    return svd.matrixV() * utb;
}

Parameters unpack(const ModelStructure& s, const Eigen::VectorXd& sol, double gamma, double sigma) {
    Parameters p;
    const int k = regressor_count(s);
    int pos = 0;
    if (s.beta0_mode == Beta0Mode::Free) {
        p.beta0 = sol(pos++);
    } else {
        p.beta0 = 1.0;
    }
    for (int j = 0; j < s.q; ++j) p.beta.push_back(sol(pos++));
    for (int i = 0; i < s.p; ++i) p.alpha.push_back(sol(pos++));
    for (int c = 0; c < s.cross_count(); ++c) p.eta.push_back(sol(pos++));
    p.zeta = sol(k);
    p.gamma = gamma;
    p.sigma = sigma;
    return p;
}

double gamma_estimate(const SuffStats& st, double min_gamma) {
    if (st.count <= 0) fail(ErrorCode::DegenerateStats, "sufficient statistics cover no positions");
    const double g = (st.sum_ee + st.init_sum_ee) / static_cast<double>(st.count + st.init_count);
    return std::max(g, min_gamma);
}

void check_layout(const ModelStructure& s, const SuffStats& st, Beta0Mode expected) {
    if (st.mode != expected) {
        fail(ErrorCode::InvalidArgument, "sufficient statistics use the other beta0 layout");
    }
    if (st.regressors() != regressor_count(s)) {
        fail(ErrorCode::InvalidArgument, "sufficient statistics do not match the structure");
    }
}

}  // namespace

Parameters m_step_fixed(const ModelStructure& s, const SuffStats& st, double sigma, double pinv_cutoff,
                        double min_gamma) {
    const double gamma = gamma_estimate(st, min_gamma);
    ModelStructure fixed = s;
    fixed.beta0_mode = Beta0Mode::FixedOne;
    check_layout(fixed, st, Beta0Mode::FixedOne);
    const int k = st.regressors();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = st.sum_yx - st.sum_xe;
    rhs(k) = st.sum_y - st.sum_e;
    return unpack(fixed, solve_normal_equations(st, rhs, pinv_cutoff), gamma, sigma);
}

Parameters m_step_free(const ModelStructure& s, const SuffStats& st, double sigma, double pinv_cutoff,
                       double min_gamma) {
    const double gamma = gamma_estimate(st, min_gamma);
    ModelStructure free = s;
    free.beta0_mode = Beta0Mode::Free;
    check_layout(free, st, Beta0Mode::Free);
    const int k = st.regressors();
    Eigen::VectorXd rhs(k + 1);
    rhs.head(k) = st.sum_yx;
    rhs(k) = st.sum_y;
    return unpack(free, solve_normal_equations(st, rhs, pinv_cutoff), gamma, sigma);
}

Parameters m_step(const ModelStructure& s, const SuffStats& st, double sigma, double pinv_cutoff,
                  double min_gamma) {
    return s.beta0_mode == Beta0Mode::Free ? m_step_free(s, st, sigma, pinv_cutoff, min_gamma)
                                           : m_step_fixed(s, st, sigma, pinv_cutoff, min_gamma);
}

namespace {

Eigen::VectorXd phi_vector(const Parameters& p, Beta0Mode mode) {
    std::vector<double> v;
    if (mode == Beta0Mode::Free) v.push_back(p.beta0);
    v.insert(v.end(), p.beta.begin(), p.beta.end());
    v.insert(v.end(), p.alpha.begin(), p.alpha.end());
    v.insert(v.end(), p.eta.begin(), p.eta.end());
    return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Eigen::VectorXd m_step_gradient(const SuffStats& st, const Parameters& params) {
    const Eigen::VectorXd phi = phi_vector(params, st.mode);
    const int k = st.regressors();
    if (phi.size() != k) fail(ErrorCode::InvalidArgument, "parameters do not match statistics");
    Eigen::VectorXd g(k + 1);
    g.head(k) = st.sum_yx - st.sum_xx * phi - st.sum_x * params.zeta;
    g(k) = st.sum_y - st.sum_x.dot(phi) - static_cast<double>(st.count) * params.zeta;
    if (st.mode == Beta0Mode::FixedOne) {
        g.head(k) -= st.sum_xe;
        g(k) -= st.sum_e;
    }
    return g;
}

namespace {

struct EmState {
    Parameters params;
    SuffStats stats;
    double loglik = 0.0;
};

EmState evaluate(const ModelStructure& s, const Parameters& params, const Values& data,
                 const Eigen::MatrixXd& cross) {
    const CliqueChain chain = build_chain(s, params, data, cross);
    const ChainPosterior post = propagate(chain);
    return EmState{params, posterior_moments(chain, post), post.loglik};
}

/// Unconstrained coordinates used for extrapolation: (zeta, phi, log gamma).
Eigen::VectorXd to_coords(const Parameters& p, Beta0Mode mode) {
    const Eigen::VectorXd phi = phi_vector(p, mode);
    Eigen::VectorXd v(phi.size() + 2);
    v(0) = p.zeta;
    v.segment(1, phi.size()) = phi;
    v(phi.size() + 1) = std::log(p.gamma);
    return v;
}

Parameters from_coords(const ModelStructure& s, const Eigen::VectorXd& v, double sigma, double min_gamma) {
    const int k = regressor_count(s);
    Eigen::VectorXd sol(k + 1);
    sol.head(k) = v.segment(1, k);
    sol(k) = v(0);
    const double gamma = std::max(std::exp(std::clamp(v(k + 1), -700.0, 700.0)), min_gamma);
    return unpack(s, sol, gamma, sigma);
}

void check_monotone(double before, double after) {
    if (after < before - kMonotoneSlack) {
        fail(ErrorCode::NonMonotone, "EM log-likelihood decreased from " + std::to_string(before) +
                                         " to " + std::to_string(after));
    }
}

bool small_gain(double before, double after, double rel_tol) {
    return (after - before) / std::max(std::abs(before), 1.0) < rel_tol;
}

}  // namespace

bool reflect_ma_roots(Parameters& params) {
    // theta(z) = 1 + sum_j (beta_j / beta0) z^j; trailing zero coefficients
    // do not contribute roots.
    int q = static_cast<int>(params.beta.size());
    while (q > 0 && params.beta[q - 1] == 0.0) --q;
    if (q == 0 || params.beta0 == 0.0) return false;
    std::vector<double> c(q + 1);
    c[0] = 1.0;
    for (int j = 1; j <= q; ++j) c[j] = params.beta[j - 1] / params.beta0;

    // Roots of c_q z^q + ... + c_0 from the companion matrix of the monic form.
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(q, q);
    for (int j = 0; j < q; ++j) companion(0, j) = -c[q - 1 - j] / c[q];
    for (int j = 1; j < q; ++j) companion(j, j - 1) = 1.0;
    const Eigen::VectorXcd roots = Eigen::EigenSolver<Eigen::MatrixXd>(companion, false).eigenvalues();

    bool changed = false;
    double scale = 1.0;
    std::vector<std::complex<double>> poly{1.0};  // prod (1 - z / r)
    for (int i = 0; i < q; ++i) {
        std::complex<double> r = roots(i);
        if (std::abs(r) < 1.0) {
            scale /= std::norm(r);
            r = 1.0 / std::conj(r);
            changed = true;
        }
        std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            next[k] += poly[k];
            next[k + 1] -= poly[k] / r;
        }
        poly = std::move(next);
    }
    if (!changed) return false;
    for (int j = 1; j <= q; ++j) params.beta[j - 1] = params.beta0 * poly[j].real();
    params.gamma *= scale;
    return true;
}

FitResult fit_em(const ModelStructure& structure, const Values& data, const Eigen::MatrixXd& cross,
                 const EmConfig& config, std::optional<Parameters> init) {
    config.validate();
    structure.validate();
    const int R = structure.horizon();
    TimeSeries series{"", data, std::nullopt, 0};
    series = fill_initial_segment(series, static_cast<std::size_t>(R));

    Parameters start = init ? *init : init_parameters(structure, series, config.sigma);
    start.sigma = config.sigma;
    if (structure.beta0_mode == Beta0Mode::FixedOne) start.beta0 = 1.0;
    start.validate(structure);

    auto mstep = [&](const SuffStats& st) {
        return m_step(structure, st, config.sigma, config.pinv_cutoff, config.min_gamma);
    };
    auto eval = [&](const Parameters& p) { return evaluate(structure, p, series.values, cross); };

    FitResult result;
    FitTrace& trace = result.trace;
    EmState cur = eval(start);
    trace.loglik.push_back(cur.loglik);

    // EM can drift into the mirror image of an MA fit (roots inside the unit
    // circle), where it crawls. Reflecting keeps the error autocovariance, so
    // the reflected point is taken whenever one EM step from it does not lose
    // likelihood.
    int reflections = 0;
    auto try_reflect = [&]() {
        if (structure.q == 0 || reflections >= kMaxReflections || trace.iterations >= config.max_iters) return false;
        Parameters mirrored = cur.params;
        if (!reflect_ma_roots(mirrored)) return false;
        ++reflections;
        try {
            EmState ext = eval(mirrored);
            EmState stab = eval(mstep(ext.stats));
            ++trace.iterations;
            if (!(std::isfinite(stab.loglik) && stab.loglik >= cur.loglik)) return false;
            cur = std::move(stab);
            trace.loglik.push_back(cur.loglik);
            return true;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::NumericalFailure) throw;
            return false;
        }
    };

    while (trace.iterations < config.max_iters) {
        const bool accelerate = config.acceleration == Acceleration::Squarem && trace.iterations > 0 &&
                                trace.iterations + 2 <= config.max_iters;
        const double before = cur.loglik;
        if (!accelerate) {
            EmState next = eval(mstep(cur.stats));
            ++trace.iterations;
            check_monotone(cur.loglik, next.loglik);
            trace.loglik.push_back(next.loglik);
            cur = std::move(next);
        } else {
            // SQUAREM cycle: two EM steps, a squared extrapolation, one
            // stabilizing EM step, kept only if it beats the second EM step.
            EmState s1 = eval(mstep(cur.stats));
            check_monotone(cur.loglik, s1.loglik);
            EmState s2 = eval(mstep(s1.stats));
            check_monotone(s1.loglik, s2.loglik);
            trace.iterations += 2;

            const Eigen::VectorXd x0 = to_coords(cur.params, structure.beta0_mode);
            const Eigen::VectorXd x1 = to_coords(s1.params, structure.beta0_mode);
            const Eigen::VectorXd x2 = to_coords(s2.params, structure.beta0_mode);
            const Eigen::VectorXd r = x1 - x0;
            const Eigen::VectorXd v = x2 - x1 - r;
            EmState accepted = std::move(s2);
            if (v.norm() > 0.0 && trace.iterations < config.max_iters) {
                const double step = std::min(-r.norm() / v.norm(), -1.0);
                const Eigen::VectorXd xe = x0 - 2.0 * step * r + step * step * v;
                try {
                    if (xe.allFinite()) {
                        EmState ext = eval(from_coords(structure, xe, config.sigma, config.min_gamma));
                        EmState stab = eval(mstep(ext.stats));
                        ++trace.iterations;
                        if (std::isfinite(stab.loglik) && stab.loglik >= accepted.loglik) accepted = std::move(stab);
                    }
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::NumericalFailure) throw;
                }
            }
            trace.loglik.push_back(s1.loglik);
            trace.loglik.push_back(accepted.loglik);
            cur = std::move(accepted);
        }
        if (try_reflect()) continue;
        if (small_gain(before, cur.loglik, config.rel_tol)) {
            trace.converged = true;
            break;
        }
    }
    result.params = cur.params;
    return result;
}

Eigen::MatrixXd cross_matrix(const ModelStructure& structure, const Collection& collection,
                             std::size_t length, bool fill_missing, bool* filled) {
    const int k = structure.cross_count();
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(length), k);
    if (filled) *filled = false;
    for (int c = 0; c < k; ++c) {
        const auto& xp = structure.cross_predictors[c];
        const TimeSeries* source = &collection.at(xp.source);
        TimeSeries filled_source;
        const bool has_missing = source->observed_count() < source->size();
        if (has_missing && fill_missing) {
            filled_source = fill_in(*source);
            source = &filled_source;
            if (filled) *filled = true;
        }
        for (std::size_t t = 0; t < length; ++t) {
            const long s = static_cast<long>(t) - xp.lag;
            if (s < 0) continue;  // before the source starts: zero on the standardized scale
            if (static_cast<std::size_t>(s) >= source->size() || !source->values[s]) {
                fail(ErrorCode::MissingCrossValues,
                     "cross predictor " + xp.source + " at lag " + std::to_string(xp.lag) +
                         " has no value at position " + std::to_string(s));
            }
            C(static_cast<Eigen::Index>(t), c) = *source->values[s];
        }
    }
    return C;
}

MultiModel fit_multi(const std::map<std::string, ModelStructure>& structures, const Collection& collection,
                     const MultiFitOptions& options) {
    MultiModel model;
    for (const auto& id : collection.order) {
        auto it = structures.find(id);
        if (it == structures.end()) continue;
        const TimeSeries& series = collection.at(id);
        bool filled = false;
        const Eigen::MatrixXd C = cross_matrix(it->second, collection, series.size(), options.fill_cross, &filled);
        FitResult fit = fit_em(it->second, series.values, C, options.em);
        model.add(id, SeriesModel{it->second, fit.params, series.transform, filled});
    }
    return model;
}

}  // namespace sarma

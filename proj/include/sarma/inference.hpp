#ifndef SARMA_INFERENCE_HPP
#define SARMA_INFERENCE_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sarma/data.hpp"
#include "sarma/model.hpp"

namespace sarma {

/// Names a chain variable: E@t (latent error) or Y@t (observation). Times are
/// 0-based positions in the series.
struct VarLabel {
    enum class Kind { Error, Observation };
    Kind kind = Kind::Error;
    int time = 0;

    std::string str() const;
    friend bool operator==(const VarLabel&, const VarLabel&) = default;
};

struct Gaussian {
    std::vector<VarLabel> vars;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;

    std::size_t dim() const { return vars.size(); }
    /// Index of `label` in vars, or -1.
    int index_of(const VarLabel& label) const;
    /// Symmetric and smallest eigenvalue >= -tol * max(1, ||cov||).
    bool is_psd(double tol = 1e-10) const;
};

/// Position of each variable inside a clique vector
/// [E_t, E_{t-1}, ..., E_{t-q}, Y_t, Y_{t-1}, ..., Y_{t-p}].
struct CliqueLayout {
    int p = 0;
    int q = 0;

    int dim() const { return p + q + 2; }
    int error(int lag) const { return lag; }
    int obs(int lag) const { return q + 1 + lag; }
};

struct Clique {
    int time = 0;
    std::vector<VarLabel> vars;
    /// zeta + eta . C_t, the part of the mean of Y_t not carried by the chain.
    double offset = 0.0;
    std::optional<double> evidence;
};

/// Inference structure for one series: one clique per t = R..T-1 over
/// {Y_t, E_t, X_t}. Consecutive cliques share E_{t-q+1..t} and Y_{t-p+1..t}.
struct CliqueChain {
    ModelStructure structure;
    Parameters params;
    CliqueLayout layout;
    int length = 0;                    // T
    std::vector<double> conditioning;  // y_0 .. y_{R-1}
    std::vector<Clique> cliques;
    Eigen::MatrixXd cross;             // T x k cross-predictor values

    int horizon() const { return structure.horizon(); }
};

/// Expected sufficient statistics summed over t = R..T-1.
///
/// X_t = (E_{t-1..t-q}, Y_{t-1..t-p}, C_t) for fixed beta0 and
/// (E_t, E_{t-1..t-q}, Y_{t-1..t-p}, C_t) for free beta0. The init_* fields
/// cover the q pre-sample errors E_{R-q..R-1}, which carry N(0, gamma) priors.
struct SuffStats {
    Beta0Mode mode = Beta0Mode::FixedOne;
    int count = 0;
    double sum_e = 0.0;
    double sum_ee = 0.0;
    double sum_y = 0.0;
    double sum_yy = 0.0;
    double sum_ye = 0.0;
    Eigen::VectorXd sum_x;
    Eigen::VectorXd sum_yx;
    Eigen::VectorXd sum_xe;
    Eigen::MatrixXd sum_xx;
    int init_count = 0;
    double init_sum_ee = 0.0;

    int regressors() const { return static_cast<int>(sum_x.size()); }
};

/// Smoothed clique moments plus the observed-data log-likelihood.
struct ChainPosterior {
    std::vector<Eigen::VectorXd> mean;
    std::vector<Eigen::MatrixXd> cov;
    double loglik = 0.0;
};

/// Moments of the clique at time T-1 given all evidence (the pre-sample
/// clique at R-1 when the chain has no cliques).
struct FilteredState {
    int time = -1;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// `cross` is T x k with one column per cross predictor, aligned to the
/// target's time index. Throws ChainTooShort when T <= R,
/// MissingConditioning when one of y_0..y_{R-1} is missing and
/// MissingCrossValues on a NaN cross value.
CliqueChain build_chain(const ModelStructure& structure, const Parameters& params,
                        const Values& observations, const Eigen::MatrixXd& cross);

/// As build_chain but allows T == R (no cliques); used by forecasting.
CliqueChain build_history_chain(const ModelStructure& structure, const Parameters& params,
                                const Values& observations, const Eigen::MatrixXd& cross);

ChainPosterior propagate(const CliqueChain& chain);

SuffStats posterior_moments(const CliqueChain& chain, const ChainPosterior& posterior);
SuffStats posterior_moments(const CliqueChain& chain);

/// Joint over E_{T-q..T-1} and Y_{T-p..T-1}; observed Y's have zero variance.
Gaussian last_clique_marginal(const CliqueChain& chain, const ChainPosterior& posterior);
Gaussian last_clique_marginal(const CliqueChain& chain);

/// log p(observed Y_R..Y_{T-1} | y_0..y_{R-1}, C), forward pass only.
double log_likelihood(const CliqueChain& chain);

/// log p(y_t | y_{<t}, C) for each clique; NaN where y_t is missing.
std::vector<double> predictive_log_densities(const CliqueChain& chain);

FilteredState filter_to_end(const CliqueChain& chain);

/// Moments of the pre-sample clique at time R-1: errors iid N(0, gamma),
/// conditioning observations as constants.
FilteredState presample_state(const CliqueChain& chain);

/// Advances clique moments by one step. `offset` is zeta + eta . C_{t+1}
/// for the known part; `extra_variance` adds independent noise to Y_{t+1}
/// (unobserved cross predictors).
void advance_clique(const CliqueLayout& layout, const Parameters& params, double offset,
                    double extra_variance, Eigen::VectorXd& mean, Eigen::MatrixXd& cov);

SuffStats empty_stats(const ModelStructure& structure);

/// Number of regressors in X_t for `structure`.
int regressor_count(const ModelStructure& structure);

}  // namespace sarma

#endif  // SARMA_INFERENCE_HPP

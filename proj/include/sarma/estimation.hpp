#ifndef SARMA_ESTIMATION_HPP
#define SARMA_ESTIMATION_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sarma/data.hpp"
#include "sarma/inference.hpp"
#include "sarma/model.hpp"

namespace sarma {

enum class Acceleration { None, Squarem };

struct EmConfig {
    int max_iters = 200;
    double rel_tol = 1e-6;
    double pinv_cutoff = 1e-10;
    double min_gamma = 1e-10;
    double sigma = kDefaultSigma;
    /// Squarem extrapolates two EM steps and keeps the result only when the
    /// likelihood does not fall below the plain EM path.
    Acceleration acceleration = Acceleration::Squarem;

    void validate() const;
};

EmConfig em_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EmConfig& config);

struct FitTrace {
    std::vector<double> loglik;
    int iterations = 0;  // M-steps performed
    bool converged = false;

    void write_csv(const std::filesystem::path& path) const;
};

struct FitResult {
    Parameters params;
    FitTrace trace;
};

inline constexpr double kMonotoneSlack = 1e-6;

SuffStats e_step(const ModelStructure& structure, const Parameters& params, const Values& data,
                 const Eigen::MatrixXd& cross);

/// Closed-form M-step for beta0 = 1: gamma from the expected error energy,
/// (zeta, beta, alpha, eta) from the joint normal equations via SVD
/// pseudo-inverse with relative cutoff `pinv_cutoff`.
Parameters m_step_fixed(const ModelStructure& structure, const SuffStats& stats, double sigma,
                        double pinv_cutoff = 1e-10, double min_gamma = 1e-10);

/// As m_step_fixed with beta0 estimated as the E_t coefficient in X_t.
Parameters m_step_free(const ModelStructure& structure, const SuffStats& stats, double sigma,
                       double pinv_cutoff = 1e-10, double min_gamma = 1e-10);

Parameters m_step(const ModelStructure& structure, const SuffStats& stats, double sigma,
                  double pinv_cutoff = 1e-10, double min_gamma = 1e-10);

/// Gradient of the expected complete-data log-likelihood with respect to
/// (phi, zeta), up to the 1/sigma factor. Zero at an exact M-step solution.
Eigen::VectorXd m_step_gradient(const SuffStats& stats, const Parameters& params);

/// Reflects MA roots inside the unit circle to 1 / conj(root) and rescales
/// gamma so the error autocovariance is unchanged. Returns false when the MA
/// polynomial is already invertible.
bool reflect_ma_roots(Parameters& params);

inline constexpr int kMaxReflections = 3;

/// Runs EM from `init` (or init_parameters when absent). `data` must have
/// its first R entries observed or fillable; `cross` is T x k and complete.
FitResult fit_em(const ModelStructure& structure, const Values& data, const Eigen::MatrixXd& cross,
                 const EmConfig& config, std::optional<Parameters> init = std::nullopt);

/// Builds the T x k cross-predictor matrix for `target` from `collection`.
/// Missing source values are fill_in'd when `fill_missing`; otherwise
/// MissingCrossValues names the series and lag. Positions before the start of
/// the source are zero. `filled` reports whether any fill happened.
Eigen::MatrixXd cross_matrix(const ModelStructure& structure, const Collection& collection,
                             std::size_t length, bool fill_missing, bool* filled = nullptr);

struct MultiFitOptions {
    EmConfig em;
    bool fill_cross = true;
};

/// Fits each series independently, cross predictors entering as observed
/// regressors. Series without an entry in `structures` are skipped.
MultiModel fit_multi(const std::map<std::string, ModelStructure>& structures,
                     const Collection& collection, const MultiFitOptions& options);

}  // namespace sarma

#endif  // SARMA_ESTIMATION_HPP

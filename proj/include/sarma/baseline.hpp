#ifndef SARMA_BASELINE_HPP
#define SARMA_BASELINE_HPP

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sarma/data.hpp"
#include "sarma/model.hpp"

namespace sarma {

// Deterministic-node ARMA. Errors before the conditioning horizon are zero.

/// E_t = 0 for t < R, E_t = y_t - yhat_t afterwards. `cross` is T x k (may
/// have zero columns). Throws MissingData on any missing value.
std::vector<double> arma_errors(const ModelStructure& structure, const Parameters& params,
                                const Values& series, const Eigen::MatrixXd& cross);

/// One-step forecast for position t given y_{<t}, errors e_{<t} and C_t.
double arma_forecast_at(const ModelStructure& structure, const Parameters& params,
                        std::span<const double> y, std::span<const double> errors,
                        const Eigen::MatrixXd& cross, int t);

/// Rebuilds y_t = yhat_t + E_t for t >= R from the first R values and errors.
std::vector<double> arma_reconstruct(const ModelStructure& structure, const Parameters& params,
                                     std::span<const double> initial,
                                     std::span<const double> errors,
                                     const Eigen::MatrixXd& cross);

/// Mean of Y_T from the ARMA recursion after the history; variance beta0^2 gamma.
Moments arma_one_step(const ModelStructure& structure, const Parameters& params,
                      const Values& history, const Eigen::MatrixXd& cross_history,
                      std::span<const double> cross_next);

}  // namespace sarma

#endif  // SARMA_BASELINE_HPP

#ifndef SARMA_FORECAST_HPP
#define SARMA_FORECAST_HPP

#include <optional>
#include <vector>

#include "sarma/data.hpp"
#include "sarma/inference.hpp"
#include "sarma/model.hpp"

namespace sarma {

/// Cross-predictor values for one future step; std::nullopt = not observed.
using CrossRow = std::vector<std::optional<double>>;

/// Predictive N(mu*, sigma*) for Y_T given history y_0..y_{T-1}.
/// Uses the closed form when the last p observations and every cross value
/// are observed, the extended clique otherwise.
Moments one_step(const ModelStructure& structure, const Parameters& params, const Values& history,
                 const Eigen::MatrixXd& cross_history, const CrossRow& cross_next);

/// mu* = zeta + beta . E[E_tail] + alpha . y_tail + eta . c
/// sigma* = sigma + beta Sigma beta' + beta0^2 gamma.
/// Throws InvalidArgument when a regressor is unobserved.
Moments one_step_closed_form(const ModelStructure& structure, const Parameters& params,
                             const Values& history, const Eigen::MatrixXd& cross_history,
                             const CrossRow& cross_next);

/// Extends the chain by one clique, enters the available cross evidence and
/// marginalizes to Y_T. Unobserved cross values get N(0, 1) marginals.
Moments one_step_extended(const ModelStructure& structure, const Parameters& params,
                          const Values& history, const Eigen::MatrixXd& cross_history,
                          const CrossRow& cross_next);

/// Marginal predictive moments of Y_{T}, ..., Y_{T+h-1}. `cross_future` may be
/// shorter than h; missing rows are treated as fully unobserved.
std::vector<Moments> multi_step(const ModelStructure& structure, const Parameters& params,
                                const Values& history, const Eigen::MatrixXd& cross_history,
                                const std::vector<CrossRow>& cross_future, int h);

double predictive_density(const ModelStructure& structure, const Parameters& params,
                          const Values& history, const Eigen::MatrixXd& cross_history,
                          const CrossRow& cross_next, double y_actual);

double normal_log_density(double x, double mean, double variance);

}  // namespace sarma

#endif  // SARMA_FORECAST_HPP

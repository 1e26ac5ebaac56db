#ifndef SARMA_EVALUATION_HPP
#define SARMA_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sarma/data.hpp"
#include "sarma/model.hpp"

namespace sarma {

/// Average one-step log predictive density over the observed positions
/// t >= holdout_start of `series_full`, each prediction conditioning on every
/// value before t. `cross_full` is aligned to series_full.
double sequential_predictive_score(const ModelStructure& structure, const Parameters& params,
                                   const Values& series_full, const Eigen::MatrixXd& cross_full,
                                   std::size_t holdout_start);

struct SignTestResult {
    int wins_a = 0;
    int wins_b = 0;
    int ties = 0;
    double p_value = 1.0;
    bool significant = false;
    bool all_ties = false;
};

/// One-sided exact sign test of "a beats b": P(X >= wins_a), X ~ Bin(n, 1/2),
/// n = wins_a + wins_b. All ties yield all_ties with significant = false.
SignTestResult sign_test(std::span<const double> scores_a, std::span<const double> scores_b,
                         double alpha = 0.05);

/// P(X >= k) for X ~ Binomial(n, 1/2).
double binomial_upper_tail(int n, int k);

struct ClassicArmaFit {
    Parameters params;
    double sse = 0.0;
    bool converged = true;
};

/// Conditional-sum-of-squares ARMA: minimizes the squared recursive errors
/// with Levenberg-Marquardt from three seeded starts. sigma is stored as 0.
ClassicArmaFit fit_classic_arma(const ModelStructure& structure, const Values& series,
                                const Eigen::MatrixXd& cross, std::uint64_t seed = 0,
                                int max_evaluations = 400);

/// ARMA predictive for position T with `sigma` added to its variance.
Moments smoothed_arma_predictive(const ModelStructure& structure, const Parameters& arma_params,
                                 const Values& history, const Eigen::MatrixXd& cross_history,
                                 std::span<const double> cross_next, double sigma);

/// Rolling one-step score of a classic ARMA fit with variance gamma + sigma.
double arma_sequential_score(const ModelStructure& structure, const Parameters& arma_params,
                             const Values& series_full, const Eigen::MatrixXd& cross_full,
                             std::size_t holdout_start, double sigma);

/// Builds a collection from the "collection" block of an experiment spec:
/// a CSV file, a model file to simulate from, or the random generator.
Collection generate_collection(const nlohmann::json& collection_spec, std::uint64_t seed,
                               const std::filesystem::path& base_dir = {});

/// Executes a declarative experiment (see docs/formats.md). `base_dir`
/// resolves relative file paths inside the experiment file.
nlohmann::json run_experiment(const nlohmann::json& spec,
                              const std::filesystem::path& base_dir = {});

/// Flattens the cell table of a report to CSV (method,rate,mean_score,n).
std::string report_to_csv(const nlohmann::json& report);

}  // namespace sarma

#endif  // SARMA_EVALUATION_HPP

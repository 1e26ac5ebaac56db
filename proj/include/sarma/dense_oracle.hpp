#ifndef SARMA_DENSE_ORACLE_HPP
#define SARMA_DENSE_ORACLE_HPP

#include "sarma/inference.hpp"

namespace sarma {

struct DenseResult {
    SuffStats stats;
    Gaussian last;
    double loglik = 0.0;
};

inline constexpr int kDenseOracleMaxCliques = 64;

/// Brute-force counterpart of the clique chain: builds the joint Gaussian over
/// every latent error and every modelled observation by unrolling the mean
/// equation, then conditions on all evidence at once by block partitioning.
/// Cost is cubic in T; throws TooLarge beyond kDenseOracleMaxCliques cliques.
DenseResult dense_oracle(const ModelStructure& structure, const Parameters& params,
                         const Values& observations, const Eigen::MatrixXd& cross);

}  // namespace sarma

#endif  // SARMA_DENSE_ORACLE_HPP

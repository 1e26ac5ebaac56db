#ifndef SARMA_SIMULATE_HPP
#define SARMA_SIMULATE_HPP

#include <cstdint>
#include <functional>

#include "sarma/data.hpp"
#include "sarma/model.hpp"

namespace sarma {

/// Draws T steps from the generative model. Terms that reference t < 0 are
/// zero; series are visited in a topological order of the lag-0 cross
/// references at every step.
Collection simulate(const MultiModel& model, int T, std::uint64_t seed);

/// As simulate, with the error draw at (series, t) scaled by
/// noise_scale(series, t). Used for contaminated-holdout studies.
Collection simulate(const MultiModel& model, int T, std::uint64_t seed,
                    const std::function<double(const std::string&, int)>& noise_scale);

/// Series ids ordered so every lag-0 cross predictor's source precedes its
/// target. Throws CyclicCrossPredictors when no such order exists.
std::vector<std::string> topological_order(const MultiModel& model);

}  // namespace sarma

#endif  // SARMA_SIMULATE_HPP

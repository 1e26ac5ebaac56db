#ifndef SARMA_SEARCH_HPP
#define SARMA_SEARCH_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sarma/data.hpp"
#include "sarma/estimation.hpp"
#include "sarma/model.hpp"

namespace sarma {

inline constexpr int kStructuralValidationLen = 12;

struct SearchConfig {
    EmConfig em;
    Beta0Mode beta0_mode = Beta0Mode::FixedOne;
    int validation_len = kStructuralValidationLen;
    /// Cap on max(p, q, xp lag); unrestricted when empty.
    std::optional<int> max_lag;
    std::vector<int> candidate_lags{1, 12};
    bool fill_cross = true;
};

struct CandidateScore {
    ModelStructure structure;
    double score = 0.0;
};

struct SearchResult {
    ModelStructure structure;
    double score = 0.0;     // structural validation score of the winner
    Parameters params;      // refit on the full training series
    std::vector<CandidateScore> log;
    std::vector<std::string> warnings;
};

/// Last `validation_len` positions become the structural validation set.
std::pair<Values, Values> split_structural(const Values& train,
                                           int validation_len = kStructuralValidationLen);

/// Total order used to compare candidates: higher score, then smaller p+q,
/// then smaller q.
bool better_candidate(const CandidateScore& a, const CandidateScore& b);

/// Greedy (p, q) search on a training series.
SearchResult search_pq(const TimeSeries& train, const SearchConfig& config);

/// Ranks every (other series, lag) by the validation score of a p = q = 0
/// model with that single cross predictor. `collection` holds training data.
std::vector<CrossPredictor> rank_cross_predictors(const std::string& target_id,
                                                  const Collection& collection,
                                                  const SearchConfig& config,
                                                  std::vector<std::string>* warnings = nullptr,
                                                  std::vector<CandidateScore>* log = nullptr);

/// Greedy search over p, q and the cross-predictor set.
SearchResult search_xp(const std::string& target_id, const Collection& collection,
                       const SearchConfig& config);

}  // namespace sarma

#endif  // SARMA_SEARCH_HPP

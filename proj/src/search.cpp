#include "sarma/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "sarma/errors.hpp"
#include "sarma/evaluation.hpp"

namespace sarma {

std::pair<Values, Values> split_structural(const Values& train, int validation_len) {
    if (validation_len < 1) fail(ErrorCode::InvalidArgument, "validation length must be positive");
    if (train.size() <= static_cast<std::size_t>(validation_len)) {
        fail(ErrorCode::TooShort, "training series of length " + std::to_string(train.size()) +
                                      " leaves nothing for structural training");
    }
    const auto cut = train.end() - validation_len;
    return {Values(train.begin(), cut), Values(cut, train.end())};
}

bool better_candidate(const CandidateScore& a, const CandidateScore& b) {
    if (a.score != b.score) return a.score > b.score;
    const int ca = a.structure.p + a.structure.q;
    const int cb = b.structure.p + b.structure.q;
    if (ca != cb) return ca < cb;
    if (a.structure.q != b.structure.q) return a.structure.q < b.structure.q;
    return a.structure.cross_count() < b.structure.cross_count();
}

namespace {

constexpr double kFailedScore = -std::numeric_limits<double>::infinity();

std::string key_of(const ModelStructure& s) {
    std::string k = std::to_string(s.p) + "," + std::to_string(s.q);
    for (const auto& xp : s.cross_predictors) k += "|" + xp.source + ":" + std::to_string(xp.lag);
    return k;
}

/// Fits candidates on the structural training part and scores them on the
/// structural validation part, caching by structure.
class Evaluator {
public:
    Evaluator(const TimeSeries& target, const Collection* collection, const SearchConfig& config)
        : target_(target), collection_(collection), config_(config) {
        const auto [train, validation] = split_structural(target.values, config.validation_len);
        train_len_ = train.size();
    }

    CandidateScore operator()(const ModelStructure& s) {
        const std::string key = key_of(s);
        if (auto it = cache_.find(key); it != cache_.end()) return {s, it->second};
        const double score = evaluate(s);
        cache_.emplace(key, score);
        log_.push_back({s, score});
        return {s, score};
    }

    std::vector<CandidateScore>& log() { return log_; }

private:
    double evaluate(const ModelStructure& s) const {
        try {
            Eigen::MatrixXd cross(static_cast<Eigen::Index>(target_.size()), 0);
            if (s.cross_count() > 0) {
                cross = cross_matrix(s, *collection_, target_.size(), config_.fill_cross);
            }
            const Values train(target_.values.begin(), target_.values.begin() + static_cast<long>(train_len_));
            const Eigen::MatrixXd cross_train = cross.topRows(static_cast<Eigen::Index>(train_len_));
            const FitResult fit = fit_em(s, train, cross_train, config_.em);
            const double score = sequential_predictive_score(s, fit.params, target_.values, cross, train_len_);
            return std::isfinite(score) ? score : kFailedScore;
        } catch (const Error&) {
            return kFailedScore;
        }
    }

    const TimeSeries& target_;
    const Collection* collection_;
    const SearchConfig& config_;
    std::size_t train_len_ = 0;
    std::map<std::string, double> cache_;
    std::vector<CandidateScore> log_;
};

ModelStructure make_structure(int p, int q, const SearchConfig& config, std::vector<CrossPredictor> xp = {}) {
    ModelStructure s;
    s.p = p;
    s.q = q;
    s.beta0_mode = config.beta0_mode;
    s.cross_predictors = std::move(xp);
    return s;
}

bool within_cap(int lag, const SearchConfig& config) { return !config.max_lag || lag <= *config.max_lag; }

/// The p/q greedy skeleton shared by search_pq and search_xp. `level` scores a
/// (p, q) pair given the structure of the current incumbent (used to carry
/// the cross-predictor set).
template <typename Level>
CandidateScore greedy_pq(const SearchConfig& config, Level&& level) {
    CandidateScore incumbent = level(0, 0, ModelStructure{});
    for (int p = 0;; ++p) {
        if (!within_cap(p, config)) break;
        // Inner q loop from the carried q; each q is tried at most once per level.
        CandidateScore best = p == 0 ? incumbent : level(p, incumbent.structure.q, incumbent.structure);
        std::set<int> visited{best.structure.q};
        bool moved = true;
        while (moved) {
            moved = false;
            for (const int dq : {+1, -1}) {
                const int q = best.structure.q + dq;
                if (q < 0 || !within_cap(q, config) || visited.contains(q)) continue;
                visited.insert(q);
                CandidateScore c = level(p, q, best.structure);
                if (better_candidate(c, best)) {
                    best = std::move(c);
                    moved = true;
                    break;
                }
            }
        }
        if (p == 0) {
            incumbent = best;
            continue;
        }
        // A new p-level must strictly beat the previous one.
        if (!(best.score > incumbent.score)) break;
        incumbent = best;
    }
    return incumbent;
}

}  // namespace

SearchResult search_pq(const TimeSeries& train, const SearchConfig& config) {
    config.em.validate();
    Evaluator eval(train, nullptr, config);
    const CandidateScore best =
        greedy_pq(config, [&](int p, int q, const ModelStructure&) { return eval(make_structure(p, q, config)); });

    SearchResult result;
    result.structure = best.structure;
    result.score = best.score;
    result.log = std::move(eval.log());
    result.params = fit_em(best.structure, train.values, Eigen::MatrixXd(static_cast<Eigen::Index>(train.size()), 0),
                           config.em)
                        .params;
    return result;
}

namespace {

std::vector<CrossPredictor> rank_with(const std::string& target_id, const Collection& collection,
                                      const SearchConfig& config, Evaluator& eval,
                                      std::vector<std::string>* warnings) {
    const TimeSeries& target = collection.at(target_id);
    std::vector<int> lags = config.candidate_lags;
    std::sort(lags.begin(), lags.end());
    lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
    std::vector<CandidateScore> scored;
    for (const auto& [id, source] : collection.series) {  // std::map keeps ids lexicographic
        if (id == target_id) continue;
        for (const int lag : lags) {
            if (lag < 0 || !within_cap(lag, config)) continue;
            const bool covered = source.size() + static_cast<std::size_t>(lag) >= target.size() &&
                                 source.observed_count() >= 2 &&
                                 (config.fill_cross || source.observed_count() == source.size());
            if (!covered) {
                if (warnings) {
                    warnings->push_back("skipping cross predictor " + id + ":" + std::to_string(lag) +
                                        ": source lacks coverage");
                }
                continue;
            }
            scored.push_back(eval(make_structure(0, 0, config, {{id, lag}})));
        }
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const CandidateScore& a, const CandidateScore& b) { return a.score > b.score; });
    std::vector<CrossPredictor> ranked;
    for (const auto& c : scored) ranked.push_back(c.structure.cross_predictors.front());
    return ranked;
}

}  // namespace

std::vector<CrossPredictor> rank_cross_predictors(const std::string& target_id, const Collection& collection,
                                                  const SearchConfig& config, std::vector<std::string>* warnings,
                                                  std::vector<CandidateScore>* log) {
    Evaluator eval(collection.at(target_id), &collection, config);
    auto ranked = rank_with(target_id, collection, config, eval, warnings);
    if (log) log->insert(log->end(), eval.log().begin(), eval.log().end());
    return ranked;
}

SearchResult search_xp(const std::string& target_id, const Collection& collection, const SearchConfig& config) {
    config.em.validate();
    SearchResult result;
    const TimeSeries& target = collection.at(target_id);
    Evaluator eval(target, &collection, config);
    const std::vector<CrossPredictor> ranked = rank_with(target_id, collection, config, eval, &result.warnings);

    auto rank_of = [&](const CrossPredictor& xp) {
        return std::find(ranked.begin(), ranked.end(), xp) - ranked.begin();
    };

    auto by_rank = [&](std::vector<CrossPredictor>& set) {
        std::stable_sort(set.begin(), set.end(),
                         [&](const CrossPredictor& a, const CrossPredictor& b) { return rank_of(a) < rank_of(b); });
    };

    // Cross-predictor loop for a fixed (p, q), starting from `carried`.
    auto level = [&](int p, int q, const ModelStructure& carried) {
        std::vector<CrossPredictor> set = carried.cross_predictors;
        CandidateScore best = eval(make_structure(p, q, config, set));
        bool first_add = true;
        bool first_add_failed = false;
        for (const auto& xp : ranked) {
            if (std::find(set.begin(), set.end(), xp) != set.end()) continue;
            auto trial = set;
            trial.push_back(xp);
            by_rank(trial);
            CandidateScore c = eval(make_structure(p, q, config, trial));
            if (c.score > best.score) {
                set = std::move(trial);
                best = std::move(c);
                first_add = false;
                continue;
            }
            first_add_failed = first_add;
            break;
        }
        if (first_add_failed) {
            // Delete in reverse rank order while that helps.
            while (!set.empty()) {
                auto trial = set;
                trial.pop_back();
                CandidateScore c = eval(make_structure(p, q, config, trial));
                if (!better_candidate(c, best)) break;
                set = std::move(trial);
                best = std::move(c);
            }
        }
        return best;
    };

    const CandidateScore best = greedy_pq(config, level);
    result.structure = best.structure;
    result.score = best.score;
    result.log = std::move(eval.log());
    Eigen::MatrixXd cross(static_cast<Eigen::Index>(target.size()), 0);
    if (best.structure.cross_count() > 0) cross = cross_matrix(best.structure, collection, target.size(), config.fill_cross);
    result.params = fit_em(best.structure, target.values, cross, config.em).params;
    return result;
}

}  // namespace sarma

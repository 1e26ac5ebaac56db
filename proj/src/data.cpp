#include "sarma/data.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sarma/errors.hpp"

namespace sarma {

std::size_t TimeSeries::observed_count() const {
    return static_cast<std::size_t>(
        std::count_if(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }));
}

void Collection::add(TimeSeries s) {
    if (series.contains(s.id)) {
        fail(ErrorCode::InvalidArgument, "duplicate series id '" + s.id + "'");
    }
    order.push_back(s.id);
    series.emplace(s.id, std::move(s));
}

const TimeSeries& Collection::at(const std::string& id) const {
    auto it = series.find(id);
    if (it == series.end()) {
        fail(ErrorCode::InvalidArgument, "unknown series id '" + id + "'");
    }
    return it->second;
}

std::size_t Collection::max_length() const {
    std::size_t n = 0;
    for (const auto& [id, s] : series) n = std::max(n, s.size());
    return n;
}

TimeSeries standardize(const TimeSeries& series, std::optional<std::size_t> training_len) {
    const std::size_t limit = std::min(training_len.value_or(series.size()), series.size());
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < limit; ++t) {
        if (series.values[t]) {
            sum += *series.values[t];
            ++n;
        }
    }
    if (n < 2) {
        fail(ErrorCode::TooShort, "standardize needs at least 2 observed values in '" + series.id + "'");
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t = 0; t < limit; ++t) {
        if (series.values[t]) ss += (*series.values[t] - mean) * (*series.values[t] - mean);
    }
    const double std = std::sqrt(ss / static_cast<double>(n));
    if (!(std > 0.0) || std <= 1e-300) {
        fail(ErrorCode::ConstantSeries, "series '" + series.id + "' has constant observed values");
    }
    return standardize_with(series, StandardizeRecord{mean, std});
}

TimeSeries standardize_with(const TimeSeries& series, const StandardizeRecord& record) {
    if (!(record.std > 0.0)) fail(ErrorCode::InvalidArgument, "standardize record needs std > 0");
    TimeSeries out = series;
    for (auto& v : out.values) {
        if (v) v = record.apply(*v);
    }
    out.transform = record;
    return out;
}

TimeSeries unstandardize(const TimeSeries& series) {
    TimeSeries out = series;
    if (!series.transform) return out;
    for (auto& v : out.values) {
        if (v) v = series.transform->invert(*v);
    }
    out.transform.reset();
    return out;
}

TimeSeries difference(const TimeSeries& series, int d) {
    if (d < 0) fail(ErrorCode::InvalidArgument, "difference order must be nonnegative");
    if (series.size() <= static_cast<std::size_t>(d)) {
        fail(ErrorCode::TooShort, "series '" + series.id + "' too short to difference " +
                                      std::to_string(d) + " times");
    }
    TimeSeries out = series;
    for (int pass = 0; pass < d; ++pass) {
        Values next(out.values.size() - 1);
        for (std::size_t t = 0; t + 1 < out.values.size(); ++t) {
            const auto& a = out.values[t];
            const auto& b = out.values[t + 1];
            if (a && b) next[t] = *b - *a;
        }
        out.values = std::move(next);
    }
    out.diff_order = series.diff_order + d;
    return out;
}

std::vector<Moments> undifference_forecast(const TimeSeries& base_history,
                                           std::span<const Moments> diffs, int d) {
    if (d < 0) fail(ErrorCode::InvalidArgument, "difference order must be nonnegative");
    std::vector<Moments> out(diffs.begin(), diffs.end());
    if (d == 0) return out;
    const std::size_t n = base_history.size();
    if (n < static_cast<std::size_t>(d)) {
        fail(ErrorCode::MissingBase, "base history shorter than differencing order");
    }
    for (std::size_t i = n - d; i < n; ++i) {
        if (!base_history.values[i]) {
            fail(ErrorCode::MissingBase, "trailing base value at position " + std::to_string(i) +
                                             " is missing");
        }
    }

    // last_k[j] = last observed value of the j-times differenced base series.
    std::vector<double> tail;
    for (std::size_t i = n - d; i < n; ++i) tail.push_back(*base_history.values[i]);
    std::vector<double> last_k(d);
    for (int j = 0; j < d; ++j) {
        last_k[j] = tail.back();
        std::vector<double> next;
        for (std::size_t i = 0; i + 1 < tail.size(); ++i) next.push_back(tail[i + 1] - tail[i]);
        tail = std::move(next);
    }

    // Each integration pass is a cumulative sum; track the weights of the
    // original increments so variances follow the same linear map.
    const std::size_t h = diffs.size();
    std::vector<std::vector<double>> weights(h, std::vector<double>(h, 0.0));
    for (std::size_t k = 0; k < h; ++k) weights[k][k] = 1.0;
    std::vector<double> means(h);
    for (std::size_t k = 0; k < h; ++k) means[k] = diffs[k].mean;
    for (int level = d - 1; level >= 0; --level) {
        double running = last_k[level];
        std::vector<double> acc(h, 0.0);
        for (std::size_t k = 0; k < h; ++k) {
            running += means[k];
            means[k] = running;
            for (std::size_t j = 0; j < h; ++j) acc[j] += weights[k][j];
            weights[k] = acc;
        }
    }
    for (std::size_t k = 0; k < h; ++k) {
        double var = 0.0;
        for (std::size_t j = 0; j < h; ++j) var += weights[k][j] * weights[k][j] * diffs[j].variance;
        out[k] = Moments{means[k], var};
    }
    return out;
}

TimeSeries make_missing(const TimeSeries& series, double rate, std::uint64_t seed,
                        std::size_t holdout_len) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        fail(ErrorCode::InvalidArgument, "missing rate must lie in [0, 1)");
    }
    TimeSeries out = series;
    if (rate == 0.0) return out;
    std::mt19937_64 rng(seed);
    const std::size_t train = series.size() > holdout_len ? series.size() - holdout_len : 0;
    for (std::size_t t = 0; t < train; ++t) {
        // 53 high bits -> uniform [0, 1), identical on every standard library.
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u < rate) out.values[t].reset();
    }
    return out;
}

namespace {

std::vector<std::size_t> observed_positions(const Values& values) {
    std::vector<std::size_t> obs;
    for (std::size_t t = 0; t < values.size(); ++t) {
        if (values[t]) obs.push_back(t);
    }
    return obs;
}

double line_through(std::size_t t0, double y0, std::size_t t1, double y1, std::size_t t) {
    const double slope = (y1 - y0) / (static_cast<double>(t1) - static_cast<double>(t0));
    return y0 + slope * (static_cast<double>(t) - static_cast<double>(t0));
}

double fill_value(const Values& values, const std::vector<std::size_t>& obs, std::size_t t) {
    auto upper = std::lower_bound(obs.begin(), obs.end(), t);
    if (upper == obs.begin()) {
        return line_through(obs[0], *values[obs[0]], obs[1], *values[obs[1]], t);
    }
    if (upper == obs.end()) {
        const std::size_t a = obs[obs.size() - 2];
        const std::size_t b = obs[obs.size() - 1];
        return line_through(a, *values[a], b, *values[b], t);
    }
    const std::size_t b = *upper;
    const std::size_t a = *(upper - 1);
    return line_through(a, *values[a], b, *values[b], t);
}

}  // namespace

TimeSeries fill_in(const TimeSeries& series) {
    return fill_initial_segment(series, series.size());
}

TimeSeries fill_initial_segment(const TimeSeries& series, std::size_t count) {
    TimeSeries out = series;
    count = std::min(count, series.size());
    bool any_missing = false;
    for (std::size_t t = 0; t < count; ++t) any_missing |= !series.values[t].has_value();
    if (!any_missing) return out;
    const auto obs = observed_positions(series.values);
    if (obs.size() < 2) {
        fail(ErrorCode::TooShort, "fill_in needs at least 2 observed values in '" + series.id + "'");
    }
    for (std::size_t t = 0; t < count; ++t) {
        if (!series.values[t]) out.values[t] = fill_value(series.values, obs, t);
    }
    return out;
}

}  // namespace sarma

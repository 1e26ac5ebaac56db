#ifndef SARMA_DATA_HPP
#define SARMA_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sarma {

/// Observation sequence; std::nullopt marks a missing entry.
using Values = std::vector<std::optional<double>>;

struct StandardizeRecord {
    double mean = 0.0;
    double std = 1.0;

    double apply(double x) const { return (x - mean) / std; }
    double invert(double z) const { return z * std + mean; }
};

struct TimeSeries {
    std::string id;
    Values values;
    std::optional<StandardizeRecord> transform;
    int diff_order = 0;

    std::size_t size() const { return values.size(); }
    std::size_t observed_count() const;
};

struct Collection {
    std::map<std::string, TimeSeries> series;
    int holdout_len = 0;

    /// Ids in the order they were inserted into the CSV / builder.
    std::vector<std::string> order;

    void add(TimeSeries s);
    const TimeSeries& at(const std::string& id) const;
    std::size_t max_length() const;
};

/// Scalar Gaussian used for forecast moments.
struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

// Standardization over observed entries, population (divide-by-n) convention.
// When `training_len` is set only the first `training_len` positions feed the
// statistics; the record is then applied to the whole series.
TimeSeries standardize(const TimeSeries& series,
                       std::optional<std::size_t> training_len = std::nullopt);
TimeSeries standardize_with(const TimeSeries& series, const StandardizeRecord& record);
TimeSeries unstandardize(const TimeSeries& series);

TimeSeries difference(const TimeSeries& series, int d);

/// Inverts `d` differencing passes on forecast moments. `base_history` is the
/// level series the differences were taken from; its last `d` values must be
/// observed. Increments are treated as independent when propagating variance.
std::vector<Moments> undifference_forecast(const TimeSeries& base_history,
                                           std::span<const Moments> diffs, int d);

/// Bernoulli(rate) missingness over the first size()-holdout_len positions.
TimeSeries make_missing(const TimeSeries& series, double rate, std::uint64_t seed,
                        std::size_t holdout_len = 0);

/// Linear interpolation inside gaps, linear extrapolation from the two nearest
/// observed points at the ends.
TimeSeries fill_in(const TimeSeries& series);

/// Fills only the missing entries among the first `count` positions, using the
/// same interpolation rule as fill_in over the whole series.
TimeSeries fill_initial_segment(const TimeSeries& series, std::size_t count);

Collection read_collection(const std::filesystem::path& path);
void write_collection(const Collection& collection, const std::filesystem::path& path);
Collection parse_collection_csv(const std::string& text);
std::string format_collection_csv(const Collection& collection);

}  // namespace sarma

#endif  // SARMA_DATA_HPP

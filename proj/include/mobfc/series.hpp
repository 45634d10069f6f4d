#pragma once

#include <chrono>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mobfc/csv.hpp"
#include "mobfc/ingest.hpp"
#include "mobfc/timestamp.hpp"

namespace mobfc::ts {

enum class Granularity { day, hour };

inline std::chrono::seconds step_of(Granularity g) {
    return g == Granularity::day ? std::chrono::seconds{86400} : std::chrono::seconds{3600};
}

inline const char* to_string(Granularity g) { return g == Granularity::day ? "day" : "hour"; }

inline std::optional<Granularity> parse_granularity(std::string_view s) {
    if (s == "day") return Granularity::day;
    if (s == "hour") return Granularity::hour;
    return std::nullopt;
}

// Evenly spaced observations: values[i] belongs to start + i * step.
struct TimeSeries {
    Timestamp start;
    Granularity granularity = Granularity::day;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    Timestamp time_at(std::size_t i) const {
        return start + step_of(granularity) * static_cast<std::int64_t>(i);
    }
};

inline Timestamp bucket_of(Timestamp t, Granularity g) {
    return g == Granularity::day ? t.floor_day() : t.floor_hour();
}

// Counts per bucket over [first bucket, last bucket], zero-filled. An explicit
// range widens the series beyond the observed data.
inline TimeSeries aggregate_counts(std::span<const Timestamp> times, Granularity g,
                                   std::optional<std::pair<Timestamp, Timestamp>> range = {}) {
    TimeSeries s;
    s.granularity = g;
    if (times.empty() && !range) return s;
    Timestamp lo, hi;
    if (range) {
        lo = bucket_of(range->first, g);
        hi = bucket_of(range->second, g);
    } else {
        lo = hi = bucket_of(times.front(), g);
    }
    for (auto t : times) {
        const auto b = bucket_of(t, g);
        if (range && (t < range->first || range->second < t))
            throw std::out_of_range("aggregate_counts: timestamp outside the requested range");
        if (b < lo) lo = b;
        if (hi < b) hi = b;
    }
    const auto step = step_of(g).count();
    s.start = lo;
    s.values.assign(static_cast<std::size_t>((hi - lo).count() / step + 1), 0.0);
    for (auto t : times) s.values[static_cast<std::size_t>((bucket_of(t, g) - lo).count() / step)] += 1.0;
    return s;
}

inline TimeSeries aggregate_counts(std::span<const TripRecord> trips, Granularity g) {
    std::vector<Timestamp> times;
    times.reserve(trips.size());
    for (const auto& t : trips) times.push_back(t.pickup_datetime);
    return aggregate_counts(times, g);
}

// Chronological split: train gets the first floor(ratio * n) points.
inline std::pair<TimeSeries, TimeSeries> split_train_test(const TimeSeries& s, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
    if (s.size() < 2) throw std::invalid_argument("split needs at least 2 points");
    const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(s.size())));
    if (n_train == 0 || n_train == s.size())
        throw std::invalid_argument("split would leave one side empty");
    TimeSeries train{s.start, s.granularity, {s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(n_train)}};
    TimeSeries test{s.time_at(n_train), s.granularity,
                    {s.values.begin() + static_cast<std::ptrdiff_t>(n_train), s.values.end()}};
    return {std::move(train), std::move(test)};
}

struct Deseasonalized {
    TimeSeries adjusted;
    std::vector<double> seasonal;  // one entry per phase, mean zero; phase = position mod period
};

inline Deseasonalized deseasonalize(const TimeSeries& s, std::size_t period = 7) {
    if (period < 2) throw std::invalid_argument("deseasonalize: period must be >= 2");
    if (s.size() < 2 * period)
        throw std::invalid_argument("deseasonalize: series shorter than two periods");
    std::vector<double> sum(period, 0.0);
    std::vector<std::size_t> cnt(period, 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        sum[i % period] += s.values[i];
        ++cnt[i % period];
    }
    std::vector<double> seasonal(period);
    double grand = 0.0;
    for (std::size_t j = 0; j < period; ++j) {
        seasonal[j] = sum[j] / static_cast<double>(cnt[j]);
        grand += seasonal[j];
    }
    grand /= static_cast<double>(period);
    for (auto& v : seasonal) v -= grand;
    Deseasonalized out{s, seasonal};
    for (std::size_t i = 0; i < s.size(); ++i) out.adjusted.values[i] -= seasonal[i % period];
    return out;
}

// `phase_offset` is the position of adjusted[0] in the series the seasonal
// profile was estimated on (the train length, when restoring a forecast).
inline TimeSeries reseasonalize(const TimeSeries& adjusted, std::span<const double> seasonal,
                                std::size_t phase_offset = 0) {
    TimeSeries out = adjusted;
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] += seasonal[(i + phase_offset) % seasonal.size()];
    return out;
}

inline double rmse(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) throw std::invalid_argument("rmse: length mismatch");
    if (predicted.empty()) throw std::invalid_argument("rmse: empty input");
    double ss = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = predicted[i] - actual[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(predicted.size()));
}

// CSV "timestamp,value".
inline void write_series_csv(std::ostream& out, const TimeSeries& s) {
    out << "timestamp,value\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out << s.time_at(i).to_string() << ',' << csv::format_double(s.values[i]) << '\n';
}

inline TimeSeries read_series_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> f;
    if (!reader.next(f) || f.size() != 2 || f[0] != "timestamp" || f[1] != "value")
        throw SchemaError("series CSV must have header timestamp,value");
    TimeSeries s;
    std::vector<Timestamp> times;
    while (reader.next(f)) {
        const auto t = f.size() == 2 ? parse_timestamp(f[0]) : std::nullopt;
        const auto v = f.size() == 2 ? csv::parse_number<double>(f[1]) : std::nullopt;
        if (!t || !v) throw SchemaError("series CSV line " + std::to_string(reader.line_number()) + " is malformed");
        times.push_back(*t);
        s.values.push_back(*v);
    }
    if (times.empty()) return s;
    s.start = times.front();
    if (times.size() >= 2) {
        const auto step = (times[1] - times[0]).count();
        if (step == 86400)
            s.granularity = Granularity::day;
        else if (step == 3600)
            s.granularity = Granularity::hour;
        else
            throw SchemaError("series CSV spacing must be one day or one hour");
        for (std::size_t i = 1; i < times.size(); ++i)
            if ((times[i] - times[i - 1]).count() != step)
                throw SchemaError("series CSV has gaps or uneven spacing");
    }
    return s;
}

}  // namespace mobfc::ts

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/features.hpp"
#include "mobfc/ingest.hpp"

namespace mobfc::eda {

// ---------------------------------------------------------------------------
// Histograms

struct Histogram {
    std::vector<double> bin_edges;  // size = counts.size() + 1
    std::vector<std::size_t> counts;
    std::size_t total = 0;
};

// Unit-width bins [lo, lo+1), ..., [hi, hi+1] for integer-valued data.
inline std::vector<double> integer_bins(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("integer_bins: hi < lo");
    std::vector<double> edges;
    for (int v = lo; v <= hi + 1; ++v) edges.push_back(v);
    return edges;
}

inline std::vector<double> uniform_bins(double lo, double hi, std::size_t n) {
    if (n == 0 || !(hi > lo)) throw std::invalid_argument("uniform_bins: need n > 0 and hi > lo");
    std::vector<double> edges(n + 1);
    for (std::size_t i = 0; i <= n; ++i) edges[i] = lo + (hi - lo) * static_cast<double>(i) / n;
    edges[n] = hi;
    return edges;
}

// Half-open bins [e_i, e_{i+1}); the last bin is closed. Values outside the
// edge range are rejected rather than silently dropped.
inline Histogram histogram(std::span<const double> values, std::vector<double> edges) {
    if (values.empty()) throw std::invalid_argument("histogram: empty input");
    if (edges.size() < 2) throw std::invalid_argument("histogram: need at least one bin");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw std::invalid_argument("histogram: edges must be strictly increasing");
    Histogram h;
    h.counts.assign(edges.size() - 1, 0);
    for (double v : values) {
        if (!(v >= edges.front() && v <= edges.back()))
            throw std::domain_error("histogram: value outside bin range");
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        std::size_t bin = static_cast<std::size_t>(it - edges.begin()) - 1;
        if (bin >= h.counts.size()) bin = h.counts.size() - 1;
        ++h.counts[bin];
    }
    h.total = values.size();
    h.bin_edges = std::move(edges);
    return h;
}

inline std::size_t mode_bin(const Histogram& h) {
    return static_cast<std::size_t>(std::max_element(h.counts.begin(), h.counts.end()) -
                                    h.counts.begin());
}

inline void write_csv(std::ostream& out, const Histogram& h) {
    out << "bin_lo,bin_hi,count\n";
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        out << csv::format_double(h.bin_edges[i]) << ',' << csv::format_double(h.bin_edges[i + 1])
            << ',' << h.counts[i] << '\n';
}

inline nlohmann::ordered_json to_json(const Histogram& h) {
    return {{"bin_edges", h.bin_edges}, {"counts", h.counts}, {"total", h.total}};
}

// ---------------------------------------------------------------------------
// Correlation

class UndefinedCorrelation : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson_correlation: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson_correlation: need at least 2 points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelation("pearson_correlation: zero variance");
    // sqrt of the product (not product of sqrts) keeps r(x, x) == 1 exactly.
    const double r = sxy / std::sqrt(sxx * syy);
    return std::clamp(r, -1.0, 1.0);
}

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

struct CorrelationMatrix {
    std::vector<std::string> labels;
    // nullopt marks a cell whose correlation is undefined (zero variance)
    std::vector<std::vector<std::optional<double>>> values;
};

// The diagonal is set to 1 by definition.
inline CorrelationMatrix correlation_matrix(const std::vector<NamedColumn>& columns) {
    CorrelationMatrix m;
    const std::size_t k = columns.size();
    for (const auto& c : columns) {
        if (c.values.size() != columns.front().values.size())
            throw std::invalid_argument("correlation_matrix: columns differ in length");
        m.labels.push_back(c.name);
    }
    m.values.assign(k, std::vector<std::optional<double>>(k));
    for (std::size_t i = 0; i < k; ++i) {
        m.values[i][i] = 1.0;
        for (std::size_t j = i + 1; j < k; ++j) {
            std::optional<double> r;
            try {
                r = pearson_correlation(columns[i].values, columns[j].values);
            } catch (const UndefinedCorrelation&) {
            }
            m.values[i][j] = r;
            m.values[j][i] = r;
        }
    }
    return m;
}

inline void write_csv(std::ostream& out, const CorrelationMatrix& m) {
    out << "var_x,var_y,r\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i)
        for (std::size_t j = 0; j < m.labels.size(); ++j)
            out << m.labels[i] << ',' << m.labels[j] << ','
                << (m.values[i][j] ? csv::format_double(*m.values[i][j]) : std::string{}) << '\n';
}

inline nlohmann::ordered_json to_json(const CorrelationMatrix& m) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : m.values) {
        nlohmann::ordered_json r = nlohmann::ordered_json::array();
        for (const auto& v : row) r.push_back(v ? nlohmann::ordered_json(*v) : nullptr);
        rows.push_back(r);
    }
    return {{"labels", m.labels}, {"values", rows}};
}

// The four variables examined in the taxi correlation figure.
inline CorrelationMatrix taxi_correlation(const std::vector<FeatureRow>& rows) {
    std::vector<NamedColumn> cols{{"pickup_day", {}},
                                  {"pickup_hour", {}},
                                  {"trip_duration_min", {}},
                                  {"trip_distance", {}}};
    for (auto& c : cols) c.values.reserve(rows.size());
    for (const auto& r : rows) {
        cols[0].values.push_back(r.pickup_day);
        cols[1].values.push_back(r.pickup_hour);
        cols[2].values.push_back(r.trip_duration_min);
        cols[3].values.push_back(r.trip_distance);
    }
    return correlation_matrix(cols);
}

// ---------------------------------------------------------------------------
// Demand counts

enum class DemandKey { day_of_week, hour_of_day, day_of_month, dropoff_hour };

struct KeyedCounts {
    DemandKey key = DemandKey::day_of_week;
    int first_value = 0;               // key value of counts[0]
    std::vector<std::size_t> counts;  // zero-filled over the full key domain

    std::size_t total() const {
        std::size_t s = 0;
        for (auto c : counts) s += c;
        return s;
    }
    int argmax() const {
        return first_value + static_cast<int>(std::max_element(counts.begin(), counts.end()) -
                                              counts.begin());
    }
};

inline const char* key_name(DemandKey k) {
    switch (k) {
        case DemandKey::day_of_week: return "dow";
        case DemandKey::hour_of_day: return "hod";
        case DemandKey::day_of_month: return "day";
        case DemandKey::dropoff_hour: return "dropoff_hod";
    }
    return "?";
}

namespace detail {

inline std::pair<int, int> key_domain(DemandKey k) {
    switch (k) {
        case DemandKey::day_of_week: return {0, 6};
        case DemandKey::hour_of_day: return {0, 23};
        case DemandKey::day_of_month: return {1, 31};
        case DemandKey::dropoff_hour: return {0, 23};
    }
    return {0, 0};
}

inline int key_of(const FoodOrderRecord& r, DemandKey k) {
    switch (k) {
        case DemandKey::day_of_week: return r.day_of_week;
        case DemandKey::hour_of_day: return r.hour_of_day;
        default: throw std::invalid_argument("food orders carry only day-of-week and hour keys");
    }
}

inline int key_of(const FeatureRow& r, DemandKey k) {
    switch (k) {
        case DemandKey::day_of_week: return r.pickup_dow;
        case DemandKey::hour_of_day: return r.pickup_hour;
        case DemandKey::day_of_month: return r.pickup_day;
        case DemandKey::dropoff_hour: return r.dropoff_hour;
    }
    return 0;
}

}  // namespace detail

template <class Record>
KeyedCounts demand_by_key(std::span<const Record> records, DemandKey key) {
    const auto [lo, hi] = detail::key_domain(key);
    KeyedCounts out{key, lo, std::vector<std::size_t>(static_cast<std::size_t>(hi - lo + 1), 0)};
    for (const auto& r : records) {
        const int v = detail::key_of(r, key);
        if (v < lo || v > hi) throw std::domain_error("demand_by_key: key value outside domain");
        ++out.counts[static_cast<std::size_t>(v - lo)];
    }
    return out;
}

template <class Record>
KeyedCounts demand_by_key(const std::vector<Record>& records, DemandKey key) {
    return demand_by_key(std::span<const Record>(records), key);
}

inline void write_csv(std::ostream& out, const KeyedCounts& k) {
    out << key_name(k.key) << ",count\n";
    for (std::size_t i = 0; i < k.counts.size(); ++i)
        out << k.first_value + static_cast<int>(i) << ',' << k.counts[i] << '\n';
}

// ---------------------------------------------------------------------------
// Rankings

using Ranking = std::vector<std::pair<std::int64_t, std::size_t>>;

// Descending by count, ties by ascending id.
template <class Map>
Ranking top_n(const Map& counts, std::size_t n) {
    Ranking all(counts.begin(), counts.end());
    auto cmp = [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    };
    n = std::min(n, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), cmp);
    all.resize(n);
    return all;
}

template <class Fn>
std::unordered_map<std::int64_t, std::size_t> count_by(const std::vector<FoodOrderRecord>& orders,
                                                        Fn&& id_of) {
    std::unordered_map<std::int64_t, std::size_t> counts;
    for (const auto& o : orders) ++counts[id_of(o)];
    return counts;
}

inline void write_csv(std::ostream& out, const Ranking& r, const std::string& id_column) {
    out << "rank," << id_column << ",count\n";
    for (std::size_t i = 0; i < r.size(); ++i)
        out << i + 1 << ',' << r[i].first << ',' << r[i].second << '\n';
}

// ---------------------------------------------------------------------------
// Grouped duration statistics

struct GroupedStat {
    int group_key = 0;
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double p25 = 0.0;
    double p75 = 0.0;
};

// Lower nearest-rank quantile of sorted data: sorted[floor(q * (n - 1))].
inline double lower_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("lower_quantile: empty input");
    const auto idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(sorted.size() - 1)));
    return sorted[std::min(idx, sorted.size() - 1)];
}

struct GroupedStatsOptions {
    std::optional<double> max_duration_min = 180.0;  // nullopt keeps all trips
};

inline std::vector<GroupedStat> grouped_duration_stats(const std::vector<FeatureRow>& rows,
                                                       DemandKey key,
                                                       const GroupedStatsOptions& opts = {}) {
    if (rows.empty()) throw std::invalid_argument("grouped_duration_stats: empty input");
    std::map<int, std::vector<double>> groups;
    for (const auto& r : rows) {
        if (opts.max_duration_min && r.trip_duration_min > *opts.max_duration_min) continue;
        groups[detail::key_of(r, key)].push_back(r.trip_duration_min);
    }
    std::vector<GroupedStat> out;
    for (auto& [k, v] : groups) {
        std::sort(v.begin(), v.end());
        double sum = 0.0;
        for (double d : v) sum += d;
        out.push_back({k, v.size(), sum / static_cast<double>(v.size()), lower_quantile(v, 0.5),
                       lower_quantile(v, 0.25), lower_quantile(v, 0.75)});
    }
    return out;
}

inline void write_csv(std::ostream& out, const std::vector<GroupedStat>& stats,
                      const std::string& key_column) {
    out << key_column << ",count,mean,median,p25,p75\n";
    for (const auto& s : stats)
        out << s.group_key << ',' << s.count << ',' << csv::format_double(s.mean) << ','
            << csv::format_double(s.median) << ',' << csv::format_double(s.p25) << ','
            << csv::format_double(s.p75) << '\n';
}

inline nlohmann::ordered_json to_json(const std::vector<GroupedStat>& stats) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& s : stats)
        arr.push_back({{"key", s.group_key}, {"count", s.count}, {"mean", s.mean},
                       {"median", s.median}, {"p25", s.p25}, {"p75", s.p75}});
    return arr;
}

}  // namespace mobfc::eda

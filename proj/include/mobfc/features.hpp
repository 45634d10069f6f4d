#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/ingest.hpp"
#include "mobfc/timestamp.hpp"

namespace mobfc {

struct FeatureRow {
    int pickup_hour = 0;
    int pickup_day = 1;
    int pickup_month = 1;
    int pickup_dow = 0;  // Monday=0
    int dropoff_hour = 0;
    double trip_duration_min = 0.0;
    std::int64_t passenger_count = 0;
    double trip_distance = 0.0;
    double pickup_lon = 0.0;
    double pickup_lat = 0.0;
    double dropoff_lon = 0.0;
    double dropoff_lat = 0.0;

    bool operator==(const FeatureRow&) const = default;
};

inline constexpr const char* kDayNames[7] = {"Monday", "Tuesday",  "Wednesday", "Thursday",
                                             "Friday", "Saturday", "Sunday"};

inline double trip_duration_minutes(Timestamp pickup, Timestamp dropoff) {
    const auto secs = (dropoff - pickup).count();
    if (secs < 0) throw std::invalid_argument("dropoff precedes pickup");
    return static_cast<double>(secs) / 60.0;
}

inline FeatureRow derive_features(const TripRecord& r) {
    FeatureRow f;
    f.pickup_hour = r.pickup_datetime.hour();
    f.pickup_day = static_cast<int>(r.pickup_datetime.day());
    f.pickup_month = static_cast<int>(r.pickup_datetime.month());
    f.pickup_dow = r.pickup_datetime.day_of_week();
    f.dropoff_hour = r.dropoff_datetime.hour();
    f.trip_duration_min = trip_duration_minutes(r.pickup_datetime, r.dropoff_datetime);
    f.passenger_count = r.passenger_count;
    f.trip_distance = r.trip_distance;
    f.pickup_lon = r.pickup_lon;
    f.pickup_lat = r.pickup_lat;
    f.dropoff_lon = r.dropoff_lon;
    f.dropoff_lat = r.dropoff_lat;
    return f;
}

// Disagreement between the reported trip_time_secs and the timestamp span.
// Reported only; the timestamp span stays authoritative.
class DurationCheck {
public:
    void add(const TripRecord& r) {
        if (!r.trip_time_secs) return;
        const double span = static_cast<double>((r.dropoff_datetime - r.pickup_datetime).count());
        const double diff = std::abs(span - static_cast<double>(*r.trip_time_secs));
        ++compared_;
        sum_abs_ += diff;
        if (diff > max_abs_) max_abs_ = diff;
        if (diff > 0) ++mismatched_;
    }

    std::size_t compared() const { return compared_; }
    std::size_t mismatched() const { return mismatched_; }
    double max_abs_diff_secs() const { return max_abs_; }
    double mean_abs_diff_secs() const { return compared_ ? sum_abs_ / compared_ : 0.0; }

    nlohmann::ordered_json to_json() const {
        return {{"records_compared", compared_},
                {"records_mismatched", mismatched_},
                {"mean_abs_diff_secs", mean_abs_diff_secs()},
                {"max_abs_diff_secs", max_abs_}};
    }

private:
    std::size_t compared_ = 0;
    std::size_t mismatched_ = 0;
    double sum_abs_ = 0.0;
    double max_abs_ = 0.0;
};

inline const std::vector<std::string>& feature_columns() {
    static const std::vector<std::string> cols{
        "pickup_hour",       "pickup_day",      "pickup_month",  "pickup_dow",
        "dropoff_hour",      "trip_duration_min", "passenger_count", "trip_distance",
        "pickup_lon",        "pickup_lat",      "dropoff_lon",   "dropoff_lat"};
    return cols;
}

inline void write_feature_row(std::ostream& out, const FeatureRow& f) {
    csv::write_row(out, {std::to_string(f.pickup_hour),
                         std::to_string(f.pickup_day),
                         std::to_string(f.pickup_month),
                         std::to_string(f.pickup_dow),
                         std::to_string(f.dropoff_hour),
                         csv::format_double(f.trip_duration_min),
                         std::to_string(f.passenger_count),
                         csv::format_double(f.trip_distance),
                         csv::format_double(f.pickup_lon),
                         csv::format_double(f.pickup_lat),
                         csv::format_double(f.dropoff_lon),
                         csv::format_double(f.dropoff_lat)});
}

inline void write_features_csv(std::ostream& out, const std::vector<FeatureRow>& rows) {
    csv::write_row(out, feature_columns());
    for (const auto& f : rows) write_feature_row(out, f);
}

inline std::vector<FeatureRow> read_features_csv(std::istream& in) {
    csv::Reader reader(in);
    std::vector<std::string> fields;
    if (!reader.next(fields) || fields != feature_columns())
        throw SchemaError("feature table header does not match the expected column order");
    std::vector<FeatureRow> rows;
    auto num = [&](std::size_t i, auto tag) {
        auto v = csv::parse_number<decltype(tag)>(fields.at(i));
        if (!v)
            throw SchemaError("feature table line " + std::to_string(reader.line_number()) +
                              ": bad value in column " + feature_columns()[i]);
        return *v;
    };
    while (reader.next(fields)) {
        if (fields.size() != feature_columns().size())
            throw SchemaError("feature table line " + std::to_string(reader.line_number()) +
                              ": wrong column count");
        FeatureRow f;
        f.pickup_hour = num(0, int{});
        f.pickup_day = num(1, int{});
        f.pickup_month = num(2, int{});
        f.pickup_dow = num(3, int{});
        f.dropoff_hour = num(4, int{});
        f.trip_duration_min = num(5, double{});
        f.passenger_count = num(6, std::int64_t{});
        f.trip_distance = num(7, double{});
        f.pickup_lon = num(8, double{});
        f.pickup_lat = num(9, double{});
        f.dropoff_lon = num(10, double{});
        f.dropoff_lat = num(11, double{});
        rows.push_back(f);
    }
    return rows;
}

}  // namespace mobfc

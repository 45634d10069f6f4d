#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/timestamp.hpp"

namespace mobfc {

// Header problems that make the whole source unusable.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TripRecord {
    Timestamp pickup_datetime;
    Timestamp dropoff_datetime;
    std::int64_t passenger_count = 0;
    std::optional<std::int64_t> trip_time_secs;  // absent when the export lacks the column
    double trip_distance = 0.0;
    double pickup_lon = 0.0;
    double pickup_lat = 0.0;
    double dropoff_lon = 0.0;
    double dropoff_lat = 0.0;

    bool operator==(const TripRecord&) const = default;
};

struct FoodOrderRecord {
    std::int64_t user_id = 0;
    std::int64_t item_id = 0;
    std::int64_t category_id = 0;
    std::int64_t restaurant_id = 0;
    std::int64_t cuisine_id = 0;
    int day_of_week = 0;  // Monday=0
    int hour_of_day = 0;
    std::int64_t item_count = 1;

    bool operator==(const FoodOrderRecord&) const = default;
};

struct RowError {
    enum class Kind { missing, malformed, out_of_range };

    std::size_t line = 0;
    Kind kind = Kind::malformed;
    std::string reason;
};

inline const char* to_string(RowError::Kind k) {
    switch (k) {
        case RowError::Kind::missing: return "missing field";
        case RowError::Kind::malformed: return "malformed";
        case RowError::Kind::out_of_range: return "out of range";
    }
    return "?";
}

template <class Record>
using ParseResult = std::variant<Record, RowError>;

struct CleaningReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_dropped_missing = 0;
    std::size_t rows_dropped_duplicate = 0;
    std::size_t rows_dropped_invalid = 0;

    bool reconciles() const {
        return rows_read ==
               rows_kept + rows_dropped_missing + rows_dropped_duplicate + rows_dropped_invalid;
    }

    nlohmann::ordered_json to_json() const {
        return {{"rows_read", rows_read},
                {"rows_kept", rows_kept},
                {"rows_dropped_missing", rows_dropped_missing},
                {"rows_dropped_duplicate", rows_dropped_duplicate},
                {"rows_dropped_invalid", rows_dropped_invalid}};
    }

    bool operator==(const CleaningReport&) const = default;
};

// ---------------------------------------------------------------------------
// Schemas

// Maps record fields to header names. TLC exports have drifted over the
// years, so every name is overridable.
struct TaxiSchema {
    enum Field {
        pickup_datetime,
        dropoff_datetime,
        passenger_count,
        trip_time_secs,
        trip_distance,
        pickup_lon,
        pickup_lat,
        dropoff_lon,
        dropoff_lat,
        field_count
    };

    std::array<std::string, field_count> columns{
        "pickup_datetime",  "dropoff_datetime", "passenger_count",
        "trip_time_in_secs", "trip_distance",   "pickup_longitude",
        "pickup_latitude",  "dropoff_longitude", "dropoff_latitude"};
    std::string timestamp_format{kDefaultTimestampFormat};

    static constexpr bool optional_field(int f) { return f == trip_time_secs; }
};

struct FoodSchema {
    enum Field {
        user_id,
        item_id,
        category_id,
        restaurant_id,
        cuisine_id,
        day_of_week,
        hour_of_day,
        item_count,
        field_count
    };

    std::array<std::string, field_count> columns{"user_id",     "item_id",    "category_id",
                                                 "restaurant_id", "cuisine_id", "day_of_week",
                                                 "hour_of_day", "item_count"};

    static constexpr bool optional_field(int) { return false; }
};

namespace detail {

// Resolves schema columns against a header row. Returns the input index for
// each schema field (-1 when an optional field is absent) and the schema
// fields in header order.
template <class Schema>
std::pair<std::array<int, Schema::field_count>, std::vector<int>> resolve_header(
    const Schema& schema, const std::vector<std::string>& header) {
    std::array<int, Schema::field_count> index{};
    index.fill(-1);
    std::vector<int> order;
    for (std::size_t col = 0; col < header.size(); ++col) {
        std::string_view name = csv::trim(header[col]);
        if (col == 0 && name.size() >= 3 && name.substr(0, 3) == "\xEF\xBB\xBF")
            name.remove_prefix(3);
        for (int f = 0; f < Schema::field_count; ++f) {
            if (name == schema.columns[f] && index[f] < 0) {
                index[f] = static_cast<int>(col);
                order.push_back(f);
            }
        }
    }
    for (int f = 0; f < Schema::field_count; ++f) {
        if (index[f] < 0 && !Schema::optional_field(f))
            throw SchemaError("header lacks required column '" + schema.columns[f] + "'");
    }
    return {index, order};
}

template <class Schema, class Derived, class Record>
class CsvRecordParser {
public:
    CsvRecordParser(std::istream& in, Schema schema) : schema_(std::move(schema)), reader_(in) {
        std::vector<std::string> header;
        if (!reader_.next(header)) throw SchemaError("source is empty (header row required)");
        std::tie(index_, order_) = resolve_header(schema_, header);
    }

    std::optional<ParseResult<Record>> next() {
        if (!reader_.next(fields_)) return std::nullopt;
        return static_cast<Derived&>(*this).parse_row();
    }

    template <class Fn>
    void for_each(Fn&& fn) {
        while (auto r = next()) fn(std::move(*r));
    }

    std::vector<ParseResult<Record>> read_all() {
        std::vector<ParseResult<Record>> out;
        for_each([&](ParseResult<Record> r) { out.push_back(std::move(r)); });
        return out;
    }

    // Schema fields in the order they appear in the input header.
    const std::vector<int>& column_order() const { return order_; }
    const Schema& schema() const { return schema_; }
    std::size_t buffer_capacity() const { return reader_.buffer_capacity(); }

protected:
    bool has(int field) const { return index_[field] >= 0; }

    // Empty or absent cell → missing.
    std::optional<std::string_view> cell(int field) const {
        const int col = index_[field];
        if (col < 0 || static_cast<std::size_t>(col) >= fields_.size()) return std::nullopt;
        std::string_view v = csv::trim(fields_[col]);
        if (v.empty()) return std::nullopt;
        return v;
    }

    RowError error(RowError::Kind kind, int field, std::string_view what) const {
        return RowError{reader_.line_number(), kind, schema_.columns[field] + ": " + std::string(what)};
    }

    template <class T>
    std::variant<T, RowError> number(int field) const {
        const auto v = cell(field);
        if (!v) return error(RowError::Kind::missing, field, "missing field");
        const auto n = csv::parse_number<T>(*v);
        if (!n) return error(RowError::Kind::malformed, field, "not a number: " + std::string(*v));
        return *n;
    }

    Schema schema_;
    csv::Reader reader_;
    std::vector<std::string> fields_;
    std::array<int, Schema::field_count> index_{};
    std::vector<int> order_;
};

}  // namespace detail

// Streams TripRecords (or per-row errors) from a TLC-style CSV.
class TaxiCsvParser
    : public detail::CsvRecordParser<TaxiSchema, TaxiCsvParser, TripRecord> {
public:
    using CsvRecordParser::CsvRecordParser;

    ParseResult<TripRecord> parse_row() const {
        using F = TaxiSchema;
        TripRecord r;
        // Missing cells are reported before type failures so that a row with
        // both is counted under the missing-value policy.
        for (int f = 0; f < F::field_count; ++f) {
            if (has(f) && !cell(f)) return error(RowError::Kind::missing, f, "missing field");
        }
        auto ts = [&](int f) -> std::variant<Timestamp, RowError> {
            const auto v = cell(f);
            const auto t = parse_timestamp(*v, schema_.timestamp_format);
            if (!t) return error(RowError::Kind::malformed, f, "bad timestamp: " + std::string(*v));
            return *t;
        };
#define MOBFC_TAKE(dst, expr)                                       \
    do {                                                            \
        auto _v = (expr);                                           \
        if (auto* _e = std::get_if<RowError>(&_v)) return *_e;      \
        dst = std::get<0>(std::move(_v));                           \
    } while (0)
        MOBFC_TAKE(r.pickup_datetime, ts(F::pickup_datetime));
        MOBFC_TAKE(r.dropoff_datetime, ts(F::dropoff_datetime));
        MOBFC_TAKE(r.passenger_count, number<std::int64_t>(F::passenger_count));
        if (has(F::trip_time_secs)) {
            std::int64_t secs = 0;
            MOBFC_TAKE(secs, number<std::int64_t>(F::trip_time_secs));
            if (secs < 0) return error(RowError::Kind::out_of_range, F::trip_time_secs, "negative");
            r.trip_time_secs = secs;
        }
        MOBFC_TAKE(r.trip_distance, number<double>(F::trip_distance));
        MOBFC_TAKE(r.pickup_lon, number<double>(F::pickup_lon));
        MOBFC_TAKE(r.pickup_lat, number<double>(F::pickup_lat));
        MOBFC_TAKE(r.dropoff_lon, number<double>(F::dropoff_lon));
        MOBFC_TAKE(r.dropoff_lat, number<double>(F::dropoff_lat));
#undef MOBFC_TAKE
        if (r.passenger_count < 0)
            return error(RowError::Kind::out_of_range, F::passenger_count, "negative");
        if (!(r.trip_distance >= 0.0))
            return error(RowError::Kind::out_of_range, F::trip_distance, "negative");
        return r;
    }
};

// Streams FoodOrderRecords (or per-row errors) from a Pathao-style CSV.
class FoodCsvParser
    : public detail::CsvRecordParser<FoodSchema, FoodCsvParser, FoodOrderRecord> {
public:
    explicit FoodCsvParser(std::istream& in, FoodSchema schema = {})
        : CsvRecordParser(in, std::move(schema)) {}

    ParseResult<FoodOrderRecord> parse_row() const {
        using F = FoodSchema;
        for (int f = 0; f < F::field_count; ++f) {
            if (!cell(f)) return error(RowError::Kind::missing, f, "missing field");
        }
        std::array<std::int64_t, F::field_count> v{};
        for (int f = 0; f < F::field_count; ++f) {
            auto n = number<std::int64_t>(f);
            if (auto* e = std::get_if<RowError>(&n)) return *e;
            v[f] = std::get<std::int64_t>(n);
        }
        if (v[F::day_of_week] < 0 || v[F::day_of_week] > 6)
            return error(RowError::Kind::out_of_range, F::day_of_week, "expected 0-6");
        if (v[F::hour_of_day] < 0 || v[F::hour_of_day] > 23)
            return error(RowError::Kind::out_of_range, F::hour_of_day, "expected 0-23");
        if (v[F::item_count] < 1)
            return error(RowError::Kind::out_of_range, F::item_count, "expected >= 1");
        return FoodOrderRecord{v[F::user_id],     v[F::item_id],
                               v[F::category_id], v[F::restaurant_id],
                               v[F::cuisine_id],  static_cast<int>(v[F::day_of_week]),
                               static_cast<int>(v[F::hour_of_day]), v[F::item_count]};
    }
};

// ---------------------------------------------------------------------------
// Cleaning

struct BoundingBox {
    double min_lon = -74.3;
    double max_lon = -73.6;
    double min_lat = 40.4;
    double max_lat = 41.0;

    bool contains(double lon, double lat) const {
        return lon >= min_lon && lon <= max_lon && lat >= min_lat && lat <= max_lat;
    }
};

struct CleaningOptions {
    std::optional<BoundingBox> bbox = BoundingBox{};  // nullopt disables the box filter
};

// Returns the reason a record violates its invariants, or nullopt.
inline std::optional<std::string> validate(const TripRecord& r, const CleaningOptions& opts = {}) {
    if (r.dropoff_datetime < r.pickup_datetime) return "dropoff before pickup";
    if (r.passenger_count < 1) return "passenger_count < 1";
    if (r.trip_time_secs && *r.trip_time_secs < 0) return "negative trip_time_secs";
    if (!(r.trip_distance >= 0.0)) return "negative trip_distance";
    for (auto [lon, lat] : {std::pair{r.pickup_lon, r.pickup_lat},
                            std::pair{r.dropoff_lon, r.dropoff_lat}}) {
        if (!(lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0))
            return "coordinate out of range";
        if (lon == 0.0 && lat == 0.0) return "zero coordinate";
        if (opts.bbox && !opts.bbox->contains(lon, lat)) return "outside bounding box";
    }
    return std::nullopt;
}

inline std::optional<std::string> validate(const FoodOrderRecord& r, const CleaningOptions& = {}) {
    if (r.day_of_week < 0 || r.day_of_week > 6) return "day_of_week out of range";
    if (r.hour_of_day < 0 || r.hour_of_day > 23) return "hour_of_day out of range";
    if (r.item_count < 1) return "item_count < 1";
    return std::nullopt;
}

namespace detail {

// 128-bit content digest used for exact-duplicate detection. Keeping digests
// rather than whole rows bounds dedup state at 16 bytes per distinct row.
struct Digest {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    bool operator==(const Digest&) const = default;
};

struct DigestHash {
    std::size_t operator()(const Digest& d) const noexcept { return d.a ^ (d.b * 0x9E3779B97F4A7C15ULL); }
};

class Hasher {
public:
    template <class T>
    void add(const T& v) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        for (unsigned char c : bytes) {
            fnv_ = (fnv_ ^ c) * 0x100000001B3ULL;
            mix_ = splitmix(mix_ ^ (c + 0x9E3779B97F4A7C15ULL));
        }
    }
    Digest digest() const { return {fnv_, mix_}; }

private:
    static std::uint64_t splitmix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    std::uint64_t fnv_ = 0xCBF29CE484222325ULL;
    std::uint64_t mix_ = 0x243F6A8885A308D3ULL;
};

// +0.0 and -0.0 compare equal, so they must hash equal too.
inline double canonical(double x) { return x == 0.0 ? 0.0 : x; }

inline Digest digest(const TripRecord& r) {
    Hasher h;
    h.add(r.pickup_datetime.epoch_seconds());
    h.add(r.dropoff_datetime.epoch_seconds());
    h.add(r.passenger_count);
    h.add(r.trip_time_secs.has_value());
    h.add(r.trip_time_secs.value_or(0));
    for (double x : {r.trip_distance, r.pickup_lon, r.pickup_lat, r.dropoff_lon, r.dropoff_lat})
        h.add(canonical(x));
    return h.digest();
}

inline Digest digest(const FoodOrderRecord& r) {
    Hasher h;
    for (std::int64_t x : {r.user_id, r.item_id, r.category_id, r.restaurant_id, r.cuisine_id,
                           static_cast<std::int64_t>(r.day_of_week),
                           static_cast<std::int64_t>(r.hour_of_day), r.item_count})
        h.add(x);
    return h.digest();
}

}  // namespace detail

// Incremental cleaner: feed parse results one at a time, keep what it returns.
template <class Record>
class Cleaner {
public:
    explicit Cleaner(CleaningOptions opts = {}) : opts_(std::move(opts)) {}

    std::optional<Record> accept(const ParseResult<Record>& item) {
        ++report_.rows_read;
        if (const auto* err = std::get_if<RowError>(&item)) {
            if (err->kind == RowError::Kind::missing)
                ++report_.rows_dropped_missing;
            else
                ++report_.rows_dropped_invalid;
            return std::nullopt;
        }
        return check(std::get<Record>(item));
    }

    std::optional<Record> accept(const Record& r) {
        ++report_.rows_read;
        return check(r);
    }

    const CleaningReport& report() const { return report_; }

private:
    std::optional<Record> check(const Record& r) {
        if (validate(r, opts_)) {
            ++report_.rows_dropped_invalid;
            return std::nullopt;
        }
        if (!seen_.insert(detail::digest(r)).second) {
            ++report_.rows_dropped_duplicate;
            return std::nullopt;
        }
        ++report_.rows_kept;
        return r;
    }

    CleaningOptions opts_;
    CleaningReport report_;
    std::unordered_set<detail::Digest, detail::DigestHash> seen_;
};

template <class Record>
struct CleanResult {
    std::vector<Record> records;
    CleaningReport report;
};

template <class Record>
CleanResult<Record> clean(const std::vector<ParseResult<Record>>& items,
                          const CleaningOptions& opts = {}) {
    Cleaner<Record> cleaner(opts);
    CleanResult<Record> out;
    for (const auto& item : items) {
        if (auto r = cleaner.accept(item)) out.records.push_back(std::move(*r));
    }
    out.report = cleaner.report();
    return out;
}

template <class Record>
CleanResult<Record> clean(const std::vector<Record>& records, const CleaningOptions& opts = {}) {
    Cleaner<Record> cleaner(opts);
    CleanResult<Record> out;
    for (const auto& r : records) {
        if (auto kept = cleaner.accept(r)) out.records.push_back(std::move(*kept));
    }
    out.report = cleaner.report();
    return out;
}

// ---------------------------------------------------------------------------
// Writers

inline std::vector<int> canonical_order(int field_count) {
    std::vector<int> order(static_cast<std::size_t>(field_count));
    for (int i = 0; i < field_count; ++i) order[static_cast<std::size_t>(i)] = i;
    return order;
}

class TaxiCsvWriter {
public:
    TaxiCsvWriter(std::ostream& out, TaxiSchema schema = {}, std::vector<int> order = {})
        : out_(out), schema_(std::move(schema)),
          order_(order.empty() ? canonical_order(TaxiSchema::field_count) : std::move(order)) {
        std::vector<std::string> header;
        for (int f : order_) header.push_back(schema_.columns[f]);
        csv::write_row(out_, header);
    }

    void write(const TripRecord& r) {
        row_.clear();
        for (int f : order_) row_.push_back(cell(r, f));
        csv::write_row(out_, row_);
    }

private:
    std::string format_ts(Timestamp t) const {
        if (schema_.timestamp_format == kDefaultTimestampFormat) return t.to_string();
        std::string out;
        const auto& fmt = schema_.timestamp_format;
        char buf[8];
        for (std::size_t i = 0; i < fmt.size(); ++i) {
            if (fmt[i] != '%' || i + 1 == fmt.size()) {
                out.push_back(fmt[i]);
                continue;
            }
            switch (fmt[++i]) {
                case 'Y': std::snprintf(buf, sizeof buf, "%04d", t.year()); break;
                case 'm': std::snprintf(buf, sizeof buf, "%02u", t.month()); break;
                case 'd': std::snprintf(buf, sizeof buf, "%02u", t.day()); break;
                case 'H': std::snprintf(buf, sizeof buf, "%02d", t.hour()); break;
                case 'M': std::snprintf(buf, sizeof buf, "%02d", t.minute()); break;
                case 'S': std::snprintf(buf, sizeof buf, "%02d", t.second()); break;
                default: std::snprintf(buf, sizeof buf, "%c", fmt[i]); break;
            }
            out += buf;
        }
        return out;
    }

    std::string cell(const TripRecord& r, int f) const {
        switch (f) {
            case TaxiSchema::pickup_datetime: return format_ts(r.pickup_datetime);
            case TaxiSchema::dropoff_datetime: return format_ts(r.dropoff_datetime);
            case TaxiSchema::passenger_count: return std::to_string(r.passenger_count);
            case TaxiSchema::trip_time_secs:
                return r.trip_time_secs ? std::to_string(*r.trip_time_secs) : std::string{};
            case TaxiSchema::trip_distance: return csv::format_double(r.trip_distance);
            case TaxiSchema::pickup_lon: return csv::format_double(r.pickup_lon);
            case TaxiSchema::pickup_lat: return csv::format_double(r.pickup_lat);
            case TaxiSchema::dropoff_lon: return csv::format_double(r.dropoff_lon);
            case TaxiSchema::dropoff_lat: return csv::format_double(r.dropoff_lat);
        }
        return {};
    }

    std::ostream& out_;
    TaxiSchema schema_;
    std::vector<int> order_;
    std::vector<std::string> row_;
};

class FoodCsvWriter {
public:
    explicit FoodCsvWriter(std::ostream& out, FoodSchema schema = {}, std::vector<int> order = {})
        : out_(out), schema_(std::move(schema)),
          order_(order.empty() ? canonical_order(FoodSchema::field_count) : std::move(order)) {
        std::vector<std::string> header;
        for (int f : order_) header.push_back(schema_.columns[f]);
        csv::write_row(out_, header);
    }

    void write(const FoodOrderRecord& r) {
        const std::array<std::int64_t, FoodSchema::field_count> v{
            r.user_id,     r.item_id,     r.category_id, r.restaurant_id,
            r.cuisine_id,  r.day_of_week, r.hour_of_day, r.item_count};
        row_.clear();
        for (int f : order_) row_.push_back(std::to_string(v[f]));
        csv::write_row(out_, row_);
    }

private:
    std::ostream& out_;
    FoodSchema schema_;
    std::vector<int> order_;
    std::vector<std::string> row_;
};

}  // namespace mobfc

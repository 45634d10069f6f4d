#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/features.hpp"

namespace mobfc::geo {

struct Point {
    double lon = 0.0;
    double lat = 0.0;
    bool operator==(const Point&) const = default;
};

using Ring = std::vector<Point>;

struct BBox {
    double min_lon = std::numeric_limits<double>::infinity();
    double min_lat = std::numeric_limits<double>::infinity();
    double max_lon = -std::numeric_limits<double>::infinity();
    double max_lat = -std::numeric_limits<double>::infinity();

    void extend(Point p) {
        min_lon = std::min(min_lon, p.lon);
        max_lon = std::max(max_lon, p.lon);
        min_lat = std::min(min_lat, p.lat);
        max_lat = std::max(max_lat, p.lat);
    }
    bool contains(Point p) const {
        return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
    }
};

inline constexpr std::array<std::string_view, 5> kBoroughOrder{"Bronx", "Brooklyn", "Manhattan",
                                                               "Queens", "Staten Island"};
inline constexpr std::string_view kUnknownBorough = "Unknown";

// Exterior rings and holes of one borough (possibly several islands), all
// combined under the even-odd rule.
class BoroughPolygon {
public:
    BoroughPolygon(std::string name, std::vector<Ring> rings)
        : name_(std::move(name)), rings_(std::move(rings)) {
        if (rings_.empty()) throw std::invalid_argument("polygon '" + name_ + "' has no rings");
        for (const auto& r : rings_) {
            if (r.size() < 4)
                throw std::invalid_argument("polygon '" + name_ + "' has a ring with < 4 points");
            if (!(r.front() == r.back()))
                throw std::invalid_argument("polygon '" + name_ + "' has an unclosed ring");
            for (const auto& p : r) bbox_.extend(p);
        }
    }

    const std::string& name() const { return name_; }
    const std::vector<Ring>& rings() const { return rings_; }
    const BBox& bbox() const { return bbox_; }

private:
    std::string name_;
    std::vector<Ring> rings_;
    BBox bbox_;
};

// Even-odd crossing test over all rings, without the bbox shortcut. Points
// exactly on an edge resolve deterministically but are not guaranteed inside.
inline bool crosses_even_odd(Point p, const std::vector<Ring>& rings) {
    bool inside = false;
    for (const auto& ring : rings) {
        for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
            const Point a = ring[i];
            const Point b = ring[j];
            if ((a.lat > p.lat) != (b.lat > p.lat)) {
                // Only coordinate differences enter the comparison, so the
                // result is invariant under exact translations.
                const double dx = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat);
                if (p.lon - a.lon < dx) inside = !inside;
            }
        }
    }
    return inside;
}

inline bool point_in_polygon(Point p, const BoroughPolygon& poly) {
    if (!poly.bbox().contains(p)) return false;
    return crosses_even_odd(p, poly.rings());
}

// Sorts polygons into the fixed borough order used for first-match assignment.
inline std::vector<BoroughPolygon> in_borough_order(std::vector<BoroughPolygon> polys) {
    auto rank = [](const BoroughPolygon& b) {
        auto it = std::find(kBoroughOrder.begin(), kBoroughOrder.end(), b.name());
        return it - kBoroughOrder.begin();
    };
    std::stable_sort(polys.begin(), polys.end(),
                     [&](const auto& a, const auto& b) { return rank(a) < rank(b); });
    return polys;
}

// Assumes `polygons` is in borough order (see in_borough_order); first match wins.
inline std::string_view assign_borough(Point p, const std::vector<BoroughPolygon>& polygons) {
    for (const auto& poly : polygons)
        if (point_in_polygon(p, poly)) return poly.name();
    return kUnknownBorough;
}

// ---------------------------------------------------------------------------
// GeoJSON

inline std::optional<std::string> canonical_borough_name(std::string_view raw) {
    std::string lowered;
    for (char c : raw) lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (auto name : kBoroughOrder) {
        std::string n;
        for (char c : name) n.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (lowered == n) return std::string(name);
    }
    if (lowered == "the bronx") return std::string("Bronx");
    return std::nullopt;
}

namespace detail {

inline Ring parse_ring(const nlohmann::json& coords) {
    Ring ring;
    for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2) throw std::invalid_argument("bad GeoJSON position");
        ring.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    return ring;
}

}  // namespace detail

// Reads a FeatureCollection of Polygon/MultiPolygon features. The borough is
// taken from the first of the properties name, boro_name, BoroName, borough.
inline std::vector<BoroughPolygon> load_boroughs_geojson(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("GeoJSON parse error: ") + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection")
        throw std::invalid_argument("GeoJSON root must be a FeatureCollection");

    std::vector<std::pair<std::string, std::vector<Ring>>> acc;
    for (const auto& feature : doc.at("features")) {
        const auto& props = feature.at("properties");
        std::optional<std::string> name;
        for (const char* key : {"name", "boro_name", "BoroName", "borough"}) {
            if (props.contains(key) && props[key].is_string()) {
                name = canonical_borough_name(props[key].get<std::string>());
                if (!name)
                    throw std::invalid_argument("unknown borough '" +
                                                props[key].get<std::string>() + "'");
                break;
            }
        }
        if (!name) throw std::invalid_argument("feature without a borough name property");

        const auto& geom = feature.at("geometry");
        const std::string type = geom.at("type");
        std::vector<Ring> rings;
        if (type == "Polygon") {
            for (const auto& r : geom.at("coordinates")) rings.push_back(detail::parse_ring(r));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : geom.at("coordinates"))
                for (const auto& r : poly) rings.push_back(detail::parse_ring(r));
        } else {
            throw std::invalid_argument("unsupported geometry type '" + type + "'");
        }

        auto it = std::find_if(acc.begin(), acc.end(), [&](auto& e) { return e.first == *name; });
        if (it == acc.end())
            acc.emplace_back(*name, std::move(rings));
        else
            it->second.insert(it->second.end(), rings.begin(), rings.end());
    }
    std::vector<BoroughPolygon> out;
    for (auto& [name, rings] : acc) out.emplace_back(name, std::move(rings));
    return in_borough_order(std::move(out));
}

// ---------------------------------------------------------------------------
// Borough aggregation

struct BoroughStats {
    std::string borough;
    std::size_t pickup_count = 0;
    std::optional<double> avg_trip_duration_min;  // defined only when pickup_count > 0
    std::optional<double> avg_trip_distance_miles;
};

// One entry per fixed-order borough, then Unknown. Pickup location decides the borough.
inline std::vector<BoroughStats> borough_demand(const std::vector<FeatureRow>& trips,
                                                const std::vector<BoroughPolygon>& polygons) {
    const auto ordered = in_borough_order(polygons);
    struct Acc {
        std::size_t n = 0;
        double dur = 0.0;
        double dist = 0.0;
    };
    std::vector<std::string> names(kBoroughOrder.begin(), kBoroughOrder.end());
    names.emplace_back(kUnknownBorough);
    std::vector<Acc> acc(names.size());
    for (const auto& t : trips) {
        const auto b = assign_borough({t.pickup_lon, t.pickup_lat}, ordered);
        const auto idx = static_cast<std::size_t>(std::find(names.begin(), names.end(), b) - names.begin());
        auto& a = acc[idx];
        ++a.n;
        a.dur += t.trip_duration_min;
        a.dist += t.trip_distance;
    }
    std::vector<BoroughStats> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        BoroughStats s{names[i], acc[i].n, std::nullopt, std::nullopt};
        if (acc[i].n > 0) {
            s.avg_trip_duration_min = acc[i].dur / static_cast<double>(acc[i].n);
            s.avg_trip_distance_miles = acc[i].dist / static_cast<double>(acc[i].n);
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_borough_stats_csv(std::ostream& out, const std::vector<BoroughStats>& stats) {
    out << "borough,pickup_count,avg_duration_min,avg_distance_miles\n";
    for (const auto& s : stats) {
        out << csv::escape(s.borough) << ',' << s.pickup_count << ','
            << (s.avg_trip_duration_min ? csv::format_double(*s.avg_trip_duration_min) : "") << ','
            << (s.avg_trip_distance_miles ? csv::format_double(*s.avg_trip_distance_miles) : "")
            << '\n';
    }
}

}  // namespace mobfc::geo

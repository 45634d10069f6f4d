// Generates the bundled synthetic fixtures: a January 2013 taxi extract with
// a weekly and daily rhythm plus a sprinkling of dirty rows, a food order
// table, and coarse borough outlines.
//
//   make_fixtures <output-dir> [--rows N] [--seed S]

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/timestamp.hpp"

namespace {

using mobfc::Timestamp;

struct Hotspot {
    double lon, lat, weight, sd;
};

const std::vector<Hotspot> kHotspots{
    {-73.985, 40.758, 0.30, 0.010},  // Midtown
    {-74.008, 40.712, 0.12, 0.008},  // Financial District
    {-73.958, 40.775, 0.12, 0.008},  // Upper East Side
    {-73.975, 40.787, 0.08, 0.008},  // Upper West Side
    {-74.000, 40.735, 0.15, 0.008},  // Chelsea and the Village
    {-73.782, 40.644, 0.04, 0.004},  // JFK
    {-73.872, 40.775, 0.04, 0.003},  // LaGuardia
    {-73.957, 40.714, 0.05, 0.008},  // Williamsburg
    {-73.945, 40.745, 0.03, 0.006},  // Long Island City
    {-73.990, 40.690, 0.05, 0.008},  // Downtown Brooklyn
    {-73.920, 40.825, 0.02, 0.010},  // South Bronx
    {-74.150, 40.590, 0.005, 0.010}, // Staten Island
};

// Busier on Thursday to Saturday, quieter on Sunday.
constexpr double kDowWeight[7] = {0.95, 1.00, 1.05, 1.15, 1.25, 1.20, 0.85};

constexpr double kHourWeight[24] = {0.55, 0.40, 0.30, 0.20, 0.15, 0.18, 0.35, 0.65,
                                    0.85, 0.90, 0.85, 0.85, 0.90, 0.90, 0.95, 0.95,
                                    0.90, 1.00, 1.15, 1.25, 1.20, 1.10, 1.00, 0.80};

struct Trip {
    Timestamp pickup, dropoff;
    int passengers;
    std::int64_t secs;
    double distance, plon, plat, dlon, dlat;
};

class Generator {
public:
    explicit Generator(std::uint64_t seed) : rng_(seed) {}

    Trip trip() {
        std::vector<double> day_w;
        for (int d = 1; d <= 31; ++d) day_w.push_back(kDowWeight[Timestamp::from_civil(2013, 1, d).day_of_week()]);
        const int day = 1 + pick(day_w);
        const int hour = pick(std::vector<double>(std::begin(kHourWeight), std::end(kHourWeight)));
        const auto pickup = Timestamp::from_civil(2013, 1, day, hour, uniform_int(0, 59), uniform_int(0, 59));

        const auto [plon, plat] = location();
        auto [dlon, dlat] = location();
        const double km = haversine_km(plon, plat, dlon, dlat);
        const double miles = std::max(0.1, km * 0.621371 * 1.3);
        const double speed_mph = (hour >= 7 && hour <= 19 ? 9.0 : 15.0) * std::exp(normal(0.0, 0.25));
        const auto secs = static_cast<std::int64_t>(std::round(120.0 + miles / speed_mph * 3600.0));
        Trip t{pickup, pickup + std::chrono::seconds{secs}, passengers(), secs, round2(miles),
               round6(plon), round6(plat), round6(dlon), round6(dlat)};
        // the reported duration occasionally disagrees with the timestamps
        if (uniform() < 0.05) t.secs += uniform_int(-30, 30);
        if (t.secs < 0) t.secs = 0;
        return t;
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double normal(double m, double s) { return std::normal_distribution<double>(m, s)(rng_); }

    std::size_t pick(const std::vector<double>& w) {
        return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_);
    }

private:
    std::pair<double, double> location() {
        std::vector<double> w;
        for (const auto& h : kHotspots) w.push_back(h.weight);
        const auto& h = kHotspots[pick(w)];
        return {h.lon + normal(0.0, h.sd), h.lat + normal(0.0, h.sd)};
    }

    int passengers() {
        static const std::vector<double> w{0.70, 0.14, 0.05, 0.03, 0.05, 0.03};
        return 1 + static_cast<int>(pick(w));
    }

    static double haversine_km(double lon1, double lat1, double lon2, double lat2) {
        constexpr double r = 6371.0, rad = M_PI / 180.0;
        const double dlat = (lat2 - lat1) * rad, dlon = (lon2 - lon1) * rad;
        const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                         std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
        return 2 * r * std::asin(std::sqrt(a));
    }

    static double round2(double v) { return std::round(v * 100.0) / 100.0; }
    static double round6(double v) { return std::round(v * 1e6) / 1e6; }

    std::mt19937_64 rng_;
};

std::vector<std::string> cells(const Trip& t) {
    using mobfc::csv::format_double;
    return {t.pickup.to_string(),         t.dropoff.to_string(),   std::to_string(t.passengers),
            std::to_string(t.secs),       format_double(t.distance), format_double(t.plon),
            format_double(t.plat),        format_double(t.dlon),   format_double(t.dlat)};
}

void write_taxi(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
    Generator g(seed);
    std::ofstream out(path, std::ios::binary);
    mobfc::csv::write_row(out, {"pickup_datetime", "dropoff_datetime", "passenger_count", "trip_time_in_secs",
                                "trip_distance", "pickup_longitude", "pickup_latitude", "dropoff_longitude",
                                "dropoff_latitude"});
    std::vector<std::string> previous;
    for (std::size_t i = 0; i < rows; ++i) {
        auto row = cells(g.trip());
        // about 2% of rows are dirty in one of five ways
        if (g.uniform() < 0.02) {
            switch (g.uniform_int(0, 4)) {
                case 0: row[2] = ""; break;                          // missing passenger count
                case 1: row[0] = "2013-01-3x 10:00:00"; break;       // malformed timestamp
                case 2: row[5] = row[6] = "0"; break;                // zero coordinates
                case 3: std::swap(row[0], row[1]); break;            // dropoff before pickup
                case 4: if (!previous.empty()) row = previous; break;  // exact duplicate
            }
        }
        mobfc::csv::write_row(out, row);
        previous = row;
    }
}

void write_food(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
    Generator g(seed);
    constexpr double dow_w[7] = {0.8, 0.8, 0.85, 0.9, 1.2, 1.5, 1.4};
    constexpr double hour_w[24] = {0.2, 0.1, 0.05, 0.02, 0.02, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.6,
                                   1.0, 1.1, 0.8, 0.5, 0.5, 0.7, 0.9, 1.2, 1.4, 1.2, 0.8, 0.4};
    std::vector<double> item_w, cuisine_w;
    for (int i = 1; i <= 60; ++i) item_w.push_back(1.0 / i);
    for (int i = 1; i <= 12; ++i) cuisine_w.push_back(1.0 / std::sqrt(i));
    std::ofstream out(path, std::ios::binary);
    mobfc::csv::write_row(out, {"user_id", "item_id", "category_id", "restaurant_id", "cuisine_id",
                                "day_of_week", "hour_of_day", "item_count"});
    for (std::size_t i = 0; i < rows; ++i) {
        const auto item = 1000 + g.pick(item_w);
        const auto cuisine = 1 + g.pick(cuisine_w);
        mobfc::csv::write_row(
            out, {std::to_string(g.uniform_int(1, 800)), std::to_string(item), std::to_string(item % 9 + 1),
                  std::to_string(200 + (item * 7) % 40), std::to_string(cuisine),
                  std::to_string(g.pick(std::vector<double>(std::begin(dow_w), std::end(dow_w)))),
                  std::to_string(g.pick(std::vector<double>(std::begin(hour_w), std::end(hour_w)))),
                  std::to_string(1 + g.pick({0.8, 0.15, 0.05}))});
    }
}

// Hand-drawn outlines, a few kilometres accurate at best.
void write_boroughs(const std::filesystem::path& path) {
    using J = nlohmann::ordered_json;
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> shapes{
        {"Manhattan",
         {{-74.020, 40.700}, {-74.011, 40.760}, {-73.960, 40.825}, {-73.935, 40.872}, {-73.912, 40.872},
          {-73.930, 40.800}, {-73.972, 40.738}, {-73.978, 40.710}}},
        {"Bronx",
         {{-73.930, 40.802}, {-73.912, 40.874}, {-73.910, 40.915}, {-73.845, 40.905}, {-73.785, 40.880},
          {-73.800, 40.805}, {-73.880, 40.795}}},
        {"Brooklyn",
         {{-74.042, 40.640}, {-74.020, 40.699}, {-73.978, 40.709}, {-73.962, 40.735}, {-73.926, 40.738},
          {-73.871, 40.690}, {-73.856, 40.650}, {-73.870, 40.580}, {-74.010, 40.570}}},
        {"Queens",
         {{-73.962, 40.737}, {-73.930, 40.790}, {-73.880, 40.792}, {-73.800, 40.802}, {-73.750, 40.780},
          {-73.700, 40.750}, {-73.730, 40.600}, {-73.770, 40.590}, {-73.855, 40.652}, {-73.869, 40.691},
          {-73.925, 40.740}}},
        {"Staten Island",
         {{-74.255, 40.500}, {-74.245, 40.600}, {-74.160, 40.645}, {-74.070, 40.645}, {-74.050, 40.600},
          {-74.110, 40.535}}},
    };
    J features = J::array();
    for (const auto& [name, ring] : shapes) {
        J coords = J::array();
        for (const auto& [lon, lat] : ring) coords.push_back({lon, lat});
        coords.push_back(coords.front());
        features.push_back({{"type", "Feature"},
                            {"properties", {{"boro_name", name}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", J::array({coords})}}}});
    }
    std::ofstream out(path, std::ios::binary);
    out << J{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Write the synthetic fixture files", "make_fixtures"};
    std::string dir;
    std::size_t rows = 10000, food_rows = 3000;
    std::uint64_t seed = 2013;
    app.add_option("dir", dir, "Output directory")->required();
    app.add_option("--rows", rows, "Taxi rows");
    app.add_option("--food-rows", food_rows, "Food order rows");
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(dir);
    const std::filesystem::path d(dir);
    write_taxi(d / "taxi_10k.csv", rows, seed);
    write_food(d / "food_orders.csv", food_rows, seed + 1);
    write_boroughs(d / "boroughs.geojson");
    std::cout << "wrote fixtures to " << d.string() << '\n';
    return 0;
}

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/features.hpp"
#include "mobfc/parallel.hpp"
#include "mobfc/svg.hpp"

namespace mobfc::report {

namespace fs = std::filesystem;

inline constexpr double kReferenceRmseInSample = 734.9441;
inline constexpr double kReferenceRmseOutOfSample = 204.1525;

// A CSV held as strings, header first.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("table has no column '" + name + "'");
    }

    std::vector<double> numbers(const std::string& name) const {
        const auto c = column(name);
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) {
            const auto v = c < r.size() ? csv::parse_number<double>(r[c]) : std::nullopt;
            out.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
        }
        return out;
    }

    std::vector<std::string> strings(const std::string& name) const {
        const auto c = column(name);
        std::vector<std::string> out;
        for (const auto& r : rows) out.push_back(c < r.size() ? r[c] : std::string{});
        return out;
    }
};

inline Table read_table(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    csv::Reader reader(in);
    Table t;
    if (!reader.next(t.header)) throw std::runtime_error(path.string() + " is empty");
    std::vector<std::string> row;
    while (reader.next(row)) t.rows.push_back(row);
    return t;
}

// ---------------------------------------------------------------------------
// Chart builders. Each takes the analysis output tables it names and returns
// a chart whose embedded values are the table values unchanged.

namespace charts {

inline std::vector<std::string> labels_of(const Table& t, const std::string& key) {
    auto keys = t.strings(key);
    if (key == "dow")
        for (auto& k : keys) {
            const auto d = csv::parse_number<int>(k);
            if (d && *d >= 0 && *d < 7) k = std::string(kDayNames[*d]).substr(0, 3);
        }
    return keys;
}

inline svg::ChartSpec bars(const Table& t, const std::string& key, const std::string& value,
                           std::string title, std::string x_label, std::string y_label) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::bar;
    c.title = std::move(title);
    c.x_label = std::move(x_label);
    c.y_label = std::move(y_label);
    c.categories = labels_of(t, key);
    c.series.push_back({value, {}, t.numbers(value), {}, {}});
    return c;
}

inline svg::ChartSpec correlation_heatmap(const Table& t) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::heatmap;
    c.title = "Correlation of trip variables (cleaned trips)";
    const auto xs = t.strings("var_x");
    const auto ys = t.strings("var_y");
    const auto rs = t.strings("r");
    for (const auto& x : xs)
        if (std::find(c.categories.begin(), c.categories.end(), x) == c.categories.end())
            c.categories.push_back(x);
    const std::size_t n = c.categories.size();
    c.matrix.assign(n, std::vector<std::optional<double>>(n));
    auto idx = [&](const std::string& v) {
        return static_cast<std::size_t>(std::find(c.categories.begin(), c.categories.end(), v) -
                                        c.categories.begin());
    };
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const auto v = csv::parse_number<double>(rs[i]);
        const auto a = idx(xs[i]), b = idx(ys[i]);
        if (a < n && b < n && v) c.matrix[a][b] = *v;
    }
    return c;
}

inline svg::ChartSpec hourly_pickup_dropoff(const Table& pickups, const Table& dropoffs) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::line;
    c.title = "Pickups and dropoffs by hour of day";
    c.x_label = "hour of day";
    c.y_label = "trips";
    c.series.push_back({"pickups", pickups.numbers("hod"), pickups.numbers("count"), {}, {}});
    c.series.push_back({"dropoffs", dropoffs.numbers("dropoff_hod"), dropoffs.numbers("count"), {}, "6 3"});
    return c;
}

inline std::vector<double> index_axis(std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i);
    return x;
}

inline svg::ChartSpec deseasonalized(const Table& t) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::line;
    c.title = "Demand with the weekly component removed";
    c.x_label = "period index";
    c.y_label = "trips";
    const auto x = index_axis(t.rows.size());
    c.series.push_back({"observed", x, t.numbers("value"), {}, {}});
    c.series.push_back({"deseasonalized", x, t.numbers("adjusted"), {}, "6 3"});
    return c;
}

// Drops NaN entries so a line never spans a gap.
inline svg::Series finite_series(std::string name, const std::vector<double>& x,
                                 const std::vector<double>& y, std::string dash = {}) {
    svg::Series s{std::move(name), {}, {}, {}, std::move(dash)};
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i)
        if (std::isfinite(y[i])) {
            s.x.push_back(x[i]);
            s.y.push_back(y[i]);
        }
    return s;
}

inline svg::ChartSpec forecast_overlay(const Table& demand, const Table& fitted, const Table& fc) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::line;
    c.title = "Demand forecast against observed";
    c.x_label = "period index";
    c.y_label = "trips";
    c.series.push_back(finite_series("observed", index_axis(demand.rows.size()), demand.numbers("value")));
    c.series.push_back(finite_series("fitted", index_axis(fitted.rows.size()), fitted.numbers("fitted"), "2 2"));
    std::vector<double> x;
    for (std::size_t i = 0; i < fc.rows.size(); ++i) x.push_back(static_cast<double>(fitted.rows.size() + i));
    c.series.push_back(finite_series("forecast", x, fc.numbers("forecast")));
    c.series.push_back(finite_series("lo95", x, fc.numbers("lo95"), "6 3"));
    c.series.push_back(finite_series("hi95", x, fc.numbers("hi95"), "6 3"));
    std::erase_if(c.series, [](const svg::Series& s) { return s.x.empty(); });
    return c;
}

// Every `stride`-th point keeps the SVG a manageable size; the full
// assignment table is copied alongside.
inline svg::ChartSpec cluster_scatter(const Table& points, std::size_t max_points = 5000) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::scatter;
    c.title = "Demand clusters";
    c.x_label = "longitude";
    c.y_label = "latitude";
    const auto lon = points.numbers("point_lon");
    const auto lat = points.numbers("point_lat");
    const auto cl = points.numbers("cluster");
    const std::size_t stride = std::max<std::size_t>(1, (lon.size() + max_points - 1) / max_points);
    svg::Series s{"points", {}, {}, {}, {}};
    for (std::size_t i = 0; i < lon.size(); i += stride) {
        s.x.push_back(lon[i]);
        s.y.push_back(lat[i]);
        s.group.push_back(static_cast<std::size_t>(cl[i]));
    }
    c.series.push_back(std::move(s));
    return c;
}

inline svg::ChartSpec ranking(const Table& t, const std::string& id_column, std::string title) {
    svg::ChartSpec c;
    c.kind = svg::ChartKind::bar;
    c.title = std::move(title);
    c.x_label = id_column;
    c.y_label = "orders";
    c.categories = t.strings(id_column);
    c.series.push_back({"count", {}, t.numbers("count"), {}, {}});
    return c;
}

}  // namespace charts

// ---------------------------------------------------------------------------
// Artifact catalogue

struct ArtifactDef {
    std::string id;
    std::string kind;  // figure | table
    std::vector<std::string> sources;  // relative to the output root
    // figures: renders an SVG from the loaded source tables
    std::function<svg::ChartSpec(const std::vector<Table>&)> chart;
};

inline std::vector<ArtifactDef> catalogue(const std::string& granularity) {
    using charts::bars;
    using T = std::vector<Table>;
    const std::string demand = "features/demand_" + granularity + ".csv";
    std::vector<ArtifactDef> a{
        {"correlation_heatmap", "figure", {"eda/correlation.csv"},
         [](const T& t) { return charts::correlation_heatmap(t[0]); }},
        {"pickups_by_day", "figure", {"eda/pickups_by_day.csv"},
         [](const T& t) { return bars(t[0], "day", "count", "Pickups by day of month", "day", "trips"); }},
        {"pickups_by_hour", "figure", {"eda/pickups_by_hour.csv"},
         [](const T& t) { return bars(t[0], "hod", "count", "Pickups by hour of day", "hour", "trips"); }},
        {"passenger_count", "figure", {"eda/passenger_count_hist.csv"},
         [](const T& t) {
             return bars(t[0], "bin_lo", "count", "Passenger count", "passengers", "trips");
         }},
        {"pickup_dropoff_by_hour", "figure", {"eda/pickups_by_hour.csv", "eda/dropoffs_by_hour.csv"},
         [](const T& t) { return charts::hourly_pickup_dropoff(t[0], t[1]); }},
        {"duration_by_dow", "figure", {"eda/duration_by_dow.csv"},
         [](const T& t) {
             return bars(t[0], "dow", "mean", "Mean trip duration by day of week", "day", "minutes");
         }},
        {"duration_by_hour", "figure", {"eda/duration_by_hour.csv"},
         [](const T& t) {
             return bars(t[0], "hod", "mean", "Mean trip duration by hour of day", "hour", "minutes");
         }},
        {"borough_pickups", "figure", {"geo/borough_stats.csv"},
         [](const T& t) {
             return bars(t[0], "borough", "pickup_count", "Pickups by borough", "borough", "trips");
         }},
        {"borough_duration", "figure", {"geo/borough_stats.csv"},
         [](const T& t) {
             return bars(t[0], "borough", "avg_duration_min", "Mean trip duration by borough",
                         "borough", "minutes");
         }},
        {"borough_distance", "figure", {"geo/borough_stats.csv"},
         [](const T& t) {
             return bars(t[0], "borough", "avg_distance_miles", "Mean trip distance by borough",
                         "borough", "miles");
         }},
        {"deseasonalized_series", "figure", {"forecast/deseasonalized.csv"},
         [](const T& t) { return charts::deseasonalized(t[0]); }},
        {"forecast_overlay", "figure", {demand, "forecast/fitted.csv", "forecast/forecast.csv"},
         [](const T& t) { return charts::forecast_overlay(t[0], t[1], t[2]); }},
        {"cluster_scatter", "figure", {"cluster/clusters.csv"},
         [](const T& t) { return charts::cluster_scatter(t[0]); }},
        {"food_orders_by_dow", "figure", {"eda/food_orders_by_dow.csv"},
         [](const T& t) { return bars(t[0], "dow", "count", "Food orders by day of week", "day", "orders"); }},
        {"food_orders_by_hour", "figure", {"eda/food_orders_by_hour.csv"},
         [](const T& t) {
             return bars(t[0], "hod", "count", "Food orders by hour of day", "hour", "orders");
         }},
        {"food_top_items", "figure", {"eda/food_top_items.csv"},
         [](const T& t) { return charts::ranking(t[0], "item_id", "Top 10 items"); }},
        {"food_top_cuisines", "figure", {"eda/food_top_cuisines.csv"},
         [](const T& t) { return charts::ranking(t[0], "cuisine_id", "Top 10 cuisines"); }},
    };
    for (const char* table :
         {"eda/correlation.csv", "eda/pickups_by_day.csv", "eda/pickups_by_hour.csv",
          "eda/dropoffs_by_hour.csv", "eda/pickups_by_dow.csv", "eda/passenger_count_hist.csv",
          "eda/duration_by_dow.csv", "eda/duration_by_hour.csv", "geo/borough_stats.csv",
          "cluster/centroids.csv", "forecast/forecast.csv", "forecast/fitted.csv",
          "eda/food_orders_by_dow.csv", "eda/food_orders_by_hour.csv", "eda/food_top_items.csv",
          "eda/food_top_cuisines.csv"}) {
        const auto stem = fs::path(table).stem().string();
        a.push_back({stem + "_table", "table", {table}, {}});
    }
    return a;
}

// ---------------------------------------------------------------------------

struct ParityRow {
    std::string metric;
    double reference = 0.0;
    std::optional<double> computed;
};

struct ReportOptions {
    fs::path out_root;
    std::string run_id = "main";
    std::string granularity = "day";
    unsigned threads = 1;
    std::string generated_at;
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
};

struct ReportResult {
    fs::path dir;
    std::size_t present = 0;
    std::size_t absent = 0;
    std::vector<ParityRow> parity;
    nlohmann::ordered_json index;
};

inline std::vector<ParityRow> parity_rows(const fs::path& out_root) {
    std::vector<ParityRow> rows{{"rmse_in_sample", kReferenceRmseInSample, std::nullopt},
                                {"rmse_out_of_sample", kReferenceRmseOutOfSample, std::nullopt}};
    const auto fit_path = out_root / "forecast" / "fit.json";
    if (fs::exists(fit_path)) {
        std::ifstream in(fit_path);
        const auto fit = nlohmann::json::parse(in);
        for (auto& r : rows)
            if (fit.contains(r.metric) && fit[r.metric].is_number()) r.computed = fit[r.metric].get<double>();
    }
    return rows;
}

inline std::string format_optional(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string{};
}

// Renders every artifact whose sources exist; the rest are listed as absent.
// Charts render in parallel; files and the index are written afterwards in
// catalogue order.
inline ReportResult parity_report(const ReportOptions& opts) {
    ReportResult result;
    result.dir = opts.out_root / "reports" / opts.run_id;
    fs::create_directories(result.dir / "figures");
    fs::create_directories(result.dir / "tables");

    const auto defs = catalogue(opts.granularity);
    struct Slot {
        bool present = false;
        std::vector<std::string> missing;
        std::string content;
        std::string error;
    };
    std::vector<Slot> slots(defs.size());
    parallel_tasks(defs.size(), opts.threads, [&](std::size_t i) {
        const auto& d = defs[i];
        auto& s = slots[i];
        for (const auto& src : d.sources)
            if (!fs::exists(opts.out_root / src)) s.missing.push_back(src);
        if (!s.missing.empty()) return;
        try {
            if (d.kind == "table") {
                std::ifstream in(opts.out_root / d.sources[0], std::ios::binary);
                std::ostringstream buf;
                buf << in.rdbuf();
                s.content = buf.str();
            } else {
                std::vector<Table> tables;
                for (const auto& src : d.sources) tables.push_back(read_table(opts.out_root / src));
                s.content = svg::render_svg(d.chart(tables));
            }
            s.present = true;
        } catch (const std::exception& e) {
            s.error = e.what();
        }
    });

    nlohmann::ordered_json artifacts = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < defs.size(); ++i) {
        const auto& d = defs[i];
        const auto& s = slots[i];
        const std::string rel =
            d.kind == "figure" ? "figures/" + d.id + ".svg" : "tables/" + fs::path(d.sources[0]).filename().string();
        nlohmann::ordered_json entry{{"id", d.id}, {"kind", d.kind}, {"path", rel},
                                     {"sources", d.sources}};
        const auto target = result.dir / rel;
        if (s.present) {
            std::ofstream out(target, std::ios::binary);
            out << s.content;
            if (!out) throw std::runtime_error("cannot write " + target.string());
            entry["status"] = "present";
            ++result.present;
        } else {
            fs::remove(target);
            entry["status"] = "absent";
            if (!s.missing.empty()) entry["missing"] = s.missing;
            if (!s.error.empty()) entry["error"] = s.error;
            ++result.absent;
        }
        artifacts.push_back(std::move(entry));
    }

    result.parity = parity_rows(opts.out_root);
    {
        const auto path = result.dir / "tables" / "parity.csv";
        std::ofstream out(path, std::ios::binary);
        out << "metric,reference,computed\n";
        for (const auto& r : result.parity)
            out << r.metric << ',' << csv::format_double(r.reference) << ','
                << format_optional(r.computed) << '\n';
        artifacts.push_back({{"id", "parity"}, {"kind", "table"}, {"path", "tables/parity.csv"},
                             {"sources", {"forecast/fit.json"}}, {"status", "present"}});
        ++result.present;
    }

    nlohmann::ordered_json parity = nlohmann::ordered_json::object();
    for (const auto& r : result.parity)
        parity[r.metric] = {{"reference", r.reference},
                            {"computed", r.computed ? nlohmann::ordered_json(*r.computed) : nullptr}};
    parity["note"] =
        "reference values depend on an unpublished data slice and are shown for comparison only; "
        "the reference out-of-sample error is lower than the in-sample one, which is unusual";

    result.index = {{"run_id", opts.run_id},
                    {"generated_at", opts.generated_at},
                    {"provenance", opts.provenance},
                    {"artifacts", std::move(artifacts)},
                    {"reference_values", std::move(parity)}};
    std::ofstream out(result.dir / "index.json", std::ios::binary);
    out << result.index.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write index.json");
    return result;
}

}  // namespace mobfc::report

#pragma once

#include <openssl/opensslv.h>
#include <zlib.h>

#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobfc/config.hpp"
#include "mobfc/eda.hpp"
#include "mobfc/features.hpp"
#include "mobfc/geo.hpp"
#include "mobfc/hash.hpp"
#include "mobfc/ingest.hpp"
#include "mobfc/kmeans.hpp"
#include "mobfc/report.hpp"
#include "mobfc/sarima.hpp"
#include "mobfc/series.hpp"

#ifndef MOBFC_VERSION
#define MOBFC_VERSION "0.0.0"
#endif

namespace mobfc::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Exit 1. `artifact` is set when an upstream output is missing.
class StageError : public std::runtime_error {
public:
    StageError(std::string stage, std::string message, std::string artifact = {})
        : std::runtime_error(std::move(message)), stage_(std::move(stage)),
          artifact_(std::move(artifact)) {}
    const std::string& stage() const { return stage_; }
    const std::string& artifact() const { return artifact_; }

private:
    std::string stage_;
    std::string artifact_;
};

enum ExitCode { kOk = 0, kStageFailure = 1, kInputMissing = 2, kConfigInvalid = 3 };

struct Context {
    RunConfig cfg;
    std::function<void(const std::string&)> log = [](const std::string&) {};

    fs::path out() const { return fs::path(cfg.out); }
    fs::path path(const std::string& rel) const { return out() / rel; }
    void say(const std::string& msg) const {
        if (!cfg.quiet) log(msg);
    }
};

inline Context make_context(RunConfig cfg) {
    Context ctx{std::move(cfg), {}};
    ctx.log = [](const std::string& m) { std::cerr << "mobfc: " << m << '\n'; };
    return ctx;
}

// Seeds for the randomised steps, all derived from the root seed.
struct Seeds {
    std::uint64_t root;
    std::uint64_t kmeans;
    std::uint64_t subsample;
    std::uint64_t optimizer;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline Seeds derive_seeds(std::uint64_t root) {
    return {root, root, splitmix64(root), root};
}

namespace detail {

inline std::string utc_now() {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    const auto s = Timestamp{now}.to_string();
    return s.substr(0, 10) + "T" + s.substr(11) + "Z";
}

inline fs::path require_artifact(const Context& ctx, const std::string& stage, const std::string& rel,
                                 const std::string& producer) {
    const auto p = ctx.path(rel);
    if (!fs::exists(p))
        throw StageError(stage,
                         "missing artifact " + p.string() + " (run '" + producer + "' first)",
                         p.string());
    return p;
}

inline void require_input(const std::string& key, const std::string& path) {
    if (path.empty()) throw ConfigError(key + " is not set");
    if (!fs::is_regular_file(path)) throw InputMissingError(key, path);
}

template <class Fn>
void write_file(const std::string& stage, const fs::path& path, Fn&& fn) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError(stage, "cannot write " + path.string());
    fn(out);
    out.flush();
    if (!out) throw StageError(stage, "write failed for " + path.string());
}

inline void write_json(const std::string& stage, const fs::path& path, const json& j) {
    write_file(stage, path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

inline std::vector<FeatureRow> load_features(const Context& ctx, const std::string& stage) {
    const auto p = require_artifact(ctx, stage, "features/features.csv", "features");
    std::ifstream in(p, std::ios::binary);
    return read_features_csv(in);
}

inline TaxiSchema taxi_schema(const RunConfig& cfg) {
    TaxiSchema s;
    s.timestamp_format = cfg.timestamp_format;
    return s;
}

inline json input_hashes(const RunConfig& cfg) {
    json out = json::array();
    for (const auto& [key, path] : std::vector<std::pair<std::string, std::string>>{
             {"input_taxi", cfg.input_taxi}, {"input_food", cfg.input_food}, {"boroughs", cfg.boroughs}}) {
        if (path.empty()) continue;
        json e{{"key", key}, {"path", path}};
        e["sha256"] = fs::is_regular_file(path) ? json(sha256_file(path)) : json(nullptr);
        out.push_back(std::move(e));
    }
    return out;
}

// Zero-filled counts between the first and last observed bucket.
inline ts::TimeSeries series_from_buckets(const std::map<std::int64_t, std::size_t>& buckets,
                                          ts::Granularity g) {
    ts::TimeSeries s;
    s.granularity = g;
    if (buckets.empty()) return s;
    const auto step = ts::step_of(g).count();
    s.start = Timestamp::from_epoch_seconds(buckets.begin()->first);
    const auto n = static_cast<std::size_t>((buckets.rbegin()->first - buckets.begin()->first) / step + 1);
    s.values.assign(n, 0.0);
    for (const auto& [t, c] : buckets)
        s.values[static_cast<std::size_t>((t - buckets.begin()->first) / step)] = static_cast<double>(c);
    return s;
}

template <class Parser, class Writer, class Record, class Schema>
CleaningReport clean_file(const std::string& stage, const std::string& input, const fs::path& output,
                          const fs::path& rejects, const Schema& schema) {
    csv::InputFile file(input);
    Parser parser(file.stream(), schema);
    Cleaner<Record> cleaner;
    write_file(stage, rejects, [&](std::ostream& rej) {
        rej << "line,kind,reason\n";
        write_file(stage, output, [&](std::ostream& out) {
            Writer writer(out, schema, parser.column_order());
            parser.for_each([&](ParseResult<Record> item) {
                if (const auto* e = std::get_if<RowError>(&item))
                    csv::write_row(rej, {std::to_string(e->line), to_string(e->kind), e->reason});
                if (auto kept = cleaner.accept(item)) writer.write(*kept);
            });
        });
    });
    return cleaner.report();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

inline void run_ingest(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    detail::require_input("input_taxi", cfg.input_taxi);
    if (!cfg.input_food.empty()) detail::require_input("input_food", cfg.input_food);

    ctx.say("ingest: reading " + cfg.input_taxi);
    json report;
    const auto taxi = detail::clean_file<TaxiCsvParser, TaxiCsvWriter, TripRecord>(
        "ingest", cfg.input_taxi, ctx.path("ingest/taxi_clean.csv"), ctx.path("ingest/taxi_rejects.csv"),
        detail::taxi_schema(cfg));
    report["taxi"] = taxi.to_json();
    report["taxi"]["reconciles"] = taxi.reconciles();

    if (!cfg.input_food.empty()) {
        ctx.say("ingest: reading " + cfg.input_food);
        const auto food = detail::clean_file<FoodCsvParser, FoodCsvWriter, FoodOrderRecord>(
            "ingest", cfg.input_food, ctx.path("ingest/food_clean.csv"),
            ctx.path("ingest/food_rejects.csv"), FoodSchema{});
        report["food"] = food.to_json();
        report["food"]["reconciles"] = food.reconciles();
    } else {
        fs::remove(ctx.path("ingest/food_clean.csv"));
        fs::remove(ctx.path("ingest/food_rejects.csv"));
        report["food"] = nullptr;
    }
    detail::write_json("ingest", ctx.path("ingest/cleaning_report.json"), report);
    ctx.say("ingest: kept " + std::to_string(taxi.rows_kept) + " of " + std::to_string(taxi.rows_read) +
            " taxi rows");
}

inline void run_features(const Context& ctx) {
    const auto src = detail::require_artifact(ctx, "features", "ingest/taxi_clean.csv", "ingest");
    std::ifstream in(src, std::ios::binary);
    TaxiCsvParser parser(in, detail::taxi_schema(ctx.cfg));
    DurationCheck check;
    std::map<std::int64_t, std::size_t> daily, hourly;
    std::size_t rows = 0;
    detail::write_file("features", ctx.path("features/features.csv"), [&](std::ostream& out) {
        csv::write_row(out, feature_columns());
        parser.for_each([&](ParseResult<TripRecord> item) {
            const auto* r = std::get_if<TripRecord>(&item);
            if (!r)
                throw StageError("features", src.string() + " line " +
                                                 std::to_string(std::get<RowError>(item).line) +
                                                 ": " + std::get<RowError>(item).reason);
            write_feature_row(out, derive_features(*r));
            check.add(*r);
            ++daily[r->pickup_datetime.floor_day().epoch_seconds()];
            ++hourly[r->pickup_datetime.floor_hour().epoch_seconds()];
            ++rows;
        });
    });
    for (auto [name, buckets, g] : {std::tuple{"day", &daily, ts::Granularity::day},
                                    std::tuple{"hour", &hourly, ts::Granularity::hour}}) {
        const auto s = detail::series_from_buckets(*buckets, g);
        detail::write_file("features", ctx.path(std::string("features/demand_") + name + ".csv"),
                           [&](std::ostream& o) { ts::write_series_csv(o, s); });
    }
    auto j = check.to_json();
    j["rows"] = rows;
    detail::write_json("features", ctx.path("features/duration_check.json"), j);
    ctx.say("features: " + std::to_string(rows) + " trips");
}

inline void run_eda(const Context& ctx) {
    using namespace eda;
    const auto rows = detail::load_features(ctx, "eda");
    if (rows.empty()) throw StageError("eda", "feature table is empty");
    auto put = [&](const std::string& name, auto&& fn) {
        detail::write_file("eda", ctx.path("eda/" + name), fn);
    };
    json summary{{"population", "cleaned trips"}, {"rows", rows.size()}};

    const auto corr = taxi_correlation(rows);
    put("correlation.csv", [&](std::ostream& o) { write_csv(o, corr); });
    summary["correlation"] = to_json(corr);

    const std::vector<std::pair<const char*, DemandKey>> demand{
        {"pickups_by_day.csv", DemandKey::day_of_month},
        {"pickups_by_hour.csv", DemandKey::hour_of_day},
        {"pickups_by_dow.csv", DemandKey::day_of_week},
        {"dropoffs_by_hour.csv", DemandKey::dropoff_hour}};
    for (const auto& [file, key] : demand) {
        const auto counts = demand_by_key(rows, key);
        put(file, [&](std::ostream& o) { write_csv(o, counts); });
        summary["busiest"][key_name(key)] = counts.argmax();
    }

    std::vector<double> passengers;
    passengers.reserve(rows.size());
    std::int64_t pmin = rows.front().passenger_count, pmax = pmin;
    for (const auto& r : rows) {
        passengers.push_back(static_cast<double>(r.passenger_count));
        pmin = std::min(pmin, r.passenger_count);
        pmax = std::max(pmax, r.passenger_count);
    }
    const auto ph = histogram(passengers, integer_bins(static_cast<int>(pmin), static_cast<int>(pmax)));
    put("passenger_count_hist.csv", [&](std::ostream& o) { write_csv(o, ph); });

    GroupedStatsOptions gopts{ctx.cfg.max_duration_min};
    const auto by_dow = grouped_duration_stats(rows, DemandKey::day_of_week, gopts);
    const auto by_hod = grouped_duration_stats(rows, DemandKey::hour_of_day, gopts);
    put("duration_by_dow.csv", [&](std::ostream& o) { write_csv(o, by_dow, "dow"); });
    put("duration_by_hour.csv", [&](std::ostream& o) { write_csv(o, by_hod, "hod"); });
    summary["duration_cap_min"] = ctx.cfg.max_duration_min;

    const auto food_path = ctx.path("ingest/food_clean.csv");
    const std::vector<std::string> food_files{"food_orders_by_dow.csv", "food_orders_by_hour.csv",
                                              "food_top_items.csv", "food_top_cuisines.csv"};
    if (fs::exists(food_path)) {
        std::ifstream in(food_path, std::ios::binary);
        FoodCsvParser parser(in);
        std::vector<FoodOrderRecord> orders;
        parser.for_each([&](ParseResult<FoodOrderRecord> item) {
            if (auto* r = std::get_if<FoodOrderRecord>(&item)) orders.push_back(*r);
            else throw StageError("eda", "unreadable row in " + food_path.string());
        });
        const auto dow = demand_by_key(orders, DemandKey::day_of_week);
        const auto hod = demand_by_key(orders, DemandKey::hour_of_day);
        const auto items = top_n(count_by(orders, [](const auto& o) { return o.item_id; }), 10);
        const auto cuisines = top_n(count_by(orders, [](const auto& o) { return o.cuisine_id; }), 10);
        put(food_files[0], [&](std::ostream& o) { write_csv(o, dow); });
        put(food_files[1], [&](std::ostream& o) { write_csv(o, hod); });
        put(food_files[2], [&](std::ostream& o) { write_csv(o, items, "item_id"); });
        put(food_files[3], [&](std::ostream& o) { write_csv(o, cuisines, "cuisine_id"); });
        summary["food_orders"] = orders.size();
    } else {
        for (const auto& f : food_files) fs::remove(ctx.path("eda/" + f));
        summary["food_orders"] = nullptr;
    }
    detail::write_json("eda", ctx.path("eda/summary.json"), summary);
    ctx.say("eda: " + std::to_string(rows.size()) + " trips summarised");
}

inline void run_geo(const Context& ctx) {
    detail::require_input("boroughs", ctx.cfg.boroughs);
    const auto rows = detail::load_features(ctx, "geo");
    std::ifstream in(ctx.cfg.boroughs, std::ios::binary);
    std::vector<geo::BoroughPolygon> polys;
    try {
        polys = geo::load_boroughs_geojson(in);
    } catch (const std::exception& e) {
        throw StageError("geo", std::string("cannot load boroughs: ") + e.what());
    }
    const auto stats = geo::borough_demand(rows, polys);
    detail::write_file("geo", ctx.path("geo/borough_stats.csv"),
                       [&](std::ostream& o) { geo::write_borough_stats_csv(o, stats); });
    detail::write_json("geo", ctx.path("geo/summary.json"),
                       {{"population", "cleaned trips"}, {"assigned_by", "pickup location"},
                        {"polygons", polys.size()}});
    ctx.say("geo: " + std::to_string(rows.size()) + " trips assigned");
}

inline void run_cluster(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const auto rows = detail::load_features(ctx, "cluster");
    std::vector<geo::Point> points;
    points.reserve(rows.size() * 2);
    for (const auto& r : rows) points.push_back({r.pickup_lon, r.pickup_lat});
    if (cfg.cluster_points == "joint")
        for (const auto& r : rows) points.push_back({r.dropoff_lon, r.dropoff_lat});
    const auto seeds = derive_seeds(cfg.seed);
    const auto sample = kmeans::subsample(points, cfg.max_cluster_points, seeds.subsample);

    kmeans::KMeansConfig kc;
    kc.k = cfg.k;
    kc.max_iter = cfg.max_iter;
    kc.tol = cfg.tol;
    kc.seed = seeds.kmeans;
    kc.n_init = cfg.n_init;
    kc.latitude_correction = cfg.latitude_correction;
    kc.threads = cfg.threads;
    kmeans::KMeansModel model;
    try {
        model = kmeans::kmeans_fit(sample, kc);
    } catch (const std::exception& e) {
        throw StageError("cluster", std::string("k-means failed: ") + e.what());
    }
    detail::write_file("cluster", ctx.path("cluster/clusters.csv"), [&](std::ostream& o) {
        o << "point_lon,point_lat,cluster\n";
        for (std::size_t i = 0; i < sample.size(); ++i)
            o << csv::format_double(sample[i].lon) << ',' << csv::format_double(sample[i].lat) << ','
              << model.assignments[i] << '\n';
    });
    detail::write_file("cluster", ctx.path("cluster/centroids.csv"),
                       [&](std::ostream& o) { kmeans::write_centroids_csv(o, model); });
    auto j = kmeans::to_json(model, kc);
    j["points"] = cfg.cluster_points;
    j["points_available"] = points.size();
    j["subsample_seed"] = seeds.subsample;
    j["inertia_history"] = model.inertia_history;
    detail::write_json("cluster", ctx.path("cluster/kmeans.json"), j);
    ctx.say("cluster: " + std::to_string(model.centroids.size()) + " centroids from " +
            std::to_string(sample.size()) + " points");
}

inline void run_forecast(const Context& ctx) {
    const auto& cfg = ctx.cfg;
    const std::string gran = ts::to_string(cfg.granularity);
    const auto src =
        detail::require_artifact(ctx, "forecast", "features/demand_" + gran + ".csv", "features");
    ts::TimeSeries series;
    {
        std::ifstream in(src, std::ios::binary);
        series = ts::read_series_csv(in);
    }
    series.granularity = cfg.granularity;
    const auto& spec = cfg.model;
    const std::size_t period = spec.s >= 2 ? spec.s : 7;

    ts::TimeSeries train, test;
    try {
        std::tie(train, test) = ts::split_train_test(series, cfg.split);
    } catch (const std::exception& e) {
        throw StageError("forecast", "series of length " + std::to_string(series.size()) +
                                         " cannot be split: " + e.what());
    }

    if (series.size() >= 2 * period) {
        const auto d = ts::deseasonalize(series, period);
        detail::write_file("forecast", ctx.path("forecast/deseasonalized.csv"), [&](std::ostream& o) {
            o << "timestamp,value,seasonal,adjusted\n";
            for (std::size_t i = 0; i < series.size(); ++i)
                o << series.time_at(i).to_string() << ',' << csv::format_double(series.values[i]) << ','
                  << csv::format_double(d.seasonal[i % period]) << ','
                  << csv::format_double(d.adjusted.values[i]) << '\n';
        });
    } else {
        fs::remove(ctx.path("forecast/deseasonalized.csv"));
    }

    // With deseasonalisation the weekly profile comes from the training span
    // only and is added back to fitted values and forecasts.
    std::vector<double> seasonal(period, 0.0);
    std::vector<double> y_train = train.values;
    if (cfg.deseasonalize) {
        if (train.size() < 2 * period)
            throw StageError("forecast", "training span too short to deseasonalize");
        const auto d = ts::deseasonalize(train, period);
        seasonal = d.seasonal;
        y_train = d.adjusted.values;
    }
    const auto seasonal_at = [&](std::size_t i) { return cfg.deseasonalize ? seasonal[i % period] : 0.0; };

    const auto seeds = derive_seeds(cfg.seed);
    ts::FitOptions opts;
    opts.max_evals = cfg.max_evals;
    opts.restarts = cfg.restarts;
    opts.seed = seeds.optimizer;
    opts.threads = cfg.threads;
    ts::FitResult fit;
    ts::OneStep one;
    ts::Forecast fc;
    try {
        fit = ts::fit_mle(spec, y_train, opts);
        one = ts::one_step_predictions(spec, fit.params, y_train);
        fc = ts::forecast(spec, fit.params, y_train, test.size());
    } catch (const std::exception& e) {
        throw StageError("forecast", std::string("model fit failed: ") + e.what());
    }

    std::vector<double> fitted(train.size()), pred_in, act_in;
    for (std::size_t i = 0; i < train.size(); ++i) {
        fitted[i] = one.predictions[i] + seasonal_at(i);
        if (std::isfinite(fitted[i])) {
            pred_in.push_back(fitted[i]);
            act_in.push_back(train.values[i]);
        }
    }
    std::vector<double> mean(test.size()), lo(test.size()), hi(test.size());
    for (std::size_t h = 0; h < test.size(); ++h) {
        const double sh = seasonal_at(train.size() + h);
        mean[h] = fc.mean[h] + sh;
        lo[h] = fc.lower95[h] + sh;
        hi[h] = fc.upper95[h] + sh;
    }
    const double rmse_in = ts::rmse(pred_in, act_in);
    const double rmse_out = ts::rmse(mean, test.values);

    detail::write_file("forecast", ctx.path("forecast/fitted.csv"), [&](std::ostream& o) {
        o << "timestamp,actual,fitted\n";
        for (std::size_t i = 0; i < train.size(); ++i)
            o << train.time_at(i).to_string() << ',' << csv::format_double(train.values[i]) << ','
              << (std::isfinite(fitted[i]) ? csv::format_double(fitted[i]) : std::string{}) << '\n';
    });
    detail::write_file("forecast", ctx.path("forecast/forecast.csv"), [&](std::ostream& o) {
        o << "timestamp,forecast,lo95,hi95\n";
        for (std::size_t h = 0; h < test.size(); ++h)
            o << test.time_at(h).to_string() << ',' << csv::format_double(mean[h]) << ','
              << csv::format_double(lo[h]) << ',' << csv::format_double(hi[h]) << '\n';
    });
    json j{{"series", "features/demand_" + gran + ".csv"},
           {"granularity", gran},
           {"n_train", train.size()},
           {"n_test", test.size()},
           {"deseasonalized", cfg.deseasonalize},
           {"spec", ts::to_json(spec)},
           {"params", ts::to_json(fit.params)},
           {"loglik", fit.loglik},
           {"converged", fit.converged},
           {"n_evals", fit.n_evals},
           {"best_restart", fit.best_restart},
           {"optimizer_seed", opts.seed},
           {"min_ar_root", fit.min_ar_root},
           {"min_ma_root", fit.min_ma_root},
           {"rmse_in_sample", rmse_in},
           {"rmse_out_of_sample", rmse_out}};
    if (cfg.deseasonalize) j["seasonal_profile"] = seasonal;
    detail::write_json("forecast", ctx.path("forecast/fit.json"), j);
    ctx.say("forecast: in-sample RMSE " + csv::format_fixed(rmse_in, 4) + ", out-of-sample RMSE " +
            csv::format_fixed(rmse_out, 4));
}

inline json provenance(const RunConfig& cfg) {
    return {{"config", to_json(cfg)},
            {"inputs", detail::input_hashes(cfg)},
            {"correlation_population", "cleaned trips"},
            {"borough_population", "cleaned trips"}};
}

inline report::ReportResult run_report(const Context& ctx, std::ostream* parity_out = &std::cout) {
    report::ReportOptions opts;
    opts.out_root = ctx.out();
    opts.run_id = ctx.cfg.run_id;
    opts.granularity = ts::to_string(ctx.cfg.granularity);
    opts.threads = ctx.cfg.threads;
    opts.generated_at = detail::utc_now();
    opts.provenance = provenance(ctx.cfg);
    report::ReportResult r;
    try {
        r = report::parity_report(opts);
    } catch (const std::exception& e) {
        throw StageError("report", e.what());
    }
    if (parity_out && !ctx.cfg.quiet) {
        for (const auto& p : r.parity)
            *parity_out << p.metric << ": computed "
                        << (p.computed ? csv::format_fixed(*p.computed, 4) : std::string("n/a"))
                        << "  reference " << csv::format_fixed(p.reference, 4) << '\n';
    }
    ctx.say("report: " + std::to_string(r.present) + " artifacts written, " + std::to_string(r.absent) +
            " absent, in " + r.dir.string());
    return r;
}

// ---------------------------------------------------------------------------
// Manifest

inline json build_info() {
    return {{"version", MOBFC_VERSION},
            {"compiler", __VERSION__},
            {"cxx_standard", __cplusplus},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                          "." + std::to_string(EIGEN_MINOR_VERSION)},
            {"zlib", ZLIB_VERSION},
            {"openssl", OPENSSL_VERSION_TEXT}};
}

// Completed stages accumulate across invocations into one output directory.
inline void write_manifest(const Context& ctx, const std::vector<std::string>& completed) {
    const auto path = ctx.path("manifest.json");
    std::set<std::string> done(completed.begin(), completed.end());
    if (fs::exists(path)) {
        try {
            std::ifstream in(path);
            const auto old = nlohmann::json::parse(in);
            for (const auto& s : old.at("stages_completed")) done.insert(s.get<std::string>());
        } catch (const std::exception&) {
            // unreadable manifests are replaced
        }
    }
    std::vector<std::string> ordered;
    for (const auto& s : all_stages())
        if (done.count(s)) ordered.push_back(s);
    const auto seeds = derive_seeds(ctx.cfg.seed);
    json m{{"tool", "mobfc"},
           {"generated_at", detail::utc_now()},
           {"stages_completed", ordered},
           {"config", to_json(ctx.cfg)},
           {"seeds",
            {{"root", seeds.root},
             {"kmeans", seeds.kmeans},
             {"subsample", seeds.subsample},
             {"optimizer", seeds.optimizer}}},
           {"inputs", detail::input_hashes(ctx.cfg)},
           {"build", build_info()}};
    detail::write_json("manifest", path, m);
}

inline void run_stage(const Context& ctx, const std::string& stage) {
    if (stage == "ingest") run_ingest(ctx);
    else if (stage == "features") run_features(ctx);
    else if (stage == "eda") run_eda(ctx);
    else if (stage == "geo") run_geo(ctx);
    else if (stage == "cluster") run_cluster(ctx);
    else if (stage == "forecast") run_forecast(ctx);
    else if (stage == "report") run_report(ctx);
    else throw ConfigError("unknown stage '" + stage + "'");
}

// Stages from `stages`, in pipeline order. geo is skipped when no boundary
// file is configured.
inline std::vector<std::string> run_all_stages(const RunConfig& cfg) {
    std::vector<std::string> out;
    for (const auto& s : all_stages()) {
        if (!cfg.stage_enabled(s)) continue;
        if (s == "geo" && cfg.boroughs.empty()) continue;
        out.push_back(s);
    }
    return out;
}

// Runs one subcommand ("run-all" or a stage name) and writes the manifest.
inline void execute(const Context& ctx, const std::string& command) {
    fs::create_directories(ctx.out());
    std::vector<std::string> stages =
        command == "run-all" ? run_all_stages(ctx.cfg) : std::vector<std::string>{command};
    std::vector<std::string> completed;
    for (const auto& s : stages) {
        run_stage(ctx, s);
        completed.push_back(s);
        write_manifest(ctx, completed);
    }
}

// Maps an exception to its exit code and a one-line JSON diagnostic.
inline int report_error(const std::string& command, std::ostream& err) {
    json e{{"command", command}};
    int code = kStageFailure;
    try {
        throw;
    } catch (const ConfigError& x) {
        code = kConfigInvalid;
        e["kind"] = "config";
        e["message"] = x.what();
    } catch (const InputMissingError& x) {
        code = kInputMissing;
        e["kind"] = "input_missing";
        e["input"] = x.key();
        e["path"] = x.path();
        e["message"] = x.what();
    } catch (const StageError& x) {
        e["kind"] = x.artifact().empty() ? "stage_failure" : "missing_artifact";
        e["stage"] = x.stage();
        if (!x.artifact().empty()) e["artifact"] = x.artifact();
        e["message"] = x.what();
    } catch (const std::exception& x) {
        e["kind"] = "stage_failure";
        e["message"] = x.what();
    }
    e["exit_code"] = code;
    err << json{{"error", e}}.dump() << '\n';
    return code;
}

}  // namespace mobfc::pipeline

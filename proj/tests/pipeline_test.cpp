#include <gtest/gtest.h>
#include <unistd.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "mobfc/pipeline.hpp"

using namespace mobfc;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

const std::string kSource = MOBFC_SOURCE_DIR;
const std::string kCli = MOBFC_CLI_PATH;
const std::string kTaxi = kSource + "/data/fixtures/taxi_10k.csv";
const std::string kFood = kSource + "/data/fixtures/food_orders.csv";
const std::string kBoroughs = kSource + "/data/fixtures/boroughs.geojson";

class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(fs::temp_directory_path() / ("mobfc_" + name + "_" + std::to_string(::getpid()))) {
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    std::string str() const { return path_.string(); }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string without_generated_at(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("\"generated_at\"") == std::string::npos) out += line + '\n';
    return out;
}

// Relative path → contents, generated_at lines removed.
std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            out[fs::relative(e.path(), root).string()] = without_generated_at(slurp(e.path()));
    return out;
}

RunConfig fixture_config(const std::string& out) {
    RunConfig cfg;
    cfg.input_taxi = kTaxi;
    cfg.input_food = kFood;
    cfg.boroughs = kBoroughs;
    cfg.out = out;
    cfg.quiet = true;
    cfg.threads = 2;
    return cfg;
}

void run(const RunConfig& cfg, const std::string& command) {
    pipeline::Context ctx{cfg};
    pipeline::execute(ctx, command);
}

struct CliResult {
    int code;
    std::string err;
};

CliResult cli(const std::string& args, const fs::path& scratch) {
    const auto err_file = scratch / "stderr.txt";
    const std::string cmd = "'" + kCli + "' " + args + " > /dev/null 2> '" + err_file.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err_file)};
}

std::map<std::string, const char*> env_of(std::initializer_list<std::pair<std::string, const char*>> kv) {
    return {kv.begin(), kv.end()};
}

pt::ptree parse_svg(const fs::path& p) {
    std::ifstream in(p);
    pt::ptree tree;
    pt::read_xml(in, tree);
    return tree;
}

std::vector<std::string> bar_values(const pt::ptree& doc) {
    std::vector<std::string> out;
    for (const auto& [tag, g] : doc.get_child("svg"))
        if (tag == "g" && g.get<std::string>("<xmlattr>.class", "") == "plot-area")
            for (const auto& [t, rect] : g)
                if (t == "rect") out.push_back(rect.get<std::string>("<xmlattr>.data-value"));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, DefaultsMatchReferenceSetup) {
    const RunConfig c;
    EXPECT_EQ(c.k, 15u);
    EXPECT_EQ(c.split, 0.8);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.model.p, 1u);
    EXPECT_EQ(c.model.q, 1u);
    EXPECT_EQ(c.model.P, 1u);
    EXPECT_EQ(c.model.Q, 1u);
    EXPECT_EQ(c.model.s, 7u);
    EXPECT_EQ(c.model.d + c.model.D, 0u);
    EXPECT_EQ(c.granularity, ts::Granularity::day);
    EXPECT_NO_THROW(validate(c));
}

TEST(Config, FlagsOverrideEnvOverrideFile) {
    TempDir dir("cfg");
    {
        std::ofstream f(dir.path() / "run.cfg");
        f << "# comment\nk = 7\nseed=5\nsplit = 0.75   # trailing comment\ninput_taxi = trips.csv\n";
    }
    const auto env = env_of({{"MOBFC_SEED", "9"}, {"MOBFC_SPLIT", "0.6"}});
    auto getenv_fn = [&](const char* name) -> const char* {
        const auto it = env.find(name);
        return it == env.end() ? nullptr : it->second;
    };
    const auto cfg = load_config((dir.path() / "run.cfg").string(), {{"split", "0.9"}}, getenv_fn);
    EXPECT_EQ(cfg.k, 7u);        // file
    EXPECT_EQ(cfg.seed, 9u);     // env beats file
    EXPECT_EQ(cfg.split, 0.9);   // flag beats env
    EXPECT_EQ(cfg.input_taxi, (dir.path() / "trips.csv").string());
}

TEST(Config, ConfigPathFromEnvironment) {
    TempDir dir("cfgenv");
    const auto file = (dir.path() / "c.cfg").string();
    std::ofstream(file) << "granularity = hour\n";
    auto getenv_fn = [&](const char* name) -> const char* {
        return std::string(name) == "MOBFC_CONFIG" ? file.c_str() : nullptr;
    };
    EXPECT_EQ(load_config(std::nullopt, {}, getenv_fn).granularity, ts::Granularity::hour);
}

TEST(Config, RejectsInvalidValues) {
    auto none = [](const char*) -> const char* { return nullptr; };
    for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
             {"split", "1.2"}, {"split", "abc"}, {"granularity", "week"}, {"order", "1,0"},
             {"seasonal_order", "1,0,1,1"}, {"k", "0"}, {"k", "-3"}, {"quiet", "maybe"},
             {"stages", "ingest,bogus"}, {"cluster_points", "dropoff"}, {"run_id", "../x"},
             {"no_such_key", "1"}}) {
        EXPECT_THROW(load_config(std::nullopt, {{k, v}}, none), ConfigError) << k << "=" << v;
    }
    TempDir dir("cfgbad");
    const auto file = (dir.path() / "bad.cfg").string();
    std::ofstream(file) << "k 15\n";
    EXPECT_THROW(load_config(file, {}, none), ConfigError);
    EXPECT_THROW(load_config((dir.path() / "absent.cfg").string(), {}, none), InputMissingError);
}

TEST(Config, OrdersAcceptParentheses) {
    RunConfig c;
    set_config_value(c, "seasonal_order", "(2, 1, 0, 12)");
    EXPECT_EQ(c.model.P, 2u);
    EXPECT_EQ(c.model.D, 1u);
    EXPECT_EQ(c.model.Q, 0u);
    EXPECT_EQ(c.model.s, 12u);
    EXPECT_EQ(to_json(c)["seasonal_order"], "2,1,0,12");
}

TEST(Hash, Sha256KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Seeds, DerivedFromRoot) {
    const auto a = pipeline::derive_seeds(42), b = pipeline::derive_seeds(42), c = pipeline::derive_seeds(43);
    EXPECT_EQ(a.subsample, b.subsample);
    EXPECT_NE(a.subsample, c.subsample);
    EXPECT_EQ(a.root, 42u);
}

// ---------------------------------------------------------------------------
// Command line

TEST(Cli, MissingInputExitsTwo) {
    TempDir dir("cli2");
    const auto r = cli("ingest --quiet --input-taxi '" + dir.str() + "/nope.csv' --out '" + dir.str() + "/out'",
                       dir.path());
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("input_missing"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitThree) {
    TempDir dir("cli3");
    EXPECT_EQ(cli("eda --split 2 --out '" + dir.str() + "'", dir.path()).code, 3);
    EXPECT_EQ(cli("frobnicate", dir.path()).code, 3);
    EXPECT_EQ(cli("cluster --k nine --out '" + dir.str() + "'", dir.path()).code, 3);
    EXPECT_EQ(cli("ingest --set nonsense=1", dir.path()).code, 3);
}

TEST(Cli, ForecastWithoutFeaturesNamesArtifact) {
    TempDir dir("cli1");
    const auto r = cli("forecast --quiet --out '" + dir.str() + "/out'", dir.path());
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("features/demand_day.csv"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("missing_artifact"), std::string::npos) << r.err;
}

TEST(Cli, ClusterTwiceGivesIdenticalAssignments) {
    TempDir dir("clik");
    const std::string base = "--quiet --input-taxi '" + kTaxi + "' --out '" + dir.str() + "/out'";
    ASSERT_EQ(cli("ingest " + base, dir.path()).code, 0);
    ASSERT_EQ(cli("features " + base, dir.path()).code, 0);
    ASSERT_EQ(cli("cluster --k 15 --seed 42 " + base, dir.path()).code, 0);
    const auto first = slurp(dir.path() / "out/cluster/clusters.csv");
    ASSERT_EQ(cli("cluster --k 15 --seed 42 --threads 1 " + base, dir.path()).code, 0);
    EXPECT_EQ(first, slurp(dir.path() / "out/cluster/clusters.csv"));
    EXPECT_FALSE(first.empty());
}

TEST(Cli, EnvironmentMirrorsFlags) {
    TempDir dir("clienv");
    const std::string out = dir.str() + "/out";
    const std::string cmd = "MOBFC_INPUT_TAXI='" + kTaxi + "' MOBFC_OUT='" + out + "' MOBFC_QUIET=1 '" + kCli +
                            "' ingest > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_TRUE(fs::exists(out + "/ingest/taxi_clean.csv"));
}

// ---------------------------------------------------------------------------
// Stages

TEST(Pipeline, RunAllEqualsIndividualStages) {
    TempDir dir("equiv");
    const auto out = dir.path() / "out";
    auto cfg = fixture_config(out.string());
    run(cfg, "run-all");
    fs::rename(out, dir.path() / "all");
    for (const auto& s : all_stages()) run(cfg, s);
    const auto a = snapshot(dir.path() / "all");
    const auto b = snapshot(out);
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [path, content] : a) {
        ASSERT_TRUE(b.count(path)) << path;
        EXPECT_EQ(content, b.at(path)) << path;
    }
}

TEST(Pipeline, CleanedFileKeepsColumnOrderAndReconciles) {
    TempDir dir("ingest");
    run(fixture_config(dir.str()), "ingest");
    std::ifstream raw(kTaxi), clean(dir.path() / "ingest/taxi_clean.csv");
    std::string h1, h2;
    std::getline(raw, h1);
    std::getline(clean, h2);
    EXPECT_EQ(h1, h2);
    std::ifstream in(dir.path() / "ingest/cleaning_report.json");
    const auto j = nlohmann::json::parse(in);
    const auto& t = j["taxi"];
    EXPECT_TRUE(t["reconciles"].get<bool>());
    EXPECT_EQ(t["rows_read"].get<std::size_t>(), 10000u);
    std::size_t lines = 0;
    for (std::string l; std::getline(clean, l);) ++lines;
    EXPECT_EQ(lines, t["rows_kept"].get<std::size_t>());
    EXPECT_GT(t["rows_dropped_duplicate"].get<std::size_t>(), 0u);
    EXPECT_GT(t["rows_dropped_missing"].get<std::size_t>(), 0u);
    EXPECT_GT(t["rows_dropped_invalid"].get<std::size_t>(), 0u);
}

TEST(Pipeline, DemandSeriesMatchesFeatureCounts) {
    TempDir dir("demand");
    auto cfg = fixture_config(dir.str());
    run(cfg, "ingest");
    run(cfg, "features");
    std::ifstream fin(dir.path() / "features/features.csv");
    const auto rows = read_features_csv(fin);
    std::ifstream sin(dir.path() / "features/demand_day.csv");
    const auto series = ts::read_series_csv(sin);
    ASSERT_EQ(series.size(), 31u);
    std::vector<double> by_day(31, 0.0);
    for (const auto& r : rows) by_day[static_cast<std::size_t>(r.pickup_day - 1)] += 1;
    EXPECT_EQ(series.values, by_day);
    std::ifstream hin(dir.path() / "features/demand_hour.csv");
    const auto hourly = ts::read_series_csv(hin);
    double total = 0;
    for (double v : hourly.values) total += v;
    EXPECT_EQ(total, static_cast<double>(rows.size()));
}

TEST(Report, FullRunListsAtLeastTwelveArtifacts) {
    TempDir dir("report");
    run(fixture_config(dir.str()), "run-all");
    std::ifstream in(dir.path() / "reports/main/index.json");
    const auto index = nlohmann::json::parse(in);
    std::size_t present = 0;
    for (const auto& a : index["artifacts"]) {
        if (a["status"] != "present") continue;
        ++present;
        EXPECT_TRUE(fs::exists(dir.path() / "reports/main" / a["path"].get<std::string>())) << a["path"];
    }
    EXPECT_GE(present, 12u);
    EXPECT_EQ(index["provenance"]["inputs"][0]["sha256"], sha256_file(kTaxi));
    EXPECT_EQ(index["provenance"]["config"]["k"], 15);
    EXPECT_DOUBLE_EQ(index["reference_values"]["rmse_in_sample"]["reference"].get<double>(), 734.9441);
    EXPECT_DOUBLE_EQ(index["reference_values"]["rmse_out_of_sample"]["reference"].get<double>(), 204.1525);
    EXPECT_TRUE(index["reference_values"]["rmse_in_sample"]["computed"].is_number());

    for (const auto& e : fs::directory_iterator(dir.path() / "reports/main/figures"))
        EXPECT_NO_THROW(parse_svg(e.path())) << e.path();
}

TEST(Report, SkippedClusterStageMarkedAbsent) {
    TempDir dir("nocluster");
    auto cfg = fixture_config(dir.str());
    cfg.stages = {"ingest", "features", "eda", "geo", "forecast", "report"};
    run(cfg, "run-all");
    std::ifstream in(dir.path() / "reports/main/index.json");
    const auto index = nlohmann::json::parse(in);
    bool seen = false;
    for (const auto& a : index["artifacts"]) {
        if (a["id"] == "cluster_scatter") {
            seen = true;
            EXPECT_EQ(a["status"], "absent");
            EXPECT_EQ(a["missing"][0], "cluster/clusters.csv");
        }
        if (a["id"] == "correlation_heatmap") EXPECT_EQ(a["status"], "present");
    }
    EXPECT_TRUE(seen);
    EXPECT_FALSE(fs::exists(dir.path() / "reports/main/figures/cluster_scatter.svg"));
}

TEST(Report, WithoutBoroughsOrFoodStillCompletes) {
    TempDir dir("minimal");
    auto cfg = fixture_config(dir.str());
    cfg.boroughs.clear();
    cfg.input_food.clear();
    run(cfg, "run-all");
    std::ifstream in(dir.path() / "reports/main/index.json");
    const auto index = nlohmann::json::parse(in);
    for (const auto& a : index["artifacts"]) {
        const auto id = a["id"].get<std::string>();
        if (id.rfind("borough", 0) == 0 || id.rfind("food", 0) == 0) EXPECT_EQ(a["status"], "absent") << id;
    }
}

TEST(Report, BarValuesEqualSourceTables) {
    TempDir dir("bars");
    run(fixture_config(dir.str()), "run-all");
    const auto fig = dir.path() / "reports/main/figures";
    const std::vector<std::tuple<std::string, std::string, std::string>> pairs{
        {"pickups_by_hour.svg", "eda/pickups_by_hour.csv", "count"},
        {"pickups_by_day.svg", "eda/pickups_by_day.csv", "count"},
        {"duration_by_dow.svg", "eda/duration_by_dow.csv", "mean"},
        {"borough_pickups.svg", "geo/borough_stats.csv", "pickup_count"},
        {"borough_distance.svg", "geo/borough_stats.csv", "avg_distance_miles"},
        {"food_top_items.svg", "eda/food_top_items.csv", "count"}};
    for (const auto& [svg_file, csv_file, column] : pairs) {
        const auto values = bar_values(parse_svg(fig / svg_file));
        const auto table = report::read_table(dir.path() / csv_file);
        EXPECT_EQ(values, table.strings(column)) << svg_file;
    }
}

TEST(Report, RerunGivesSameIndexExceptTimestamp) {
    TempDir dir("rerun");
    auto cfg = fixture_config(dir.str());
    run(cfg, "run-all");
    const auto first = slurp(dir.path() / "reports/main/index.json");
    run(cfg, "report");
    const auto second = slurp(dir.path() / "reports/main/index.json");
    EXPECT_EQ(without_generated_at(first), without_generated_at(second));
    EXPECT_NE(first.find("generated_at"), std::string::npos);
}

TEST(Manifest, RecordsConfigHashesAndStages) {
    TempDir dir("manifest");
    auto cfg = fixture_config(dir.str());
    run(cfg, "ingest");
    run(cfg, "features");
    std::ifstream in(dir.path() / "manifest.json");
    const auto m = nlohmann::json::parse(in);
    EXPECT_EQ(m["stages_completed"], nlohmann::json::array({"ingest", "features"}));
    EXPECT_EQ(m["seeds"]["root"], 42);
    EXPECT_EQ(m["config"]["seasonal_order"], "1,0,1,7");
    EXPECT_EQ(m["inputs"][0]["sha256"], sha256_file(kTaxi));
    EXPECT_TRUE(m["build"]["version"].is_string());

    // the recorded config reproduces the run
    RunConfig replay;
    for (const auto& [k, v] : m["config"].items())
        set_config_value(replay, k, v.is_string() ? v.get<std::string>() : v.dump());
    EXPECT_EQ(to_json(replay).dump(), to_json(cfg).dump());
}

TEST(Forecast, DeseasonalizedRunRestoresWeeklyProfile) {
    TempDir dir("deseason");
    auto cfg = fixture_config(dir.str());
    cfg.deseasonalize = true;
    cfg.restarts = 2;
    for (const auto& s : {"ingest", "features", "forecast"}) run(cfg, s);
    std::ifstream in(dir.path() / "forecast/fit.json");
    const auto fit = nlohmann::json::parse(in);
    EXPECT_TRUE(fit["deseasonalized"].get<bool>());
    ASSERT_EQ(fit["seasonal_profile"].size(), 7u);
    double sum = 0;
    for (const auto& v : fit["seasonal_profile"]) sum += v.get<double>();
    EXPECT_NEAR(sum, 0.0, 1e-9);
    const auto fc = report::read_table(dir.path() / "forecast/forecast.csv");
    ASSERT_EQ(fc.rows.size(), 7u);
    const auto mean = fc.numbers("forecast"), lo = fc.numbers("lo95"), hi = fc.numbers("hi95");
    for (std::size_t i = 0; i < mean.size(); ++i) {
        EXPECT_LT(lo[i], mean[i]);
        EXPECT_GT(hi[i], mean[i]);
        EXPECT_NEAR(mean[i] - lo[i], hi[i] - mean[i], 1e-6);
    }
}

TEST(Forecast, HourlyGranularityUsesHourlySeries) {
    TempDir dir("hourly");
    auto cfg = fixture_config(dir.str());
    cfg.granularity = ts::Granularity::hour;
    cfg.restarts = 1;
    cfg.max_evals = 600;
    for (const auto& s : {"ingest", "features", "forecast"}) run(cfg, s);
    std::ifstream in(dir.path() / "forecast/fit.json");
    const auto fit = nlohmann::json::parse(in);
    EXPECT_EQ(fit["granularity"], "hour");
    EXPECT_EQ(fit["n_train"].get<std::size_t>() + fit["n_test"].get<std::size_t>(), 31u * 24u);
}

TEST(Buckets, ZeroFilledBetweenEnds) {
    std::map<std::int64_t, std::size_t> b{{0, 2}, {2 * 86400, 5}};
    const auto s = pipeline::detail::series_from_buckets(b, ts::Granularity::day);
    EXPECT_EQ(s.values, (std::vector<double>{2, 0, 5}));
    EXPECT_TRUE(pipeline::detail::series_from_buckets({}, ts::Granularity::day).values.empty());
}

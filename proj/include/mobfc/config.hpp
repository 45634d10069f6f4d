#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mobfc/csv.hpp"
#include "mobfc/parallel.hpp"
#include "mobfc/sarima.hpp"
#include "mobfc/series.hpp"
#include "mobfc/timestamp.hpp"

namespace mobfc {

// Exit 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Exit 2.
class InputMissingError : public std::runtime_error {
public:
    InputMissingError(std::string key, std::string path)
        : std::runtime_error("input file not found: " + path + " (" + key + ")"),
          key_(std::move(key)), path_(std::move(path)) {}
    const std::string& key() const { return key_; }
    const std::string& path() const { return path_; }

private:
    std::string key_;
    std::string path_;
};

inline const std::vector<std::string>& all_stages() {
    static const std::vector<std::string> s{"ingest", "features", "eda",     "geo",
                                            "cluster", "forecast", "report"};
    return s;
}

struct RunConfig {
    std::string input_taxi;
    std::string input_food;
    std::string boroughs;
    std::string out = "out";
    std::string run_id = "main";
    std::string timestamp_format{kDefaultTimestampFormat};

    std::uint64_t seed = 42;
    unsigned threads = default_threads();
    bool quiet = false;
    std::vector<std::string> stages = all_stages();

    double max_duration_min = 180.0;

    std::size_t k = 15;
    std::size_t max_iter = 300;
    double tol = 1e-6;
    std::size_t n_init = 1;
    bool latitude_correction = false;
    std::string cluster_points = "joint";  // joint | pickup
    std::size_t max_cluster_points = 500000;

    ts::Granularity granularity = ts::Granularity::day;
    double split = 0.8;
    bool deseasonalize = false;
    ts::SarimaxSpec model{};
    std::size_t restarts = 5;
    std::size_t max_evals = 4000;

    bool stage_enabled(const std::string& s) const {
        return std::find(stages.begin(), stages.end(), s) != stages.end();
    }
};

namespace config_detail {

inline std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    const auto s = lower(v);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& key, const std::string& v) {
    const auto n = csv::parse_number<T>(csv::trim(v));
    if (!n) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return *n;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
    const auto n = parse_num<std::int64_t>(key, v);
    if (n < 0) throw ConfigError(key + ": must be non-negative");
    return static_cast<std::size_t>(n);
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto t = std::string(csv::trim(item));
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline std::vector<int> parse_ints(const std::string& key, const std::string& v, std::size_t n) {
    std::string cleaned;
    for (char c : v)
        if (c != '(' && c != ')') cleaned.push_back(c);
    const auto parts = split_list(cleaned);
    if (parts.size() != n)
        throw ConfigError(key + ": expected " + std::to_string(n) + " comma-separated integers");
    std::vector<int> out;
    for (const auto& p : parts) {
        const auto x = parse_num<int>(key, p);
        if (x < 0) throw ConfigError(key + ": orders must be non-negative");
        out.push_back(x);
    }
    return out;
}

struct Key {
    std::string name;
    std::string help;
    bool is_path = false;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<nlohmann::ordered_json(const RunConfig&)> get;
};

inline std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
}

}  // namespace config_detail

// Every configurable key, in manifest order.
inline const std::vector<config_detail::Key>& config_keys() {
    using namespace config_detail;
    using J = nlohmann::ordered_json;
    static const std::vector<Key> keys{
        {"input_taxi", "taxi trip CSV (.csv or .csv.gz)", true,
         [](RunConfig& c, const std::string& v) { c.input_taxi = v; },
         [](const RunConfig& c) { return J(c.input_taxi); }},
        {"input_food", "food order CSV", true,
         [](RunConfig& c, const std::string& v) { c.input_food = v; },
         [](const RunConfig& c) { return J(c.input_food); }},
        {"boroughs", "borough boundary GeoJSON", true,
         [](RunConfig& c, const std::string& v) { c.boroughs = v; },
         [](const RunConfig& c) { return J(c.boroughs); }},
        {"out", "output directory", false,
         [](RunConfig& c, const std::string& v) { c.out = v; },
         [](const RunConfig& c) { return J(c.out); }},
        {"run_id", "report directory name under reports/", false,
         [](RunConfig& c, const std::string& v) { c.run_id = v; },
         [](const RunConfig& c) { return J(c.run_id); }},
        {"timestamp_format", "strftime-style pattern for taxi timestamps", false,
         [](RunConfig& c, const std::string& v) { c.timestamp_format = v; },
         [](const RunConfig& c) { return J(c.timestamp_format); }},
        {"seed", "root seed", false,
         [](RunConfig& c, const std::string& v) { c.seed = parse_num<std::uint64_t>("seed", v); },
         [](const RunConfig& c) { return J(c.seed); }},
        {"threads", "worker threads", false,
         [](RunConfig& c, const std::string& v) {
             c.threads = static_cast<unsigned>(parse_count("threads", v));
         },
         [](const RunConfig& c) { return J(c.threads); }},
        {"quiet", "suppress progress output", false,
         [](RunConfig& c, const std::string& v) { c.quiet = parse_bool("quiet", v); },
         [](const RunConfig& c) { return J(c.quiet); }},
        {"stages", "comma-separated stages run by run-all", false,
         [](RunConfig& c, const std::string& v) { c.stages = split_list(v); },
         [](const RunConfig& c) { return J(join(c.stages)); }},
        {"max_duration_min", "duration cap for grouped duration statistics", false,
         [](RunConfig& c, const std::string& v) {
             c.max_duration_min = parse_num<double>("max_duration_min", v);
         },
         [](const RunConfig& c) { return J(c.max_duration_min); }},
        {"k", "number of clusters", false,
         [](RunConfig& c, const std::string& v) { c.k = parse_count("k", v); },
         [](const RunConfig& c) { return J(c.k); }},
        {"max_iter", "Lloyd iteration cap", false,
         [](RunConfig& c, const std::string& v) { c.max_iter = parse_count("max_iter", v); },
         [](const RunConfig& c) { return J(c.max_iter); }},
        {"tol", "centroid shift tolerance (degrees)", false,
         [](RunConfig& c, const std::string& v) { c.tol = parse_num<double>("tol", v); },
         [](const RunConfig& c) { return J(c.tol); }},
        {"n_init", "k-means initialisations", false,
         [](RunConfig& c, const std::string& v) { c.n_init = parse_count("n_init", v); },
         [](const RunConfig& c) { return J(c.n_init); }},
        {"latitude_correction", "scale longitude by cos(latitude) before clustering", false,
         [](RunConfig& c, const std::string& v) {
             c.latitude_correction = parse_bool("latitude_correction", v);
         },
         [](const RunConfig& c) { return J(c.latitude_correction); }},
        {"cluster_points", "joint (pickups and dropoffs) or pickup", false,
         [](RunConfig& c, const std::string& v) { c.cluster_points = v; },
         [](const RunConfig& c) { return J(c.cluster_points); }},
        {"max_cluster_points", "seeded subsample size for clustering", false,
         [](RunConfig& c, const std::string& v) {
             c.max_cluster_points = parse_count("max_cluster_points", v);
         },
         [](const RunConfig& c) { return J(c.max_cluster_points); }},
        {"granularity", "day or hour", false,
         [](RunConfig& c, const std::string& v) {
             const auto g = ts::parse_granularity(v);
             if (!g) throw ConfigError("granularity: expected day or hour, got '" + v + "'");
             c.granularity = *g;
         },
         [](const RunConfig& c) { return J(ts::to_string(c.granularity)); }},
        {"split", "train fraction", false,
         [](RunConfig& c, const std::string& v) { c.split = parse_num<double>("split", v); },
         [](const RunConfig& c) { return J(c.split); }},
        {"deseasonalize", "remove day-of-week means before fitting", false,
         [](RunConfig& c, const std::string& v) { c.deseasonalize = parse_bool("deseasonalize", v); },
         [](const RunConfig& c) { return J(c.deseasonalize); }},
        {"order", "p,d,q", false,
         [](RunConfig& c, const std::string& v) {
             const auto o = parse_ints("order", v, 3);
             c.model.p = o[0];
             c.model.d = o[1];
             c.model.q = o[2];
         },
         [](const RunConfig& c) {
             return J(std::to_string(c.model.p) + "," + std::to_string(c.model.d) + "," +
                      std::to_string(c.model.q));
         }},
        {"seasonal_order", "P,D,Q,s", false,
         [](RunConfig& c, const std::string& v) {
             const auto o = parse_ints("seasonal_order", v, 4);
             c.model.P = o[0];
             c.model.D = o[1];
             c.model.Q = o[2];
             c.model.s = o[3];
         },
         [](const RunConfig& c) {
             return J(std::to_string(c.model.P) + "," + std::to_string(c.model.D) + "," +
                      std::to_string(c.model.Q) + "," + std::to_string(c.model.s));
         }},
        {"constant", "include a mean term", false,
         [](RunConfig& c, const std::string& v) { c.model.with_constant = parse_bool("constant", v); },
         [](const RunConfig& c) { return J(c.model.with_constant); }},
        {"restarts", "optimizer restarts", false,
         [](RunConfig& c, const std::string& v) { c.restarts = parse_count("restarts", v); },
         [](const RunConfig& c) { return J(c.restarts); }},
        {"max_evals", "objective evaluations per restart", false,
         [](RunConfig& c, const std::string& v) { c.max_evals = parse_count("max_evals", v); },
         [](const RunConfig& c) { return J(c.max_evals); }},
    };
    return keys;
}

inline const config_detail::Key* find_config_key(const std::string& name) {
    for (const auto& k : config_keys())
        if (k.name == name) return &k;
    return nullptr;
}

inline void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    const auto* k = find_config_key(key);
    if (!k) throw ConfigError("unknown config key '" + key + "'");
    k->set(cfg, value);
}

inline std::string env_name(const std::string& key) {
    std::string s = "MOBFC_";
    for (char c : key) s.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return s;
}

// Flat "key = value" lines; '#' starts a comment. Relative input paths are
// taken relative to the file's directory.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputMissingError("config", path);
    const auto base = std::filesystem::path(path).parent_path();
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = csv::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        std::string key(csv::trim(t.substr(0, eq)));
        std::string value(csv::trim(t.substr(eq + 1)));
        const auto* k = find_config_key(key);
        if (!k) throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (k->is_path && !value.empty() && std::filesystem::path(value).is_relative())
            value = (base / value).lexically_normal().string();
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

inline void validate(const RunConfig& c) {
    if (!(c.split > 0.0 && c.split < 1.0)) throw ConfigError("split must lie strictly between 0 and 1");
    if (c.k < 1) throw ConfigError("k must be at least 1");
    if (c.max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (!(c.tol >= 0.0)) throw ConfigError("tol must be non-negative");
    if (c.n_init < 1) throw ConfigError("n_init must be at least 1");
    if (c.threads < 1) throw ConfigError("threads must be at least 1");
    if (c.restarts < 1) throw ConfigError("restarts must be at least 1");
    if (c.max_evals < 10) throw ConfigError("max_evals must be at least 10");
    if (c.max_cluster_points < 1) throw ConfigError("max_cluster_points must be at least 1");
    if (!(c.max_duration_min > 0.0)) throw ConfigError("max_duration_min must be positive");
    if (c.cluster_points != "joint" && c.cluster_points != "pickup")
        throw ConfigError("cluster_points must be joint or pickup");
    if (c.out.empty()) throw ConfigError("out must not be empty");
    if (c.run_id.empty() || c.run_id.find('/') != std::string::npos || c.run_id == "." ||
        c.run_id == "..")
        throw ConfigError("run_id must be a plain directory name");
    for (const auto& s : c.stages)
        if (std::find(all_stages().begin(), all_stages().end(), s) == all_stages().end())
            throw ConfigError("stages: unknown stage '" + s + "'");
    try {
        c.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

// Precedence: flags > environment > file > defaults. The config file path
// itself may come from a flag or MOBFC_CONFIG.
inline RunConfig load_config(std::optional<std::string> config_file,
                             const std::vector<std::pair<std::string, std::string>>& flags,
                             const std::function<const char*(const char*)>& getenv_fn = std::getenv) {
    RunConfig cfg;
    if (!config_file)
        if (const char* e = getenv_fn("MOBFC_CONFIG"); e && *e) config_file = e;
    if (config_file)
        for (const auto& [k, v] : read_config_file(*config_file)) set_config_value(cfg, k, v);
    for (const auto& key : config_keys())
        if (const char* e = getenv_fn(env_name(key.name).c_str())) key.set(cfg, e);
    for (const auto& [k, v] : flags) set_config_value(cfg, k, v);
    validate(cfg);
    return cfg;
}

inline nlohmann::ordered_json to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    for (const auto& k : config_keys()) j[k.name] = k.get(cfg);
    return j;
}

}  // namespace mobfc

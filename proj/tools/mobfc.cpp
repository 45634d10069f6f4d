#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mobfc/pipeline.hpp"

namespace {

struct Flag {
    const char* name;
    const char* key;
    const char* help;
};

// Value flags; each maps onto the config key of the same meaning.
constexpr Flag kValueFlags[] = {
    {"--input-taxi", "input_taxi", "Taxi trip CSV (.csv or .csv.gz)"},
    {"--input-food", "input_food", "Food order CSV"},
    {"--boroughs", "boroughs", "Borough boundary GeoJSON"},
    {"--out", "out", "Output directory"},
    {"--split", "split", "Train fraction for the forecast split"},
    {"--k", "k", "Number of clusters"},
    {"--seed", "seed", "Root seed"},
    {"--granularity", "granularity", "Demand series granularity: day or hour"},
    {"--threads", "threads", "Worker threads"},
    {"--run-id", "run_id", "Report directory name"},
    {"--order", "order", "Non-seasonal order p,d,q"},
    {"--seasonal-order", "seasonal_order", "Seasonal order P,D,Q,s"},
    {"--stages", "stages", "Stages run by run-all, comma separated"},
};

constexpr Flag kSwitches[] = {
    {"--deseasonalize", "deseasonalize", "Remove day-of-week means before fitting"},
    {"--quiet", "quiet", "Suppress progress output"},
    {"--constant", "constant", "Include a mean term in the model"},
};

}  // namespace

int main(int argc, char** argv) {
    using namespace mobfc;
    CLI::App app{"Urban mobility demand analysis and forecasting pipeline", "mobfc"};
    app.set_version_flag("--version", MOBFC_VERSION);
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::optional<std::string> config_file;
    app.add_option("--config", config_file, "Flat key = value configuration file");
    std::vector<std::optional<std::string>> values(std::size(kValueFlags));
    for (std::size_t i = 0; i < std::size(kValueFlags); ++i)
        app.add_option(kValueFlags[i].name, values[i], kValueFlags[i].help);
    std::vector<CLI::Option*> switch_opts;
    for (const auto& s : kSwitches) switch_opts.push_back(app.add_flag(s.name, s.help));
    std::vector<std::string> overrides;
    app.add_option("--set", overrides, "Any config key as key=value (repeatable)");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"ingest", "Parse and clean raw inputs"},
        {"features", "Derive temporal features and demand series"},
        {"eda", "Descriptive statistics"},
        {"geo", "Borough-level aggregation"},
        {"cluster", "K-means demand clustering"},
        {"forecast", "Seasonal ARIMA fit and forecast"},
        {"report", "Render figures, tables and the artifact index"},
        {"run-all", "Run every enabled stage in order"}};
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    std::string command = "mobfc";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::cerr << nlohmann::json{{"error", {{"command", command}, {"kind", "config"},
                                               {"message", e.what()}, {"exit_code", 3}}}}
                         .dump()
                  << '\n';
        return pipeline::kConfigInvalid;
    }
    command = app.get_subcommands().front()->get_name();

    try {
        std::vector<std::pair<std::string, std::string>> flags;
        for (const auto& o : overrides) {
            const auto eq = o.find('=');
            if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
            flags.emplace_back(o.substr(0, eq), o.substr(eq + 1));
        }
        for (std::size_t i = 0; i < std::size(kValueFlags); ++i)
            if (values[i]) flags.emplace_back(kValueFlags[i].key, *values[i]);
        for (std::size_t i = 0; i < std::size(kSwitches); ++i)
            if (switch_opts[i]->count() > 0) flags.emplace_back(kSwitches[i].key, "true");

        const auto ctx = pipeline::make_context(load_config(config_file, flags));
        pipeline::execute(ctx, command);
    } catch (...) {
        return pipeline::report_error(command, std::cerr);
    }
    return pipeline::kOk;
}

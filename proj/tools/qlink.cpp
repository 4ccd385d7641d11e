// qlink: run link scenarios from JSON files.
//
//   qlink teleport --scenario presets/qinghai-97km.json --out out/
//   qlink run --scenario haixin-two-link.json --seed 7 --format csv
//
// Exit status: 0 success, 2 configuration error, 3 runtime or statistics error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qlink/error.hpp"
#include "qlink/run.hpp"
#include "qlink/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Options {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<double> time_scale;
    std::string out;
    std::string format = "json";
};

int report_error(const char* kind, const std::string& path, const std::string& message, int code) {
    nlohmann::json err = {{"error", kind}, {"message", message}};
    if (!path.empty()) err["path"] = path;
    std::cerr << err.dump() << '\n';
    return code;
}

// A bare preset name falls back to the shipped preset directory.
std::filesystem::path locate(const std::string& scenario) {
    std::filesystem::path p(scenario);
    if (std::filesystem::exists(p)) return p;
    const std::filesystem::path preset = std::filesystem::path(QLINK_PRESET_DIR) / p.filename();
    if (std::filesystem::exists(preset)) return preset;
    return p;
}

qlink::io::ScenarioConfig load(const Options& opt, std::optional<qlink::io::Protocol> protocol) {
    qlink::io::ScenarioConfig config = qlink::io::parse_config_file(locate(opt.scenario));
    if (opt.seed) config.seed = *opt.seed;
    if (opt.time_scale) config.time_scale = *opt.time_scale;
    if (protocol) config.protocol = *protocol;
    // Re-parse the echo so overrides get the same section checks as the file.
    return qlink::io::parse_config(qlink::io::to_json(config));
}

int execute(const Options& opt, std::optional<qlink::io::Protocol> protocol, bool validate_only) {
    try {
        const qlink::io::ScenarioConfig config = load(opt, protocol);
        if (validate_only) {
            std::cout << qlink::io::to_json(config).dump(2) << '\n';
            return 0;
        }
        const auto start = std::chrono::steady_clock::now();
        const qlink::io::RunOutput output = qlink::io::run(config);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (!opt.out.empty()) {
            qlink::io::write_outputs(output, opt.out);
            std::ofstream timing(std::filesystem::path(opt.out) / "timing.json");
            timing << nlohmann::json{{"wall_time_s", wall}}.dump(2) << '\n';
        }
        if (opt.format == "csv") {
            if (!output.tables.empty()) std::cout << output.tables.front().content;
        } else {
            std::cout << qlink::io::dump_report(output.report);
        }
        std::cerr << "qlink: " << qlink::io::to_string(config.protocol) << " finished in " << wall << " s\n";
        return 0;
    } catch (const qlink::ConfigError& e) {
        return report_error("config", e.path(), e.what(), kExitConfig);
    } catch (const nlohmann::json::exception& e) {
        return report_error("config", "", e.what(), kExitConfig);
    } catch (const std::invalid_argument& e) {
        return report_error("config", "", e.what(), kExitConfig);
    } catch (const std::exception& e) {
        return report_error("runtime", "", e.what(), kExitRuntime);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-space teleportation and entanglement-distribution simulator"};
    app.set_version_flag("--version", std::string(qlink::io::tool_version()));
    app.require_subcommand(1);

    Options opt;
    struct Verb {
        const char* name;
        const char* help;
        std::optional<qlink::io::Protocol> protocol;
        bool validate_only;
    };
    using qlink::io::Protocol;
    const Verb verbs[] = {
        {"run", "Run the protocol named in the scenario", std::nullopt, false},
        {"teleport", "One-link teleportation Monte Carlo", Protocol::Teleport, false},
        {"chsh", "Two-link CHSH test with locality audit", Protocol::Chsh, false},
        {"surface", "Analytic fidelity surfaces and 2/3 contours", Protocol::Surface, false},
        {"apt-sweep", "Tracking-loop simulation and rejection sweeps", Protocol::AptSweep, false},
        {"sync", "Two-station synchronization residual", Protocol::Sync, false},
        {"budget", "Itemized link budgets per channel and weather", Protocol::Budget, false},
        {"validate", "Parse the scenario and print the resolved config", std::nullopt, true},
    };

    const Verb* chosen = nullptr;
    for (const Verb& v : verbs) {
        CLI::App* sub = app.add_subcommand(v.name, v.help);
        sub->add_option("--scenario", opt.scenario, "Scenario JSON file or preset name")->required();
        sub->add_option("--seed", opt.seed, "Override the scenario seed");
        sub->add_option("--time-scale", opt.time_scale, "Override the scenario time scale")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", opt.out, "Directory for report.json and CSV tables");
        sub->add_option("--format", opt.format, "Standard output format")->check(CLI::IsMember({"json", "csv"}));
        sub->callback([&chosen, &v] { chosen = &v; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }
    return execute(opt, chosen->protocol, chosen->validate_only);
}

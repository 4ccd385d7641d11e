#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/scenario.hpp"

namespace qlink::io {

struct CsvTable {
    std::string file_name;
    std::string content;
};

struct RunOutput {
    // Config echo, results and tool version. Holds nothing that varies between
    // runs of the same config, so reruns are byte-identical.
    nlohmann::json report;
    std::vector<CsvTable> tables;  // the first one is the protocol's main table
};

const char* tool_version() noexcept;

// Dispatches on config.protocol. Driver failures surface as RuntimeFailure
// (statistics, divergence) or ConfigError (inconsistent inputs).
RunOutput run(const ScenarioConfig& config);

// Canonical report text: two-space indent, sorted keys, trailing newline.
std::string dump_report(const nlohmann::json& report);

// Writes report.json and every table into `dir`, creating it if needed.
void write_outputs(const RunOutput& output, const std::filesystem::path& dir);

}  // namespace qlink::io

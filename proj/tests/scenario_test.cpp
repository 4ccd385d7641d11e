#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qlink/error.hpp"
#include "qlink/run.hpp"
#include "qlink/scenario.hpp"

namespace io = qlink::io;
using nlohmann::json;

namespace {

json minimal_teleport() {
    return json::parse(R"({
        "protocol": "teleport",
        "seed": 1,
        "detectors": {"bob": {"dark_rate": 20}},
        "teleport": {"channel_loss_db": 30}
    })");
}

std::string error_path(const json& doc) {
    try {
        io::parse_config(doc);
    } catch (const qlink::ConfigError& e) {
        return e.path();
    }
    return "<no error>";
}

std::vector<std::filesystem::path> presets() {
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(QLINK_PRESET_DIR))
        if (entry.path().extension() == ".json") out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST(Parse, MinimalTeleportDefaults) {
    const auto c = io::parse_config(minimal_teleport());
    EXPECT_EQ(c.protocol, io::Protocol::Teleport);
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.duration_s, 1.0);
    EXPECT_EQ(c.time_scale, 1.0);
    EXPECT_EQ(c.source.pair_probability, 0.1);
    EXPECT_EQ(c.source.repetition_rate_hz, 76e6);
    ASSERT_TRUE(c.teleport);
    EXPECT_EQ(c.teleport->receiver, "bob");
    EXPECT_EQ(c.teleport->coincidence_window_ns, 2.0);
    EXPECT_EQ(c.teleport->bsm_identification_fraction, 0.5);
    EXPECT_EQ(c.detectors.at("bob").efficiency, 1.0);
}

TEST(Parse, RangeErrorNamesPath) {
    auto doc = minimal_teleport();
    doc["source"] = {{"pair_probability", 1.5}};
    EXPECT_EQ(error_path(doc), "source.pair_probability");
    try {
        io::parse_config(doc);
    } catch (const qlink::ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("1.5"), std::string::npos);
    }
}

TEST(Parse, UnknownKeysRejected) {
    auto doc = minimal_teleport();
    doc["teleport"]["bsm_visibilty"] = 0.6;
    EXPECT_EQ(error_path(doc), "teleport.bsm_visibilty");
    auto top = minimal_teleport();
    top["sed"] = 3;
    EXPECT_EQ(error_path(top), "sed");
}

TEST(Parse, StructuralErrors) {
    auto no_seed = minimal_teleport();
    no_seed.erase("seed");
    EXPECT_EQ(error_path(no_seed), "seed");

    auto no_section = minimal_teleport();
    no_section.erase("teleport");
    EXPECT_EQ(error_path(no_section), "teleport");

    auto bad_detector = minimal_teleport();
    bad_detector["teleport"]["receiver"] = "carol";
    EXPECT_EQ(error_path(bad_detector), "teleport.receiver");

    auto wrong_type = minimal_teleport();
    wrong_type["duration_s"] = "long";
    EXPECT_EQ(error_path(wrong_type), "duration_s");

    auto bad_protocol = minimal_teleport();
    bad_protocol["protocol"] = "teleportation";
    EXPECT_EQ(error_path(bad_protocol), "protocol");

    auto infeasible = minimal_teleport();
    infeasible["source"] = {{"visibility_hv", 0.0}, {"visibility_pm", 0.9}};
    EXPECT_EQ(error_path(infeasible), "source.visibility_pm");
}

TEST(Parse, MissingFileIsConfigError) {
    EXPECT_THROW(io::parse_config_file("/nonexistent/scenario.json"), qlink::ConfigError);
}

TEST(Presets, AllValidateAndRoundTrip) {
    const auto files = presets();
    ASSERT_GE(files.size(), 8u);
    for (const auto& path : files) {
        SCOPED_TRACE(path.filename().string());
        const auto c = io::parse_config_file(path);
        const json echo = io::to_json(c);
        const auto again = io::parse_config(echo);
        EXPECT_EQ(io::to_json(again), echo);
    }
}

TEST(Presets, QinghaiBudgetSpan) {
    const auto c = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/qinghai-97km.json");
    ASSERT_EQ(c.channels.size(), 1u);
    const auto& ch = c.channels.front();
    double lo = 1e9, hi = 0.0;
    for (const auto& w : ch.weather) {
        const double total = io::channel_budget(ch, w.name).total_db;
        lo = std::min(lo, total);
        hi = std::max(hi, total);
    }
    EXPECT_NEAR(lo, 35.0, 0.5);
    EXPECT_NEAR(hi, 53.0, 0.5);
}

TEST(Presets, GeometriesEncoded) {
    const auto two = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/haixin-two-link.json");
    ASSERT_TRUE(two.chsh && two.chsh->locality);
    EXPECT_EQ(two.chsh->locality->receiver_separation_km, 101.8);
    const auto up = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/satellite-uplink-45db.json");
    ASSERT_TRUE(up.teleport);
    EXPECT_EQ(io::teleportation_setup(up).channel_loss_db, 45.0);
    const auto down = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/satellite-two-downlink-75db.json");
    const auto setup = io::chsh_setup(down);
    EXPECT_NEAR(setup.alice_loss_db + setup.bob_loss_db, 75.0, 1e-12);
}

TEST(Run, TimeScaleStretchesDuration) {
    auto doc = minimal_teleport();
    doc["duration_s"] = 10;
    doc["time_scale"] = 3;
    const auto c = io::parse_config(doc);
    EXPECT_EQ(c.simulated_duration_s(), 30.0);
    EXPECT_EQ(io::teleportation_setup(c).duration_s, 30.0);
}

TEST(Run, ReportsAreDeterministic) {
    for (const char* name : {"qinghai-97km.json", "haixin-two-link.json", "sync-two-station.json", "qinghai-budget.json"}) {
        SCOPED_TRACE(name);
        auto c = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/" + name);
        if (c.protocol == io::Protocol::Sync) c.sync->pulses = 5000;
        const auto a = io::run(c);
        const auto b = io::run(c);
        EXPECT_EQ(io::dump_report(a.report), io::dump_report(b.report));
        ASSERT_EQ(a.tables.size(), b.tables.size());
        for (std::size_t i = 0; i < a.tables.size(); ++i) EXPECT_EQ(a.tables[i].content, b.tables[i].content);
        EXPECT_EQ(a.report.at("seed"), c.seed);
        EXPECT_EQ(a.report.at("protocol"), std::string(io::to_string(c.protocol)));
        // The echoed config reproduces the payload.
        const auto replay = io::run(io::parse_config(a.report.at("config")));
        EXPECT_EQ(io::dump_report(replay.report), io::dump_report(a.report));
    }
}

TEST(Run, ChshReportCarriesLocality) {
    const auto c = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/haixin-two-link.json");
    const auto out = io::run(c);
    const auto& loc = out.report.at("results").at("locality");
    EXPECT_TRUE(loc.at("spacelike_separated").get<bool>());
    EXPECT_TRUE(loc.at("settings_spacelike").get<bool>());
}

TEST(Run, WriteOutputs) {
    const auto dir = std::filesystem::temp_directory_path() / "qlink_scenario_test_out";
    std::filesystem::remove_all(dir);
    const auto c = io::parse_config_file(std::string(QLINK_PRESET_DIR) + "/qinghai-budget.json");
    const auto out = io::run(c);
    io::write_outputs(out, dir);
    EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
    for (const auto& t : out.tables) EXPECT_TRUE(std::filesystem::exists(dir / t.file_name));
    std::ifstream in(dir / "report.json");
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(text, io::dump_report(out.report));
    std::filesystem::remove_all(dir);
}

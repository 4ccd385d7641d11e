#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlink/apt.hpp"
#include "qlink/channel.hpp"
#include "qlink/experiments.hpp"
#include "qlink/source.hpp"
#include "qlink/timing.hpp"

namespace qlink::io {

enum class Protocol { Teleport, Chsh, Surface, AptSweep, Sync, Budget };

std::string_view to_string(Protocol p) noexcept;

// Per-weather overrides of a channel; unset fields inherit the channel's.
struct WeatherVariant {
    std::string name;
    std::optional<double> far_field_spot_m;
    double atmospheric_db = 0.0;
    double optics_db = 0.0;
};

struct ChannelConfig {
    std::string name;
    channel::ChannelGeometry geometry;
    double atmospheric_db = 0.0;
    double optics_db = 0.0;
    std::vector<WeatherVariant> weather;
};

struct AptConfig {
    std::vector<apt::LoopStage> stages;  // gains autotuned when absent from the file
    apt::DisturbanceSpec disturbance;
    double duration_s = 10.0;
    double dt_s = 25e-6;
    std::vector<double> probe_frequencies_hz;
    double probe_amplitude_urad = 10.0;
    double sweep_duration_s = 2.0;
    std::string channel;  // geometry used for the pointing-loss feed; empty for none
};

struct TeleportConfig {
    double collinear_twofold_rate = 6.5e5;
    double bsm_identification_fraction = source::kPhiPlusMinusFraction;
    double bsm_visibility = 1.0;
    double coincidence_window_ns = 2.0;
    bool multi_pair_emission = true;
    std::string receiver = "bob";
    // Explicit end-to-end loss; otherwise the budget of `channel` under `weather`.
    std::optional<double> channel_loss_db;
    std::string channel;
    std::string weather;
};

struct LocalityConfig {
    double receiver_separation_km = 0.0;
    double path_difference_km = 0.0;
    double measurement_duration_us = 1.0;
};

struct ChshConfig {
    double effective_visibility_hv = 1.0;
    double effective_visibility_pm = 1.0;
    double coincidence_window_ns = 2.0;
    double qrng_interval_us = 20.0;
    std::string alice_detector = "alice";
    std::string bob_detector = "bob";
    std::optional<double> alice_loss_db;
    std::optional<double> bob_loss_db;
    std::string alice_channel;
    std::string bob_channel;
    std::string weather;
    double accidental_shard_s = 100.0;
    std::optional<LocalityConfig> locality;
};

struct SurfaceSource {
    std::string label;
    double pair_probability = 0.1;
    double detection_efficiency = 0.236;
    double repetition_rate_hz = 76e6;
    std::optional<double> collinear_twofold_rate;  // defaults to the source's own two-fold rate
};

struct SurfaceCheckpoint {
    double loss_db = 0.0;
    double noise_rate = 0.0;
};

struct SurfaceConfig {
    std::vector<SurfaceSource> sources;
    experiments::SurfaceGrid grid;
    double coincidence_window_ns = 26.3;
    double f0 = 1.0;
    std::vector<SurfaceCheckpoint> checkpoints;
};

struct SyncConfig {
    timing::SyncPulseShape shape;
    timing::CfdModel cfd;
    double tdc_resolution_ps = 100.0;
    std::uint64_t pulses = 100'000;
    double alice_distance_m = 0.0;
    double bob_distance_m = 0.0;
    double spcm_jitter_ps = 350.0;
};

struct ScenarioConfig {
    std::string name;
    std::string notes;  // free text carried into the report
    Protocol protocol = Protocol::Teleport;
    std::uint64_t seed = 0;
    double duration_s = 1.0;
    // Simulated duration = duration_s * time_scale.
    double time_scale = 1.0;
    source::SourceParams source;
    std::vector<ChannelConfig> channels;
    std::map<std::string, timing::DetectorParams> detectors;
    std::optional<AptConfig> apt;
    std::optional<TeleportConfig> teleport;
    std::optional<ChshConfig> chsh;
    std::optional<SurfaceConfig> surface;
    std::optional<SyncConfig> sync;

    double simulated_duration_s() const noexcept { return duration_s * time_scale; }
};

// Strict parsing: unknown keys, wrong types and out-of-range values throw
// ConfigError naming the dotted path of the key.
ScenarioConfig parse_config(const nlohmann::json& doc);
ScenarioConfig parse_config_file(const std::filesystem::path& path);

// Fully resolved echo. parse_config(to_json(c)) reproduces c.
nlohmann::json to_json(const ScenarioConfig& config);

const ChannelConfig& find_channel(const ScenarioConfig& config, const std::string& name, const std::string& path);

// Budget of a channel under a named weather variant ("" for the base values).
channel::LinkBudget channel_budget(const ChannelConfig& ch, const std::string& weather);

experiments::TeleportationSetup teleportation_setup(const ScenarioConfig& config);
experiments::ChshSetup chsh_setup(const ScenarioConfig& config);
experiments::SyncSetup sync_setup(const ScenarioConfig& config);
experiments::AptSetup apt_setup(const ScenarioConfig& config);

}  // namespace qlink::io

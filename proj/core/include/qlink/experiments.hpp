#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlink/apt.hpp"
#include "qlink/channel.hpp"
#include "qlink/quantum.hpp"
#include "qlink/source.hpp"
#include "qlink/timing.hpp"

namespace qlink::experiments {

inline constexpr double kClassicalLimit = 2.0 / 3.0;
inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s

// ---------------------------------------------------------------------------
// Analytic fidelity and surfaces

// F = (S f0 + A/2) / (S + A), S = fourfold * 10^(-loss/10),
// A = threefold_bsm_trigger * noise_rate * window. Throws when S + A = 0.
double analytic_fidelity(double loss_db, double noise_rate, const source::LocalRates& rates,
                         timing::CoincidenceWindow window, double f0);

// Loss at which analytic_fidelity falls to 2/3, or nullopt when it never does
// (noise-free, or f0 <= 2/3).
std::optional<double> classical_limit_loss_db(double noise_rate, const source::LocalRates& rates,
                                              timing::CoincidenceWindow window, double f0);

struct SurfaceGrid {
    double loss_min_db = 20.0;
    double loss_max_db = 70.0;
    double dark_min = 0.0;
    double dark_max = 1000.0;
    std::size_t loss_points = 200;
    std::size_t dark_points = 200;
};

struct FidelitySurface {
    std::vector<double> loss_axis_db;
    std::vector<double> dark_axis;
    std::vector<std::vector<double>> fidelity;  // [dark][loss]
    // Interpolated 2/3 crossing per dark-rate row; nullopt when the row stays
    // on one side of the limit over the loss range.
    std::vector<std::optional<double>> contour_loss_db;
    double classical_limit = kClassicalLimit;
};

FidelitySurface fidelity_surface(const source::LocalRates& rates, const SurfaceGrid& grid,
                                 timing::CoincidenceWindow window, double f0);
FidelitySurface fidelity_surface(const source::SourceParams& source, double collinear_twofold_rate,
                                 const SurfaceGrid& grid, timing::CoincidenceWindow window, double f0);

// ---------------------------------------------------------------------------
// One-link teleportation

struct TeleportationSetup {
    source::SourceParams source;
    double collinear_twofold_rate = 6.5e5;
    double bsm_identification_fraction = source::kPhiPlusMinusFraction;
    double bsm_visibility = 1.0;  // two-photon interference visibility at the BSM
    double channel_loss_db = 0.0;
    timing::DetectorParams receiver;
    timing::CoincidenceWindow window{2.0};
    bool multi_pair_emission = true;
    double duration_s = 1.0;
    std::uint64_t seed = 0;
};

// Photon-3 state after the lossy BSM. The BSM element for Phi+/- is
// v |Phi><Phi| + (1 - v) * (H/V-dephased |Phi><Phi|); a distinguishable pair
// still fires the detectors but carries no phase.
struct TeleportedState {
    quantum::DensityMatrix state;
    double probability;
};
TeleportedState teleport_through(const quantum::PureState& chi, const quantum::DensityMatrix& source_state,
                                 double bsm_visibility, quantum::BellIndex outcome);

struct StateModel {
    quantum::Polarization input;
    double phi_plus_share;        // P(Phi+ | Phi+ or Phi-)
    std::array<double, 2> correct; // P(analyzer confirms the Pauli-rotated input | Phi+, Phi-)
    double intrinsic_fidelity;     // single-pair, noise-free
};

struct ExpectedCounts {
    double signal = 0.0;
    double multi_pair = 0.0;
    double accidental = 0.0;

    double total() const noexcept { return signal + multi_pair + accidental; }
};

struct TeleportationModel {
    source::LocalRates rates;            // single-pair rates
    source::BellDiagonalWeights weights;
    double multi_pair_ratio = 0.0;       // P(2 pairs) / P(1 pair) per pulse
    double channel_transmittance = 0.0;  // includes the receiver's efficiency
    std::array<StateModel, 6> states{};
    double intrinsic_fidelity = 1.0;     // mean over the six states, single pairs only
    double effective_f0 = 1.0;           // diluted by multi-pair events
    source::LocalRates effective_rates;  // rates including multi-pair heralds

    ExpectedCounts expected(double duration_s, double noise_rate, timing::CoincidenceWindow window) const;
};

TeleportationModel teleportation_model(const TeleportationSetup& setup);

struct StateResult {
    quantum::Polarization state = quantum::Polarization::H;
    double fidelity = 0.0;
    double statistical_error = 0.0;
    std::uint64_t coincidences = 0;
    double expected_fidelity = 0.0;
};

struct TeleportationResult {
    std::vector<StateResult> per_state;
    double average_fidelity = 0.0;
    double average_error = 0.0;
    std::uint64_t total_coincidences = 0;
    std::uint64_t signal_coincidences = 0;
    std::uint64_t multi_pair_coincidences = 0;
    std::uint64_t accidental_coincidences = 0;
    ExpectedCounts expected;
    double effective_time_s = 0.0;
    bool insufficient_statistics = false;
};

// Each of the six table states gets an equal share of the duration.
TeleportationResult run_teleportation(const TeleportationSetup& setup);

// ---------------------------------------------------------------------------
// Two-link CHSH

struct ChshSetup {
    source::SourceParams source;
    source::BellDiagonalWeights state;
    double alice_loss_db = 0.0;
    double bob_loss_db = 0.0;
    timing::DetectorParams alice;
    timing::DetectorParams bob;
    timing::CoincidenceWindow window{2.0};
    double qrng_interval_us = 20.0;
    std::array<double, 2> alice_angles{0.0, 0.0};  // filled with {0, pi/4} by default_chsh_angles
    std::array<double, 2> bob_angles{0.0, 0.0};
    double duration_s = 1.0;
    std::uint64_t seed = 0;
    double accidental_shard_s = 100.0;
};

// Half-wave / zero-wave modulator bases: Alice {0, pi/4}, Bob {pi/8, 3pi/8}.
void default_chsh_angles(ChshSetup& setup);

struct CorrelationEstimate {
    double alice_angle = 0.0;
    double bob_angle = 0.0;
    double E = 0.0;
    double error = 0.0;
    std::uint64_t coincidences = 0;
    std::uint64_t agree = 0;
};

struct ChshResult {
    // Order (a,b), (a,b'), (a',b), (a',b'); S = |E0 - E1 + E2 + E3|.
    std::array<CorrelationEstimate, 4> correlations{};
    double s_value = 0.0;
    double s_error = 0.0;
    double violation_sigmas = 0.0;  // (S - 2) / s_error
    std::uint64_t coincidences = 0;
    std::uint64_t accidental_coincidences = 0;
    double expected_coincidences = 0.0;
    bool insufficient_statistics = false;
};

ChshResult run_chsh(const ChshSetup& setup);

// Seeded basis-choice bit for the QRNG tick containing time t.
int qrng_bit(std::uint64_t seed, timing::Picoseconds t, double interval_us);

struct LocalityReport {
    double light_time_between_receivers_us = 0.0;
    double measurement_event_delay_us = 0.0;
    double qrng_interval_us = 0.0;
    double measurement_duration_us = 0.0;
    bool spacelike_separated = false;
    bool settings_spacelike = false;
};

LocalityReport locality_audit(double receiver_separation_km, double path_difference_km, double qrng_interval_us,
                              double measurement_duration_us);

// ---------------------------------------------------------------------------
// Synchronization

struct SyncSetup {
    timing::SyncPulseShape shape;
    timing::CfdModel cfd;
    double tdc_resolution_ps = 100.0;
    std::size_t pulses = 100'000;
    double alice_distance_m = 0.0;  // sync laser path length to each station
    double bob_distance_m = 0.0;
    double spcm_jitter_ps = 350.0;
    std::uint64_t seed = 0;
};

struct SyncResult {
    timing::GaussianFit fit;
    double two_delta_ps = 0.0;
    double two_delta_err_ps = 0.0;
    double predicted_two_delta_ps = 0.0;
    // Quantum-channel timing: sync residual combined with both SPCM jitters.
    double quantum_channel_sigma_ps = 0.0;
    std::size_t matched_pulses = 0;
    std::vector<timing::Picoseconds> residuals;  // t_alice - t_bob - nominal path offset
    timing::TimeTagStream alice;
    timing::TimeTagStream bob;
};

SyncResult run_sync(const SyncSetup& setup);

// ---------------------------------------------------------------------------
// Tracking

struct AptSetup {
    std::vector<apt::LoopStage> stages;  // slow to fast
    apt::DisturbanceSpec disturbance;
    double duration_s = 10.0;
    double dt_s = 25e-6;
    std::vector<double> probe_frequencies_hz;
    double probe_amplitude_urad = 10.0;
    double sweep_duration_s = 2.0;
    std::optional<channel::ChannelGeometry> geometry;  // for the pointing-loss feed
    std::uint64_t seed = 0;
};

struct StageBandwidth {
    std::string stage;
    std::vector<apt::RejectionPoint> curve;
    std::optional<double> bandwidth_hz;
};

struct AptResult {
    apt::TrackingResult tracking;
    std::vector<StageBandwidth> stages;  // each stage swept on its own
    std::optional<double> pointing_db;
    std::optional<double> displacement_m;
    std::vector<apt::AcquisitionStep> acquisition;
};

AptResult run_apt(const AptSetup& setup);

}  // namespace qlink::experiments

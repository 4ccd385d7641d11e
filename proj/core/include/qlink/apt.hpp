#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlink/channel.hpp"

// Single-axis pointing servo cascade. Angles are in microradians, times in
// seconds, frequencies in hertz.
namespace qlink::apt {

struct PidGains {
    double kp = 0.0;
    double ki = 0.0;  // s^-1
    double kd = 0.0;  // s
};

struct LoopStage {
    std::string name;
    double sensor_rate_hz = 0.0;
    double sensor_noise_rms_urad = 0.0;
    double actuator_range_urad = 0.0;  // symmetric travel, +/-
    PidGains gains;
    double target_bandwidth_hz = 0.0;
    bool enabled = true;

    void validate() const;
};

struct SinusoidProbe {
    double frequency_hz = 0.0;
    double amplitude_urad = 0.0;
};

struct DisturbanceSpec {
    double drift_rate_urad_per_s = 0.0;  // platform settlement, a linear ramp
    double turbulence_rms_urad = 0.0;
    double turbulence_knee_hz = 10.0;
    std::optional<SinusoidProbe> probe;

    void validate() const;
};

struct TrackingResult {
    double residual_rms_urad = 0.0;
    double dt_s = 0.0;
    std::vector<double> residual_series;
    // One command history per configured stage, in stage order.
    std::vector<std::vector<double>> stage_commands;
};

// Rejection ratio of a pure-integral stage (gain ki) at `frequency_hz`: the
// actuator slews linearly to each command over one sample period, and the
// ratio is taken on the continuous residual.
double predicted_rejection(double ki, double sensor_rate_hz, double frequency_hz);

// Smallest integral gain whose predicted rejection ratio reaches 0.5 at
// `bandwidth_hz`.
double integral_gain_for_bandwidth(double bandwidth_hz, double sensor_rate_hz);

// Stage with gains replaced by the pure-integral tune for its target bandwidth.
LoopStage autotune(LoopStage stage);

// Ramp + first-order filtered Gaussian turbulence (flat below the knee,
// -20 dB/decade above) + optional probe sinusoid, sampled every dt.
std::vector<double> synthesize_disturbance(const DisturbanceSpec& spec, double duration_s, double dt_s,
                                           std::uint64_t seed);

// Each enabled stage samples, at its own rate, the residual left after
// itself and every slower stage. The actuator slews linearly from its position
// to the saturated PID command over one sensor period, so a command reaches
// the beam fully at the next sample (one-sample delay).
// Stages are ordered slow (coarse) to fast.
//
// Throws std::invalid_argument on bad sizing and RuntimeFailure when the
// residual exceeds kInstabilityLimitUrad.
TrackingResult simulate_loop(const std::vector<LoopStage>& stages, const DisturbanceSpec& disturbance,
                             double duration_s, double dt_s, std::uint64_t seed);

inline constexpr double kInstabilityLimitUrad = 1e6;

struct RejectionPoint {
    double frequency_hz = 0.0;
    double ratio = 0.0;
};

// Residual amplitude at the probe frequency with the loop on, divided by the
// amplitude with every stage off.
std::vector<RejectionPoint> rejection_curve(const std::vector<LoopStage>& stages,
                                            const std::vector<double>& probe_frequencies_hz, double probe_amplitude_urad,
                                            double duration_s, double dt_s);

// Linear interpolation of the first 0.5 crossing (below -> above).
// Throws std::invalid_argument when no pair of points brackets 0.5.
double bandwidth_of(const std::vector<RejectionPoint>& curve);

// Amplitude of `series` at `frequency_hz` by single-bin Fourier projection over
// the largest whole number of periods that fits after `skip_s`.
double tone_amplitude(const std::vector<double>& series, double dt_s, double frequency_hz, double skip_s);

// residual_rms * distance, in metres.
double pointing_displacement_m(double residual_rms_urad, double distance_m);

// Pointing loss of `geom` with its pointing jitter replaced by the tracked residual.
double pointing_loss_feed(const TrackingResult& result, const channel::ChannelGeometry& geom);

// Link bring-up before tracking starts. Every step succeeds; the sequence is
// scripted so reports can show the order the stations come up in.
enum class AcquisitionStep {
    GpsCoarsePointing,
    TransmitterBeaconOn,
    ReceiverAcquires,
    ReceiverBeaconOn,
    TransmitterTracking,
    QuantumAndSyncOn,
    Linked,
};

const char* to_string(AcquisitionStep step) noexcept;

class AcquisitionSequence {
public:
    AcquisitionStep state() const noexcept { return state_; }
    bool linked() const noexcept { return state_ == AcquisitionStep::Linked; }
    // Moves to the next step and returns it; stays at Linked once reached.
    AcquisitionStep advance() noexcept;
    // Runs to Linked and returns the visited steps, starting state included.
    std::vector<AcquisitionStep> run_to_link();

private:
    AcquisitionStep state_ = AcquisitionStep::GpsCoarsePointing;
};

}  // namespace qlink::apt

#include "qlink/apt.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>

#include "qlink/error.hpp"
#include "qlink/rng.hpp"

namespace qlink::apt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Fixed seed for the sensor noise of rejection sweeps.
constexpr std::uint64_t kSweepSeed = 0x5eed;

}  // namespace

void LoopStage::validate() const {
    if (!(sensor_rate_hz > 0.0)) throw std::invalid_argument("stage " + name + ": sensor_rate_hz must be positive");
    if (!(target_bandwidth_hz >= 0.0)) throw std::invalid_argument("stage " + name + ": target bandwidth must be >= 0");
    if (!(sensor_rate_hz > 2.0 * target_bandwidth_hz)) {
        throw std::invalid_argument("stage " + name + ": sensor_rate_hz must exceed twice the target bandwidth");
    }
    if (!(sensor_noise_rms_urad >= 0.0)) throw std::invalid_argument("stage " + name + ": sensor noise must be >= 0");
    if (!(actuator_range_urad > 0.0)) throw std::invalid_argument("stage " + name + ": actuator range must be positive");
    if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) || !std::isfinite(gains.kd)) {
        throw std::invalid_argument("stage " + name + ": PID gains must be finite");
    }
}

void DisturbanceSpec::validate() const {
    if (!(drift_rate_urad_per_s >= 0.0)) throw std::invalid_argument("drift rate must be non-negative");
    if (!(turbulence_rms_urad >= 0.0)) throw std::invalid_argument("turbulence rms must be non-negative");
    if (!(turbulence_knee_hz > 0.0)) throw std::invalid_argument("turbulence knee must be positive");
    if (probe && (!(probe->frequency_hz > 0.0) || !(probe->amplitude_urad >= 0.0))) {
        throw std::invalid_argument("probe needs a positive frequency and non-negative amplitude");
    }
}

double predicted_rejection(double ki, double sensor_rate_hz, double frequency_hz) {
    if (!(sensor_rate_hz > 0.0) || !(frequency_hz > 0.0) || !(ki >= 0.0)) {
        throw std::invalid_argument("rejection model needs positive rates and a non-negative gain");
    }
    const double g = ki / sensor_rate_hz;
    const double theta = kTwoPi * frequency_hz / sensor_rate_hz;
    const std::complex<double> z = std::polar(1.0, theta);
    // Sensor reading e_k = mean residual over the last period; command
    // u_k = u_{k-1} + g e_k; the actuator reaches u_k at the next sample and
    // is linear in between, so its mean over a period is the endpoint average.
    const std::complex<double> exposure = (1.0 - 1.0 / z) / std::complex<double>(0.0, theta);
    const std::complex<double> position = g * z * exposure / (z * z - z + 0.5 * g * (z + 1.0));
    const double slew = (2.0 - 2.0 * std::cos(theta)) / (theta * theta);
    return std::abs(1.0 - position * slew);
}

double integral_gain_for_bandwidth(double bandwidth_hz, double sensor_rate_hz) {
    if (!(bandwidth_hz > 0.0) || !(sensor_rate_hz > 2.0 * bandwidth_hz)) {
        throw std::invalid_argument("bandwidth must be positive and below half the sensor rate");
    }
    auto ratio = [&](double g) { return predicted_rejection(g * sensor_rate_hz, sensor_rate_hz, bandwidth_hz); };
    // Smallest stable loop gain (0 < g < 2) whose ratio reaches 0.5.
    double lo = 1e-6;
    double hi = lo;
    while (ratio(hi) > 0.5) {
        lo = hi;
        hi *= 1.01;
        if (hi >= 2.0) throw std::invalid_argument("requested bandwidth is out of reach for a stable sampled loop");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > 0.5 ? lo : hi) = mid;
    }
    return hi * sensor_rate_hz;
}

LoopStage autotune(LoopStage stage) {
    stage.gains = PidGains{0.0, integral_gain_for_bandwidth(stage.target_bandwidth_hz, stage.sensor_rate_hz), 0.0};
    return stage;
}

std::vector<double> synthesize_disturbance(const DisturbanceSpec& spec, double duration_s, double dt_s,
                                           std::uint64_t seed) {
    spec.validate();
    if (!(duration_s > 0.0) || !(dt_s > 0.0)) throw std::invalid_argument("duration and dt must be positive");
    const auto steps = static_cast<std::size_t>(std::llround(duration_s / dt_s));

    Rng rng = make_rng(seed, hash_label("turbulence"));
    std::normal_distribution<double> unit(0.0, 1.0);
    const double a = std::exp(-kTwoPi * spec.turbulence_knee_hz * dt_s);
    const double drive = spec.turbulence_rms_urad * std::sqrt(1.0 - a * a);

    std::vector<double> d(steps);
    double turb = spec.turbulence_rms_urad * unit(rng);  // stationary start
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt_s;
        double value = spec.drift_rate_urad_per_s * t + turb;
        if (spec.probe) value += spec.probe->amplitude_urad * std::sin(kTwoPi * spec.probe->frequency_hz * t);
        d[n] = value;
        turb = a * turb + drive * unit(rng);
    }
    return d;
}

TrackingResult simulate_loop(const std::vector<LoopStage>& stages, const DisturbanceSpec& disturbance,
                             double duration_s, double dt_s, std::uint64_t seed) {
    if (stages.size() > 3) throw std::invalid_argument("at most three loop stages are supported");
    double fastest = 0.0;
    for (const LoopStage& s : stages) {
        s.validate();
        if (s.enabled) fastest = std::max(fastest, s.sensor_rate_hz);
    }
    if (fastest > 0.0 && dt_s > 1.0 / (2.0 * fastest) * (1.0 + 1e-9)) {
        throw std::invalid_argument("dt must not exceed half the fastest sensor period");
    }

    TrackingResult result;
    result.dt_s = dt_s;
    const std::vector<double> d = synthesize_disturbance(disturbance, duration_s, dt_s, derive_seed(seed, "disturbance"));
    const std::size_t steps = d.size();

    struct StageState {
        Rng rng;
        double next_sample_s = 0.0;
        double integral = 0.0;
        double previous_error = 0.0;
        bool primed = false;
        double command = 0.0;     // actuator position
        double slew_from = 0.0;   // position at the last sample
        double slew_to = 0.0;     // command computed at the last sample
        double slew_start_s = 0.0;
        double exposure_sum = 0.0;  // trapezoid sum of the seen residual since the last sample
        std::size_t exposure_steps = 0;
    };
    std::vector<StageState> state;
    state.reserve(stages.size());
    for (const LoopStage& s : stages) state.push_back(StageState{Rng{derive_seed(seed, "sensor:" + s.name)}});

    std::normal_distribution<double> unit(0.0, 1.0);
    result.residual_series.resize(steps);
    result.stage_commands.assign(stages.size(), std::vector<double>(steps, 0.0));

    double sum_sq = 0.0;
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * dt_s;
        double applied = 0.0;  // sum of commands of this and slower stages
        for (std::size_t k = 0; k < stages.size(); ++k) {
            const LoopStage& stage = stages[k];
            StageState& st = state[k];
            if (!stage.enabled) {
                result.stage_commands[k][n] = 0.0;
                continue;
            }
            if (t + 0.5 * dt_s >= st.next_sample_s) {
                const double period = 1.0 / stage.sensor_rate_hz;
                st.command = st.slew_to;
                const double seen = d[n] - applied - st.command;
                const double mean = st.exposure_steps == 0
                                        ? seen
                                        : (st.exposure_sum + 0.5 * seen) / static_cast<double>(st.exposure_steps);
                st.exposure_sum = 0.5 * seen;
                st.exposure_steps = 0;
                const double error = mean + stage.sensor_noise_rms_urad * unit(st.rng);
                const double integral = st.integral + error * period;
                const double derivative = st.primed ? (error - st.previous_error) / period : 0.0;
                double command = stage.gains.kp * error + stage.gains.ki * integral + stage.gains.kd * derivative;
                if (std::abs(command) > stage.actuator_range_urad) {
                    command = std::copysign(stage.actuator_range_urad, command);  // hold the integrator
                } else {
                    st.integral = integral;
                }
                st.slew_from = st.command;
                st.slew_to = command;
                st.slew_start_s = t;
                st.previous_error = error;
                st.primed = true;
                st.next_sample_s += period;
            } else {
                if (st.primed) {
                    const double frac = std::min(1.0, (t - st.slew_start_s) * stage.sensor_rate_hz);
                    st.command = st.slew_from + frac * (st.slew_to - st.slew_from);
                }
                st.exposure_sum += d[n] - applied - st.command;
            }
            ++st.exposure_steps;
            applied += st.command;
            result.stage_commands[k][n] = st.command;
        }
        const double r = d[n] - applied;
        if (!(std::abs(r) <= kInstabilityLimitUrad)) {
            throw RuntimeFailure("tracking loop unstable: residual reached " + std::to_string(r) + " urad at t=" +
                                 std::to_string(t) + " s");
        }
        result.residual_series[n] = r;
        sum_sq += r * r;
    }
    result.residual_rms_urad = steps ? std::sqrt(sum_sq / static_cast<double>(steps)) : 0.0;
    return result;
}

double tone_amplitude(const std::vector<double>& series, double dt_s, double frequency_hz, double skip_s) {
    const auto first = static_cast<std::size_t>(std::llround(skip_s / dt_s));
    if (first >= series.size()) throw std::invalid_argument("skip exceeds series length");
    const double available_s = static_cast<double>(series.size() - first) * dt_s;
    const double periods = std::floor(available_s * frequency_hz);
    if (periods < 1.0) throw std::invalid_argument("series shorter than one probe period");
    const auto count = static_cast<std::size_t>(std::llround(periods / frequency_hz / dt_s));

    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < count; ++i) {
        const double t = static_cast<double>(first + i) * dt_s;
        acc += series[first + i] * std::polar(1.0, -kTwoPi * frequency_hz * t);
    }
    return 2.0 * std::abs(acc) / static_cast<double>(count);
}

std::vector<RejectionPoint> rejection_curve(const std::vector<LoopStage>& stages,
                                            const std::vector<double>& probe_frequencies_hz, double probe_amplitude_urad,
                                            double duration_s, double dt_s) {
    if (!(probe_amplitude_urad > 0.0)) throw std::invalid_argument("probe amplitude must be positive");
    double fastest = 0.0;
    for (const LoopStage& s : stages) {
        if (s.enabled) fastest = std::max(fastest, s.sensor_rate_hz);
    }
    if (fastest == 0.0) throw std::invalid_argument("rejection_curve needs at least one enabled stage");

    std::vector<LoopStage> off = stages;
    for (LoopStage& s : off) s.enabled = false;

    std::vector<RejectionPoint> curve;
    curve.reserve(probe_frequencies_hz.size());
    for (double f : probe_frequencies_hz) {
        if (!(f > 0.0 && f < fastest / 2.0)) {
            throw std::invalid_argument("probe frequency " + std::to_string(f) + " Hz is outside (0, sensor_rate/2)");
        }
        DisturbanceSpec probe;
        probe.probe = SinusoidProbe{f, probe_amplitude_urad};
        const TrackingResult on = simulate_loop(stages, probe, duration_s, dt_s, kSweepSeed);
        const TrackingResult open = simulate_loop(off, probe, duration_s, dt_s, kSweepSeed);
        const double skip = 0.25 * duration_s;
        curve.push_back({f, tone_amplitude(on.residual_series, dt_s, f, skip) /
                                tone_amplitude(open.residual_series, dt_s, f, skip)});
    }
    return curve;
}

double bandwidth_of(const std::vector<RejectionPoint>& curve) {
    std::vector<RejectionPoint> sorted = curve;
    std::sort(sorted.begin(), sorted.end(),
              [](const RejectionPoint& a, const RejectionPoint& b) { return a.frequency_hz < b.frequency_hz; });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const RejectionPoint& lo = sorted[i];
        const RejectionPoint& hi = sorted[i + 1];
        if (lo.ratio < 0.5 && hi.ratio >= 0.5) {
            return lo.frequency_hz + (0.5 - lo.ratio) * (hi.frequency_hz - lo.frequency_hz) / (hi.ratio - lo.ratio);
        }
    }
    throw std::invalid_argument("rejection curve does not bracket a ratio of 0.5");
}

double pointing_displacement_m(double residual_rms_urad, double distance_m) {
    return residual_rms_urad * 1e-6 * distance_m;
}

double pointing_loss_feed(const TrackingResult& result, const channel::ChannelGeometry& geom) {
    channel::ChannelGeometry tracked = geom;
    tracked.pointing_rms_rad = result.residual_rms_urad * 1e-6;
    return channel::pointing_loss_db(tracked);
}

const char* to_string(AcquisitionStep step) noexcept {
    switch (step) {
        case AcquisitionStep::GpsCoarsePointing: return "gps-coarse-pointing";
        case AcquisitionStep::TransmitterBeaconOn: return "transmitter-beacon-on";
        case AcquisitionStep::ReceiverAcquires: return "receiver-acquires";
        case AcquisitionStep::ReceiverBeaconOn: return "receiver-beacon-on";
        case AcquisitionStep::TransmitterTracking: return "transmitter-tracking";
        case AcquisitionStep::QuantumAndSyncOn: return "quantum-and-sync-on";
        case AcquisitionStep::Linked: return "linked";
    }
    return "?";
}

AcquisitionStep AcquisitionSequence::advance() noexcept {
    if (state_ != AcquisitionStep::Linked) state_ = static_cast<AcquisitionStep>(static_cast<int>(state_) + 1);
    return state_;
}

std::vector<AcquisitionStep> AcquisitionSequence::run_to_link() {
    std::vector<AcquisitionStep> visited{state_};
    while (!linked()) visited.push_back(advance());
    return visited;
}

}  // namespace qlink::apt

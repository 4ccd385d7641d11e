#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qlink/quantum.hpp"

namespace qlink::source {

struct SourceParams {
    double pair_probability = 0.1;       // pairs per pump pulse
    double detection_efficiency = 0.236; // per photon, local
    double repetition_rate_hz = 76e6;
    double visibility_hv = 1.0;
    double visibility_pm = 1.0;

    // Throws std::invalid_argument on an out-of-range field.
    void validate() const;
};

// Weights of |Phi+>, |Phi->, |Psi+>, |Psi-> in the emitted mixture.
struct BellDiagonalWeights {
    std::array<double, 4> lambda{1.0, 0.0, 0.0, 0.0};

    quantum::DensityMatrix density() const;
};

// Solves lambda1+lambda2-lambda3-lambda4 = v_hv, lambda1-lambda2+lambda3-lambda4 = v_pm
// with lambda3 = lambda4 and unit sum. Throws std::invalid_argument when a
// weight would be negative.
BellDiagonalWeights bell_diagonal_from_visibilities(double v_hv, double v_pm);

// Correlation visibilities of a two-photon state in the H/V, +/- and R/L
// bases (magnitude of the basis correlation).
double visibility_hv(const quantum::DensityMatrix& rho);
double visibility_pm(const quantum::DensityMatrix& rho);
double visibility_rl(const quantum::DensityMatrix& rho);

struct LocalRates {
    double twofold_entangled = 0.0;     // s^-1
    double twofold_collinear = 0.0;     // s^-1
    double fourfold = 0.0;              // s^-1
    double threefold_bsm_trigger = 0.0; // s^-1, photon-3 detection removed
};

// Polarizing-beam-splitter BSM only resolves Phi+ and Phi-.
inline constexpr double kPhiPlusMinusFraction = 0.5;

LocalRates local_rates(const SourceParams& entangled, double collinear_twofold_rate,
                       double bsm_identification_fraction = kPhiPlusMinusFraction);

// Per-pulse emission probabilities truncated at two pairs: P(1) = p, P(2) = p^2,
// with P(2) capped so the three probabilities stay a distribution.
struct EmissionProbabilities {
    double none;
    double single;
    double dual;
};
EmissionProbabilities emission_probabilities(double pair_probability);

struct PairEvent {
    std::uint64_t pulse = 0;
    int pairs = 1;

    // Two pairs in one pulse carry no usable polarization correlation.
    bool incoherent() const noexcept { return pairs >= 2; }
};

// One record per pulse that emitted at least one pair, in pulse order.
std::vector<PairEvent> sample_pair_events(const SourceParams& params, std::uint64_t pulses, std::uint64_t seed);

}  // namespace qlink::source

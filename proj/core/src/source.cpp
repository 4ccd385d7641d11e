#include "qlink/source.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "qlink/rng.hpp"

namespace qlink::source {

using quantum::DensityMatrix;
using quantum::MeasurementSetting;

void SourceParams::validate() const {
    if (!(pair_probability >= 0.0 && pair_probability <= 1.0)) {
        throw std::invalid_argument("pair_probability must lie in [0, 1]");
    }
    if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0)) {
        throw std::invalid_argument("detection_efficiency must lie in (0, 1]");
    }
    if (!(repetition_rate_hz > 0.0)) throw std::invalid_argument("repetition_rate_hz must be positive");
    if (!(visibility_hv >= 0.0 && visibility_hv <= 1.0)) throw std::invalid_argument("visibility_hv must lie in [0, 1]");
    if (!(visibility_pm >= 0.0 && visibility_pm <= 1.0)) throw std::invalid_argument("visibility_pm must lie in [0, 1]");
}

DensityMatrix BellDiagonalWeights::density() const { return DensityMatrix::bell_diagonal(lambda); }

BellDiagonalWeights bell_diagonal_from_visibilities(double v_hv, double v_pm) {
    if (!(v_hv >= 0.0 && v_hv <= 1.0 && v_pm >= 0.0 && v_pm <= 1.0)) {
        throw std::invalid_argument("visibilities must lie in [0, 1]");
    }
    const double phi_sum = 0.5 * (1.0 + v_hv);  // lambda1 + lambda2
    const double psi_each = 0.25 * (1.0 - v_hv);
    BellDiagonalWeights w;
    w.lambda = {0.5 * (phi_sum + v_pm), 0.5 * (phi_sum - v_pm), psi_each, psi_each};
    for (std::size_t i = 0; i < w.lambda.size(); ++i) {
        if (w.lambda[i] < 0.0) {
            throw std::invalid_argument("visibilities (" + std::to_string(v_hv) + ", " + std::to_string(v_pm) +
                                        ") are infeasible: lambda" + std::to_string(i + 1) + " = " +
                                        std::to_string(w.lambda[i]) + " < 0 (need v_pm <= (1 + v_hv)/2)");
        }
    }
    return w;
}

double visibility_hv(const DensityMatrix& rho) {
    return std::abs(quantum::correlation_E(rho, MeasurementSetting{0.0}, MeasurementSetting{0.0}));
}

double visibility_pm(const DensityMatrix& rho) {
    const MeasurementSetting diag{std::numbers::pi / 4.0};
    return std::abs(quantum::correlation_E(rho, diag, diag));
}

double visibility_rl(const DensityMatrix& rho) {
    quantum::Matrix y(2, 2);
    y << 0.0, quantum::Complex{0.0, -1.0}, quantum::Complex{0.0, 1.0}, 0.0;
    return std::abs((rho.matrix() * quantum::kron(y, y)).trace().real());
}

LocalRates local_rates(const SourceParams& entangled, double collinear_twofold_rate,
                       double bsm_identification_fraction) {
    if (!(entangled.detection_efficiency > 0.0)) throw std::invalid_argument("detection efficiency must be positive");
    entangled.validate();
    if (!(collinear_twofold_rate >= 0.0)) throw std::invalid_argument("collinear two-fold rate must be non-negative");
    if (!(bsm_identification_fraction > 0.0 && bsm_identification_fraction <= 1.0)) {
        throw std::invalid_argument("BSM identification fraction must lie in (0, 1]");
    }
    const double f = entangled.repetition_rate_hz;
    const double eta = entangled.detection_efficiency;

    LocalRates r;
    r.twofold_entangled = f * entangled.pair_probability * eta * eta;
    r.twofold_collinear = collinear_twofold_rate;
    r.fourfold = r.twofold_entangled * collinear_twofold_rate / f * bsm_identification_fraction;
    r.threefold_bsm_trigger = r.fourfold / eta;
    return r;
}

EmissionProbabilities emission_probabilities(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("pair probability must lie in [0, 1]");
    const double dual = std::min(p * p, 1.0 - p);
    return EmissionProbabilities{1.0 - p - dual, p, dual};
}

std::vector<PairEvent> sample_pair_events(const SourceParams& params, std::uint64_t pulses, std::uint64_t seed) {
    const EmissionProbabilities probs = emission_probabilities(params.pair_probability);
    const double emit = probs.single + probs.dual;
    std::vector<PairEvent> events;
    if (pulses == 0 || emit <= 0.0) return events;

    Rng rng = make_rng(seed, hash_label("pair-events"));
    std::bernoulli_distribution is_dual(probs.dual / emit);
    events.reserve(static_cast<std::size_t>(static_cast<double>(pulses) * emit * 1.05) + 16);

    if (emit >= 1.0) {
        for (std::uint64_t i = 0; i < pulses; ++i) events.push_back({i, is_dual(rng) ? 2 : 1});
        return events;
    }
    // Skip straight to the next emitting pulse.
    std::geometric_distribution<std::uint64_t> gap(emit);
    std::uint64_t pulse = gap(rng);
    while (pulse < pulses) {
        events.push_back({pulse, is_dual(rng) ? 2 : 1});
        const std::uint64_t step = gap(rng);
        if (step >= pulses - pulse) break;
        pulse += step + 1;
    }
    return events;
}

}  // namespace qlink::source

#include "qlink/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "qlink/error.hpp"
#include "qlink/rng.hpp"

namespace qlink::experiments {

using quantum::BellIndex;
using quantum::DensityMatrix;
using quantum::Matrix;
using quantum::MeasurementSetting;
using quantum::Polarization;
using quantum::PureState;

namespace {

double window_seconds(timing::CoincidenceWindow window) { return window.width_ns * 1e-9; }

void check_fidelity_inputs(double noise_rate, const source::LocalRates& rates, timing::CoincidenceWindow window,
                           double f0) {
    if (!(f0 >= 0.5 && f0 <= 1.0)) throw std::invalid_argument("intrinsic fidelity must lie in [0.5, 1]");
    if (!(noise_rate >= 0.0)) throw std::invalid_argument("noise rate must be non-negative");
    if (!(window.width_ns > 0.0)) throw std::invalid_argument("coincidence window must be positive");
    if (!(rates.fourfold >= 0.0 && rates.threefold_bsm_trigger >= 0.0)) {
        throw std::invalid_argument("rates must be non-negative");
    }
}

std::vector<double> linear_axis(double lo, double hi, std::size_t n) {
    std::vector<double> axis(n);
    for (std::size_t i = 0; i < n; ++i) {
        axis[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return axis;
}

template <class Int>
Int binomial(Rng& rng, Int n, double p) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<Int>(n, p)(rng);
}

}  // namespace

// ---------------------------------------------------------------------------

double analytic_fidelity(double loss_db, double noise_rate, const source::LocalRates& rates,
                         timing::CoincidenceWindow window, double f0) {
    check_fidelity_inputs(noise_rate, rates, window, f0);
    if (!(loss_db >= 0.0)) throw std::invalid_argument("loss must be non-negative");
    const double signal = rates.fourfold * std::pow(10.0, -loss_db / 10.0);
    const double accidental = rates.threefold_bsm_trigger * noise_rate * window_seconds(window);
    if (!(signal + accidental > 0.0)) {
        throw std::invalid_argument("fidelity undefined: no signal and no accidental coincidences");
    }
    return (signal * f0 + 0.5 * accidental) / (signal + accidental);
}

std::optional<double> classical_limit_loss_db(double noise_rate, const source::LocalRates& rates,
                                              timing::CoincidenceWindow window, double f0) {
    check_fidelity_inputs(noise_rate, rates, window, f0);
    const double accidental = rates.threefold_bsm_trigger * noise_rate * window_seconds(window);
    if (accidental <= 0.0 || f0 <= kClassicalLimit || rates.fourfold <= 0.0) return std::nullopt;
    // S (f0 - 2/3) = A (2/3 - 1/2)
    const double signal = accidental * (kClassicalLimit - 0.5) / (f0 - kClassicalLimit);
    return 10.0 * std::log10(rates.fourfold / signal);
}

FidelitySurface fidelity_surface(const source::LocalRates& rates, const SurfaceGrid& grid,
                                 timing::CoincidenceWindow window, double f0) {
    if (grid.loss_points == 0 || grid.dark_points == 0) throw std::invalid_argument("surface grid is empty");
    if (!(grid.loss_max_db >= grid.loss_min_db) || !(grid.dark_max >= grid.dark_min)) {
        throw std::invalid_argument("surface ranges must be ordered min <= max");
    }
    FidelitySurface s;
    s.loss_axis_db = linear_axis(grid.loss_min_db, grid.loss_max_db, grid.loss_points);
    s.dark_axis = linear_axis(grid.dark_min, grid.dark_max, grid.dark_points);
    s.fidelity.assign(grid.dark_points, std::vector<double>(grid.loss_points));
    s.contour_loss_db.assign(grid.dark_points, std::nullopt);

    for (std::size_t d = 0; d < grid.dark_points; ++d) {
        std::vector<double>& row = s.fidelity[d];
        for (std::size_t l = 0; l < grid.loss_points; ++l) {
            row[l] = analytic_fidelity(s.loss_axis_db[l], s.dark_axis[d], rates, window, f0);
        }
        for (std::size_t l = 0; l + 1 < grid.loss_points; ++l) {
            if (row[l] >= kClassicalLimit && row[l + 1] < kClassicalLimit) {
                const double t = (row[l] - kClassicalLimit) / (row[l] - row[l + 1]);
                s.contour_loss_db[d] = s.loss_axis_db[l] + t * (s.loss_axis_db[l + 1] - s.loss_axis_db[l]);
                break;
            }
        }
    }
    return s;
}

FidelitySurface fidelity_surface(const source::SourceParams& source, double collinear_twofold_rate,
                                 const SurfaceGrid& grid, timing::CoincidenceWindow window, double f0) {
    return fidelity_surface(source::local_rates(source, collinear_twofold_rate), grid, window, f0);
}

// ---------------------------------------------------------------------------

TeleportedState teleport_through(const PureState& chi, const DensityMatrix& source_state, double bsm_visibility,
                                 BellIndex outcome) {
    if (chi.qubits() != 1 || source_state.qubits() != 2) {
        throw std::invalid_argument("teleport_through needs a one-qubit input and a two-qubit source state");
    }
    if (!(bsm_visibility >= 0.0 && bsm_visibility <= 1.0)) {
        throw std::invalid_argument("BSM visibility must lie in [0, 1]");
    }
    const quantum::Vector b = quantum::bell_state(outcome).amplitudes();
    const Matrix coherent = b * b.adjoint();
    const Matrix dephased = Matrix(coherent.diagonal().asDiagonal());
    const Matrix element = bsm_visibility * coherent + (1.0 - bsm_visibility) * dephased;

    const Matrix input = chi.amplitudes() * chi.amplitudes().adjoint();
    const Matrix joint = quantum::kron(input, source_state.matrix());
    const Matrix weighted = quantum::kron(element, Matrix::Identity(2, 2)) * joint;
    const std::array<int, 2> traced{0, 1};
    Matrix reduced = quantum::partial_trace(weighted, 3, traced);
    reduced = 0.5 * (reduced + reduced.adjoint().eval());

    const double probability = reduced.trace().real();
    if (!(probability > 0.0)) throw std::invalid_argument("BSM outcome has zero probability");
    return TeleportedState{DensityMatrix::from_matrix(reduced / probability), probability};
}

ExpectedCounts TeleportationModel::expected(double duration_s, double noise_rate,
                                            timing::CoincidenceWindow window) const {
    ExpectedCounts c;
    c.signal = rates.fourfold * channel_transmittance * duration_s;
    c.multi_pair = c.signal * multi_pair_ratio;
    c.accidental = effective_rates.threefold_bsm_trigger * noise_rate * window_seconds(window) * duration_s;
    return c;
}

TeleportationModel teleportation_model(const TeleportationSetup& setup) {
    setup.receiver.validate();
    if (!(setup.channel_loss_db >= 0.0)) throw std::invalid_argument("channel loss must be non-negative");

    TeleportationModel m;
    m.rates = source::local_rates(setup.source, setup.collinear_twofold_rate, setup.bsm_identification_fraction);
    m.weights = source::bell_diagonal_from_visibilities(setup.source.visibility_hv, setup.source.visibility_pm);
    const double p = setup.source.pair_probability;
    if (setup.multi_pair_emission && p > 0.0) {
        m.multi_pair_ratio = source::emission_probabilities(p).dual / p;
    }
    m.channel_transmittance = channel::transmittance(setup.channel_loss_db) * setup.receiver.efficiency;

    const DensityMatrix rho = m.weights.density();
    double sum = 0.0;
    for (std::size_t i = 0; i < quantum::kTableStates.size(); ++i) {
        const Polarization pol = quantum::kTableStates[i];
        const PureState chi = quantum::polarization_state(pol);
        StateModel& sm = m.states[i];
        sm.input = pol;
        const std::array<BellIndex, 2> outcomes{BellIndex::PhiPlus, BellIndex::PhiMinus};
        std::array<double, 2> prob{};
        for (std::size_t k = 0; k < 2; ++k) {
            const TeleportedState out = teleport_through(chi, rho, setup.bsm_visibility, outcomes[k]);
            prob[k] = out.probability;
            sm.correct[k] = quantum::state_fidelity(out.state, quantum::teleport_project(chi, outcomes[k]).state);
        }
        sm.phi_plus_share = prob[0] / (prob[0] + prob[1]);
        sm.intrinsic_fidelity = sm.phi_plus_share * sm.correct[0] + (1.0 - sm.phi_plus_share) * sm.correct[1];
        sum += sm.intrinsic_fidelity;
    }
    m.intrinsic_fidelity = sum / static_cast<double>(m.states.size());
    m.effective_f0 = (m.intrinsic_fidelity + 0.5 * m.multi_pair_ratio) / (1.0 + m.multi_pair_ratio);
    m.effective_rates = m.rates;
    m.effective_rates.fourfold *= 1.0 + m.multi_pair_ratio;
    m.effective_rates.threefold_bsm_trigger *= 1.0 + m.multi_pair_ratio;
    return m;
}

TeleportationResult run_teleportation(const TeleportationSetup& setup) {
    if (!(setup.duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    if (!(setup.window.width_ns > 0.0)) throw std::invalid_argument("coincidence window must be positive");
    const TeleportationModel model = teleportation_model(setup);

    const double eta_local = setup.source.detection_efficiency;
    const double f = setup.source.repetition_rate_hz;
    const double r = model.multi_pair_ratio;
    const double herald_rate = model.effective_rates.threefold_bsm_trigger;
    const double survive = eta_local * model.channel_transmittance;
    if (survive > 1.0) throw std::invalid_argument("photon-3 survival probability exceeds 1");
    const double herald_per_pulse = herald_rate / f;
    if (herald_per_pulse > 1.0) throw std::invalid_argument("herald probability per pulse exceeds 1");
    const double accidental_per_tag = std::min(1.0, herald_rate * window_seconds(setup.window));
    const double noise_rate = setup.receiver.noise_rate();

    const double segment_s = setup.duration_s / static_cast<double>(quantum::kTableStates.size());
    const auto pulses = static_cast<std::int64_t>(std::llround(f * segment_s));
    const ExpectedCounts seg_expected = model.expected(segment_s, noise_rate, setup.window);
    // Noise tags are drawn in bounded slices to cap memory on long runs.
    constexpr double kNoiseSliceS = 600.0;

    TeleportationResult res;
    res.effective_time_s = setup.duration_s;
    res.expected = model.expected(setup.duration_s, noise_rate, setup.window);
    double variance_sum = 0.0;
    double fidelity_sum = 0.0;

    for (const StateModel& sm : model.states) {
        const std::string label(quantum::to_string(sm.input));
        Rng rng = make_rng(setup.seed, hash_label("teleport:" + label));

        const auto heralds = binomial<std::int64_t>(rng, pulses, herald_per_pulse);
        const auto dual = binomial<std::int64_t>(rng, heralds, r / (1.0 + r));
        const auto single_surv = binomial<std::int64_t>(rng, heralds - dual, survive);
        const auto dual_surv = binomial<std::int64_t>(rng, dual, survive);

        const auto phi_plus = binomial<std::int64_t>(rng, single_surv, sm.phi_plus_share);
        const auto single_correct = binomial<std::int64_t>(rng, phi_plus, sm.correct[0]) +
                                    binomial<std::int64_t>(rng, single_surv - phi_plus, sm.correct[1]);
        const auto dual_correct = binomial<std::int64_t>(rng, dual_surv, 0.5);

        std::int64_t noise_tags = 0;
        const auto slices = static_cast<std::size_t>(std::ceil(segment_s / kNoiseSliceS));
        for (std::size_t i = 0; i < slices; ++i) {
            const double len = std::min(kNoiseSliceS, segment_s - static_cast<double>(i) * kNoiseSliceS);
            const std::uint64_t slice_seed = derive_seed(setup.seed, hash_label("noise:" + label) + i);
            noise_tags += static_cast<std::int64_t>(timing::generate_noise_tags(setup.receiver, len, slice_seed).size());
        }
        const auto accidental = binomial<std::int64_t>(rng, noise_tags, accidental_per_tag);
        const auto accidental_correct = binomial<std::int64_t>(rng, accidental, 0.5);

        StateResult sr;
        sr.state = sm.input;
        const std::int64_t total = single_surv + dual_surv + accidental;
        sr.coincidences = static_cast<std::uint64_t>(total);
        if (total > 0) {
            sr.fidelity = static_cast<double>(single_correct + dual_correct + accidental_correct) /
                          static_cast<double>(total);
            sr.statistical_error = std::sqrt(sr.fidelity * (1.0 - sr.fidelity) / static_cast<double>(total));
        } else {
            res.insufficient_statistics = true;
        }
        const double exp_total = seg_expected.total();
        sr.expected_fidelity =
            exp_total > 0.0 ? (seg_expected.signal * sm.intrinsic_fidelity +
                               0.5 * (seg_expected.multi_pair + seg_expected.accidental)) / exp_total
                            : 0.0;

        res.signal_coincidences += static_cast<std::uint64_t>(single_surv);
        res.multi_pair_coincidences += static_cast<std::uint64_t>(dual_surv);
        res.accidental_coincidences += static_cast<std::uint64_t>(accidental);
        res.total_coincidences += sr.coincidences;
        fidelity_sum += sr.fidelity;
        variance_sum += sr.statistical_error * sr.statistical_error;
        res.per_state.push_back(sr);
    }
    const auto n = static_cast<double>(res.per_state.size());
    res.average_fidelity = fidelity_sum / n;
    res.average_error = std::sqrt(variance_sum) / n;
    return res;
}

// ---------------------------------------------------------------------------

void default_chsh_angles(ChshSetup& setup) {
    constexpr double pi = std::numbers::pi;
    setup.alice_angles = {0.0, pi / 4.0};
    setup.bob_angles = {pi / 8.0, 3.0 * pi / 8.0};
}

int qrng_bit(std::uint64_t seed, timing::Picoseconds t, double interval_us) {
    if (!(interval_us > 0.0)) throw std::invalid_argument("QRNG interval must be positive");
    if (t < 0) throw std::invalid_argument("QRNG time must be non-negative");
    const auto tick = static_cast<std::uint64_t>(std::floor(static_cast<double>(t) / (interval_us * 1e6)));
    return static_cast<int>(mix64(derive_seed(seed, tick)) & 1U);
}

ChshResult run_chsh(const ChshSetup& setup) {
    setup.source.validate();
    setup.alice.validate();
    setup.bob.validate();
    if (!(setup.duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    if (!(setup.accidental_shard_s > 0.0)) throw std::invalid_argument("accidental shard length must be positive");
    if (!(setup.window.width_ns > 0.0)) throw std::invalid_argument("coincidence window must be positive");

    const DensityMatrix rho = setup.state.density();
    const double f = setup.source.repetition_rate_hz;
    const double p = setup.source.pair_probability;
    const double eta = setup.source.detection_efficiency;
    const double tau_a = channel::transmittance(setup.alice_loss_db) * setup.alice.efficiency;
    const double tau_b = channel::transmittance(setup.bob_loss_db) * setup.bob.efficiency;
    const double pair_coincidence = p * eta * eta * tau_a * tau_b;
    const double singles_a = f * p * eta * tau_a;
    const double singles_b = f * p * eta * tau_b;
    const double rate_a = singles_a + setup.alice.noise_rate();
    const double rate_b = singles_b + setup.bob.noise_rate();

    ChshResult res;
    res.expected_coincidences = f * pair_coincidence * setup.duration_s +
                                timing::expected_accidentals(rate_a, rate_b, setup.window, setup.duration_s);

    // Setting pair index = 2 * alice_bit + bob_bit, joint outcome index = 2 * [x = -1] + [y = -1].
    std::array<std::discrete_distribution<int>, 4> joint;
    for (int i = 0; i < 4; ++i) {
        const MeasurementSetting a{setup.alice_angles[static_cast<std::size_t>(i / 2)]};
        const MeasurementSetting b{setup.bob_angles[static_cast<std::size_t>(i % 2)]};
        std::array<double, 4> w{};
        for (int o = 0; o < 4; ++o) {
            const Matrix proj =
                quantum::kron(quantum::analyzer_projector(a, o / 2 == 0 ? 1 : -1),
                              quantum::analyzer_projector(b, o % 2 == 0 ? 1 : -1));
            w[static_cast<std::size_t>(o)] = std::max(0.0, (rho.matrix() * proj).trace().real());
        }
        joint[static_cast<std::size_t>(i)] = std::discrete_distribution<int>(w.begin(), w.end());
    }

    const std::uint64_t alice_qrng = derive_seed(setup.seed, "qrng:alice");
    const std::uint64_t bob_qrng = derive_seed(setup.seed, "qrng:bob");
    std::array<std::uint64_t, 4> counts{};
    std::array<std::uint64_t, 4> agree{};
    auto setting_at = [&](timing::Picoseconds t) {
        return 2 * qrng_bit(alice_qrng, t, setup.qrng_interval_us) + qrng_bit(bob_qrng, t, setup.qrng_interval_us);
    };

    // Genuine pairs.
    {
        Rng rng = make_rng(setup.seed, hash_label("chsh:pairs"));
        const auto pulses = static_cast<std::int64_t>(std::llround(f * setup.duration_s));
        const auto n = binomial<std::int64_t>(rng, pulses, pair_coincidence);
        std::uniform_int_distribution<std::int64_t> pick(0, std::max<std::int64_t>(pulses - 1, 0));
        std::vector<std::int64_t> hits(static_cast<std::size_t>(n));
        for (auto& h : hits) h = pick(rng);
        std::sort(hits.begin(), hits.end());
        const double period_ps = static_cast<double>(timing::kPsPerSecond) / f;
        for (std::int64_t pulse : hits) {
            const auto t = static_cast<timing::Picoseconds>(std::llround(static_cast<double>(pulse) * period_ps));
            const int s = setting_at(t);
            const int o = joint[static_cast<std::size_t>(s)](rng);
            ++counts[static_cast<std::size_t>(s)];
            if (o == 0 || o == 3) ++agree[static_cast<std::size_t>(s)];
        }
        res.coincidences = static_cast<std::uint64_t>(n);
    }

    // Accidentals between independent single-click streams, shard by shard.
    {
        timing::DetectorParams stream_a;
        stream_a.dark_rate = rate_a;
        timing::DetectorParams stream_b;
        stream_b.dark_rate = rate_b;
        Rng rng = make_rng(setup.seed, hash_label("chsh:accidental-outcomes"));
        std::bernoulli_distribution coin(0.5);
        const auto shards = static_cast<std::size_t>(std::ceil(setup.duration_s / setup.accidental_shard_s));
        for (std::size_t i = 0; i < shards; ++i) {
            const double start = static_cast<double>(i) * setup.accidental_shard_s;
            const double len = std::min(setup.accidental_shard_s, setup.duration_s - start);
            const auto a = timing::generate_noise_tags(stream_a, len, derive_seed(setup.seed, hash_label("chsh:a") + i));
            const auto b = timing::generate_noise_tags(stream_b, len, derive_seed(setup.seed, hash_label("chsh:b") + i));
            const auto offset = static_cast<timing::Picoseconds>(std::llround(start * 1e12));
            for (const timing::CoincidencePair& m : timing::match_coincidences(a, b, setup.window, 0)) {
                const timing::Picoseconds t = offset + a.records()[m.index_a].time_ps;
                const int s = setting_at(t);
                ++counts[static_cast<std::size_t>(s)];
                const bool x = coin(rng);
                const bool y = coin(rng);
                if (x == y) ++agree[static_cast<std::size_t>(s)];
                ++res.accidental_coincidences;
            }
        }
        res.coincidences += res.accidental_coincidences;
    }

    double variance = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        CorrelationEstimate& c = res.correlations[i];
        c.alice_angle = setup.alice_angles[i / 2];
        c.bob_angle = setup.bob_angles[i % 2];
        c.coincidences = counts[i];
        c.agree = agree[i];
        if (counts[i] == 0) {
            res.insufficient_statistics = true;
            continue;
        }
        const auto n = static_cast<double>(counts[i]);
        c.E = (2.0 * static_cast<double>(agree[i]) - n) / n;
        c.error = std::sqrt(std::max(0.0, 1.0 - c.E * c.E) / n);
        variance += c.error * c.error;
    }
    const auto& e = res.correlations;
    res.s_value = std::abs(e[0].E - e[1].E + e[2].E + e[3].E);
    res.s_error = std::sqrt(variance);
    res.violation_sigmas = res.s_error > 0.0 ? (res.s_value - 2.0) / res.s_error : 0.0;
    return res;
}

LocalityReport locality_audit(double receiver_separation_km, double path_difference_km, double qrng_interval_us,
                              double measurement_duration_us) {
    if (!(receiver_separation_km >= 0.0 && path_difference_km >= 0.0 && qrng_interval_us >= 0.0 &&
          measurement_duration_us >= 0.0)) {
        throw std::invalid_argument("locality inputs must be non-negative");
    }
    LocalityReport r;
    r.light_time_between_receivers_us = receiver_separation_km * 1e3 / kSpeedOfLight * 1e6;
    r.measurement_event_delay_us = path_difference_km * 1e3 / kSpeedOfLight * 1e6;
    r.qrng_interval_us = qrng_interval_us;
    r.measurement_duration_us = measurement_duration_us;
    r.spacelike_separated = r.measurement_event_delay_us + measurement_duration_us < r.light_time_between_receivers_us;
    r.settings_spacelike = qrng_interval_us + measurement_duration_us < r.light_time_between_receivers_us;
    return r;
}

// ---------------------------------------------------------------------------

SyncResult run_sync(const SyncSetup& setup) {
    setup.shape.validate();
    setup.cfd.validate();
    if (setup.pulses < timing::kMinFitSamples) {
        throw std::invalid_argument("sync run needs at least " + std::to_string(timing::kMinFitSamples) + " pulses");
    }
    if (!(setup.alice_distance_m >= 0.0 && setup.bob_distance_m >= 0.0)) {
        throw std::invalid_argument("sync path lengths must be non-negative");
    }
    if (!(setup.spcm_jitter_ps >= 0.0)) throw std::invalid_argument("SPCM jitter must be non-negative");

    const double period_ps = static_cast<double>(timing::kPsPerSecond) / setup.shape.repetition_hz;
    const double delay_a = setup.alice_distance_m / kSpeedOfLight * 1e12;
    const double delay_b = setup.bob_distance_m / kSpeedOfLight * 1e12;

    // The laser is free-running against the TDC clocks: each pulse lands at a
    // random phase of the TDC grid.
    Rng rng = make_rng(setup.seed, hash_label("sync:emission"));
    std::uniform_real_distribution<double> phase(0.0, setup.tdc_resolution_ps);
    std::vector<double> at_a(setup.pulses), at_b(setup.pulses);
    for (std::size_t i = 0; i < setup.pulses; ++i) {
        const double t = static_cast<double>(i + 1) * period_ps + phase(rng);
        at_a[i] = t + delay_a;
        at_b[i] = t + delay_b;
    }

    SyncResult res;
    res.alice = timing::discriminate_sync(setup.shape, setup.cfd, at_a, setup.tdc_resolution_ps,
                                          derive_seed(setup.seed, "sync:alice"), 0, "alice");
    res.bob = timing::discriminate_sync(setup.shape, setup.cfd, at_b, setup.tdc_resolution_ps,
                                        derive_seed(setup.seed, "sync:bob"), 0, "bob");

    const auto offset = static_cast<timing::Picoseconds>(std::llround(delay_a - delay_b));
    const timing::CoincidenceWindow window{std::min(0.5 * period_ps, 1e5) / 1e3};
    const auto pairs = timing::match_coincidences(res.alice, res.bob, window, offset);
    res.matched_pulses = pairs.size();
    std::vector<timing::Picoseconds>& residuals = res.residuals;
    residuals.reserve(pairs.size());
    for (const auto& p : pairs) residuals.push_back(p.delta_ps);

    const bool degenerate =
        !residuals.empty() && std::all_of(residuals.begin(), residuals.end(),
                                          [&](timing::Picoseconds r) { return r == residuals.front(); });
    if (degenerate) {
        res.fit.center_ps = static_cast<double>(residuals.front());
        res.fit.samples = residuals.size();
    } else {
        res.fit = timing::fit_gaussian_histogram(residuals);
    }
    res.two_delta_ps = 2.0 * res.fit.delta_ps;
    res.two_delta_err_ps = 2.0 * res.fit.delta_err_ps;
    res.predicted_two_delta_ps =
        2.0 * std::numbers::sqrt2 * timing::predicted_station_sigma_ps(setup.shape, setup.cfd, setup.tdc_resolution_ps);
    res.quantum_channel_sigma_ps =
        std::sqrt(res.fit.delta_ps * res.fit.delta_ps + 2.0 * setup.spcm_jitter_ps * setup.spcm_jitter_ps);
    return res;
}

// ---------------------------------------------------------------------------

AptResult run_apt(const AptSetup& setup) {
    AptResult res;
    res.tracking = apt::simulate_loop(setup.stages, setup.disturbance, setup.duration_s, setup.dt_s, setup.seed);

    for (std::size_t i = 0; i < setup.stages.size(); ++i) {
        const apt::LoopStage& stage = setup.stages[i];
        StageBandwidth sb;
        sb.stage = stage.name;
        if (!stage.enabled || setup.probe_frequencies_hz.empty()) {
            res.stages.push_back(std::move(sb));
            continue;
        }
        std::vector<apt::LoopStage> alone = setup.stages;
        for (std::size_t j = 0; j < alone.size(); ++j) alone[j].enabled = j == i;
        std::vector<double> freqs;
        for (double f : setup.probe_frequencies_hz) {
            if (f < stage.sensor_rate_hz / 2.0) freqs.push_back(f);
        }
        if (!freqs.empty()) {
            sb.curve = apt::rejection_curve(alone, freqs, setup.probe_amplitude_urad, setup.sweep_duration_s,
                                            setup.dt_s);
            try {
                sb.bandwidth_hz = apt::bandwidth_of(sb.curve);
            } catch (const std::invalid_argument&) {
                sb.bandwidth_hz = std::nullopt;
            }
        }
        res.stages.push_back(std::move(sb));
    }

    if (setup.geometry) {
        res.pointing_db = apt::pointing_loss_feed(res.tracking, *setup.geometry);
        res.displacement_m = apt::pointing_displacement_m(res.tracking.residual_rms_urad, setup.geometry->distance_m);
    }
    res.acquisition = apt::AcquisitionSequence{}.run_to_link();
    return res;
}

}  // namespace qlink::experiments

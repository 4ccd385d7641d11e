#include "qlink/run.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qlink/error.hpp"

namespace qlink::io {

using json = nlohmann::json;

namespace {

json rates_json(const source::LocalRates& r) {
    return {{"twofold_entangled", r.twofold_entangled},
            {"twofold_collinear", r.twofold_collinear},
            {"fourfold", r.fourfold},
            {"threefold_bsm_trigger", r.threefold_bsm_trigger}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string csv_number(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

// Driver argument errors at run time mean the config combination is unusable.
template <class F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const std::invalid_argument& e) {
        throw ConfigError("", std::string(what) + ": " + e.what());
    }
}

RunOutput run_teleport(const ScenarioConfig& c) {
    const experiments::TeleportationSetup setup = guarded("teleport", [&] { return teleportation_setup(c); });
    const experiments::TeleportationModel model = guarded("teleport", [&] { return experiments::teleportation_model(setup); });
    const experiments::TeleportationResult r = guarded("teleport", [&] { return experiments::run_teleportation(setup); });

    json analytic = nullptr;
    if (model.channel_transmittance > 0.0) {
        const double loss = -10.0 * std::log10(model.channel_transmittance);
        const double noise = setup.receiver.noise_rate();
        if (model.effective_rates.fourfold > 0.0 || noise > 0.0) {
            analytic = experiments::analytic_fidelity(loss, noise, model.effective_rates, setup.window,
                                                      model.effective_f0);
        }
    }

    json states = json::array();
    std::ostringstream csv;
    csv << "state,fidelity,error,coincidences\n";
    for (const experiments::StateResult& s : r.per_state) {
        const std::string label(quantum::to_string(s.state));
        states.push_back({{"state", label},
                          {"fidelity", s.fidelity},
                          {"statistical_error", s.statistical_error},
                          {"coincidences", s.coincidences},
                          {"expected_fidelity", s.expected_fidelity}});
        csv << label << ',' << csv_number(s.fidelity) << ',' << csv_number(s.statistical_error) << ','
            << s.coincidences << '\n';
    }
    csv << "average," << csv_number(r.average_fidelity) << ',' << csv_number(r.average_error) << ','
        << r.total_coincidences << '\n';

    RunOutput out;
    out.report["results"] = {
        {"channel_loss_db", setup.channel_loss_db},
        {"simulated_duration_s", r.effective_time_s},
        {"equivalent_physical_duration_s", c.duration_s},
        {"rates", rates_json(model.rates)},
        {"model",
         {{"bell_weights", model.weights.lambda},
          {"intrinsic_fidelity", model.intrinsic_fidelity},
          {"multi_pair_ratio", model.multi_pair_ratio},
          {"effective_f0", model.effective_f0},
          {"channel_transmittance", model.channel_transmittance}}},
        {"expected_coincidences",
         {{"signal", r.expected.signal},
          {"multi_pair", r.expected.multi_pair},
          {"accidental", r.expected.accidental},
          {"total", r.expected.total()}}},
        {"analytic_fidelity", analytic},
        {"per_state", std::move(states)},
        {"average_fidelity", r.average_fidelity},
        {"average_error", r.average_error},
        {"total_coincidences", r.total_coincidences},
        {"signal_coincidences", r.signal_coincidences},
        {"multi_pair_coincidences", r.multi_pair_coincidences},
        {"accidental_coincidences", r.accidental_coincidences},
        {"insufficient_statistics", r.insufficient_statistics}};
    out.tables.push_back({"teleportation.csv", csv.str()});
    return out;
}

RunOutput run_chsh(const ScenarioConfig& c) {
    const experiments::ChshSetup setup = guarded("chsh", [&] { return chsh_setup(c); });
    const experiments::ChshResult r = guarded("chsh", [&] { return experiments::run_chsh(setup); });

    const quantum::DensityMatrix rho = setup.state.density();
    const double ideal = quantum::chsh_S(rho, {setup.alice_angles[0]}, {setup.alice_angles[1]}, {setup.bob_angles[0]},
                                         {setup.bob_angles[1]});

    json correlations = json::array();
    std::ostringstream csv;
    csv << "alice_angle_rad,bob_angle_rad,E,error,coincidences\n";
    for (const experiments::CorrelationEstimate& e : r.correlations) {
        correlations.push_back({{"alice_angle_rad", e.alice_angle},
                                {"bob_angle_rad", e.bob_angle},
                                {"E", e.E},
                                {"error", e.error},
                                {"coincidences", e.coincidences}});
        csv << csv_number(e.alice_angle) << ',' << csv_number(e.bob_angle) << ',' << csv_number(e.E) << ','
            << csv_number(e.error) << ',' << e.coincidences << '\n';
    }

    RunOutput out;
    json results = {{"alice_loss_db", setup.alice_loss_db},
                    {"bob_loss_db", setup.bob_loss_db},
                    {"simulated_duration_s", setup.duration_s},
                    {"equivalent_physical_duration_s", c.duration_s},
                    {"bell_weights", setup.state.lambda},
                    {"noise_free_S", ideal},
                    {"correlations", std::move(correlations)},
                    {"s_value", r.s_value},
                    {"s_error", r.s_error},
                    {"violation_sigmas", r.violation_sigmas},
                    {"coincidences", r.coincidences},
                    {"accidental_coincidences", r.accidental_coincidences},
                    {"expected_coincidences", r.expected_coincidences},
                    {"insufficient_statistics", r.insufficient_statistics}};
    if (c.chsh->locality) {
        const LocalityConfig& l = *c.chsh->locality;
        const experiments::LocalityReport loc = experiments::locality_audit(
            l.receiver_separation_km, l.path_difference_km, c.chsh->qrng_interval_us, l.measurement_duration_us);
        results["locality"] = {{"light_time_between_receivers_us", loc.light_time_between_receivers_us},
                               {"measurement_event_delay_us", loc.measurement_event_delay_us},
                               {"qrng_interval_us", loc.qrng_interval_us},
                               {"measurement_duration_us", loc.measurement_duration_us},
                               {"spacelike_separated", loc.spacelike_separated},
                               {"settings_spacelike", loc.settings_spacelike}};
    }
    out.report["results"] = std::move(results);
    out.tables.push_back({"chsh.csv", csv.str()});
    return out;
}

RunOutput run_surface(const ScenarioConfig& c) {
    const SurfaceConfig& s = *c.surface;
    const timing::CoincidenceWindow window{s.coincidence_window_ns};
    RunOutput out;
    json sources = json::array();
    for (const SurfaceSource& src : s.sources) {
        source::SourceParams params;
        params.pair_probability = src.pair_probability;
        params.detection_efficiency = src.detection_efficiency;
        params.repetition_rate_hz = src.repetition_rate_hz;
        const source::LocalRates own = guarded("surface", [&] { return source::local_rates(params, 0.0); });
        const double collinear = src.collinear_twofold_rate.value_or(own.twofold_entangled);
        const source::LocalRates rates = guarded("surface", [&] { return source::local_rates(params, collinear); });
        const experiments::FidelitySurface surf =
            guarded("surface", [&] { return experiments::fidelity_surface(rates, s.grid, window, s.f0); });

        std::ostringstream grid;
        grid << "dark_rate";
        for (double l : surf.loss_axis_db) grid << ',' << csv_number(l);
        grid << '\n';
        std::ostringstream contour;
        contour << "dark_rate,loss_db\n";
        json contour_json = json::array();
        for (std::size_t d = 0; d < surf.dark_axis.size(); ++d) {
            grid << csv_number(surf.dark_axis[d]);
            for (double f : surf.fidelity[d]) grid << ',' << csv_number(f);
            grid << '\n';
            contour << csv_number(surf.dark_axis[d]) << ','
                    << (surf.contour_loss_db[d] ? csv_number(*surf.contour_loss_db[d]) : std::string{}) << '\n';
            contour_json.push_back({surf.dark_axis[d], optional_json(surf.contour_loss_db[d])});
        }

        json checkpoints = json::array();
        for (const SurfaceCheckpoint& cp : s.checkpoints) {
            const double f = guarded("surface", [&] {
                return experiments::analytic_fidelity(cp.loss_db, cp.noise_rate, rates, window, s.f0);
            });
            checkpoints.push_back({{"loss_db", cp.loss_db},
                                   {"noise_rate", cp.noise_rate},
                                   {"fidelity", f},
                                   {"above_classical_limit", f > experiments::kClassicalLimit},
                                   {"classical_limit_loss_db",
                                    optional_json(experiments::classical_limit_loss_db(cp.noise_rate, rates, window, s.f0))}});
        }
        sources.push_back({{"label", src.label},
                           {"rates", rates_json(rates)},
                           {"contour", std::move(contour_json)},
                           {"checkpoints", std::move(checkpoints)}});
        out.tables.push_back({"surface_" + src.label + ".csv", grid.str()});
        out.tables.push_back({"contour_" + src.label + ".csv", contour.str()});
    }
    out.report["results"] = {{"classical_limit", experiments::kClassicalLimit}, {"sources", std::move(sources)}};
    return out;
}

RunOutput run_apt(const ScenarioConfig& c) {
    const experiments::AptSetup setup = apt_setup(c);
    const experiments::AptResult r = guarded("apt", [&] { return experiments::run_apt(setup); });

    json stages = json::array();
    std::ostringstream curve_csv;
    curve_csv << "stage,frequency_hz,ratio\n";
    for (std::size_t i = 0; i < r.stages.size(); ++i) {
        const experiments::StageBandwidth& sb = r.stages[i];
        const apt::LoopStage& st = setup.stages[i];
        json curve = json::array();
        for (const apt::RejectionPoint& p : sb.curve) {
            curve.push_back({{"frequency_hz", p.frequency_hz}, {"ratio", p.ratio}});
            curve_csv << sb.stage << ',' << csv_number(p.frequency_hz) << ',' << csv_number(p.ratio) << '\n';
        }
        stages.push_back({{"name", sb.stage},
                          {"gains", {{"kp", st.gains.kp}, {"ki", st.gains.ki}, {"kd", st.gains.kd}}},
                          {"target_bandwidth_hz", st.target_bandwidth_hz},
                          {"measured_bandwidth_hz", optional_json(sb.bandwidth_hz)},
                          {"rejection_curve", std::move(curve)}});
    }

    // Residual trace decimated to 1 ms.
    std::ostringstream trace;
    trace << "time_s,residual_urad\n";
    const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(1e-3 / r.tracking.dt_s)));
    for (std::size_t n = 0; n < r.tracking.residual_series.size(); n += stride) {
        trace << csv_number(static_cast<double>(n) * r.tracking.dt_s) << ','
              << csv_number(r.tracking.residual_series[n]) << '\n';
    }

    json acquisition = json::array();
    for (apt::AcquisitionStep step : r.acquisition) acquisition.push_back(apt::to_string(step));

    RunOutput out;
    out.report["results"] = {{"residual_rms_urad", r.tracking.residual_rms_urad},
                             {"stages", std::move(stages)},
                             {"pointing_db", optional_json(r.pointing_db)},
                             {"displacement_m", optional_json(r.displacement_m)},
                             {"acquisition", std::move(acquisition)}};
    out.tables.push_back({"rejection.csv", curve_csv.str()});
    out.tables.push_back({"tracking.csv", trace.str()});
    return out;
}

RunOutput run_sync(const ScenarioConfig& c) {
    const experiments::SyncSetup setup = sync_setup(c);
    const experiments::SyncResult r = guarded("sync", [&] { return experiments::run_sync(setup); });

    std::ostringstream hist;
    hist << "center_ps,count\n";
    const bool spread = std::any_of(r.residuals.begin(), r.residuals.end(),
                                    [&](timing::Picoseconds v) { return v != r.residuals.front(); });
    if (spread) {
        const timing::Histogram h = timing::make_histogram(r.residuals);
        for (std::size_t i = 0; i < h.counts.size(); ++i) hist << csv_number(h.center(i)) << ',' << h.counts[i] << '\n';
    } else if (!r.residuals.empty()) {
        hist << r.residuals.front() << ',' << r.residuals.size() << '\n';
    }
    std::ostringstream alice, bob;
    r.alice.write_csv(alice);
    r.bob.write_csv(bob);

    RunOutput out;
    out.report["results"] = {{"two_delta_ps", r.two_delta_ps},
                             {"two_delta_err_ps", r.two_delta_err_ps},
                             {"predicted_two_delta_ps", r.predicted_two_delta_ps},
                             {"center_ps", r.fit.center_ps},
                             {"bin_width_ps", r.fit.bin_width_ps},
                             {"quantum_channel_sigma_ps", r.quantum_channel_sigma_ps},
                             {"matched_pulses", r.matched_pulses}};
    out.tables.push_back({"sync_histogram.csv", hist.str()});
    out.tables.push_back({"sync_alice.csv", alice.str()});
    out.tables.push_back({"sync_bob.csv", bob.str()});
    return out;
}

RunOutput run_budget(const ScenarioConfig& c) {
    json rows = json::array();
    std::ostringstream csv;
    csv << "channel,weather,geometric_db,atmospheric_db,optics_db,pointing_db,total_db,transmittance\n";
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const ChannelConfig& ch : c.channels) {
        std::vector<std::string> variants;
        if (ch.weather.empty()) variants.emplace_back();
        for (const WeatherVariant& w : ch.weather) variants.push_back(w.name);
        for (const std::string& w : variants) {
            const channel::LinkBudget b = guarded("budget", [&] { return channel_budget(ch, w); });
            lo = std::min(lo, b.total_db);
            hi = std::max(hi, b.total_db);
            rows.push_back({{"channel", ch.name},
                            {"weather", w},
                            {"geometric_db", b.geometric_db},
                            {"atmospheric_db", b.atmospheric_db},
                            {"optics_db", b.optics_db},
                            {"pointing_db", b.pointing_db},
                            {"total_db", b.total_db},
                            {"transmittance", b.transmittance()}});
            csv << ch.name << ',' << w << ',' << csv_number(b.geometric_db) << ',' << csv_number(b.atmospheric_db)
                << ',' << csv_number(b.optics_db) << ',' << csv_number(b.pointing_db) << ','
                << csv_number(b.total_db) << ',' << csv_number(b.transmittance()) << '\n';
        }
    }
    RunOutput out;
    out.report["results"] = {{"budgets", std::move(rows)}, {"total_db_range", {lo, hi}}};
    out.tables.push_back({"budget.csv", csv.str()});
    return out;
}

}  // namespace

const char* tool_version() noexcept { return QLINK_VERSION; }

RunOutput run(const ScenarioConfig& config) {
    RunOutput out;
    switch (config.protocol) {
        case Protocol::Teleport: out = run_teleport(config); break;
        case Protocol::Chsh: out = run_chsh(config); break;
        case Protocol::Surface: out = run_surface(config); break;
        case Protocol::AptSweep: out = run_apt(config); break;
        case Protocol::Sync: out = run_sync(config); break;
        case Protocol::Budget: out = run_budget(config); break;
    }
    out.report["tool"] = {{"name", "qlink"}, {"version", tool_version()}};
    out.report["protocol"] = std::string(to_string(config.protocol));
    out.report["seed"] = config.seed;
    out.report["config"] = to_json(config);
    return out;
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

void write_outputs(const RunOutput& output, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
        f << text;
    };
    write("report.json", dump_report(output.report));
    for (const CsvTable& t : output.tables) write(t.file_name, t.content);
}

}  // namespace qlink::io

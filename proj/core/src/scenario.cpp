#include "qlink/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "qlink/error.hpp"

namespace qlink::io {

using json = nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Bounds {
    double lo = -kInf;
    double hi = kInf;
    bool lo_open = false;
    bool hi_open = false;

    bool contains(double v) const {
        if (!std::isfinite(v)) return false;
        if (lo_open ? !(v > lo) : !(v >= lo)) return false;
        if (hi_open ? !(v < hi) : !(v <= hi)) return false;
        return true;
    }

    std::string describe() const {
        std::ostringstream os;
        os << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
        return os.str();
    }
};

constexpr Bounds kAny{};
constexpr Bounds kPositive{0.0, kInf, true, false};
constexpr Bounds kNonNegative{0.0, kInf, false, false};
constexpr Bounds kUnit{0.0, 1.0, false, false};
constexpr Bounds kUnitOpenLow{0.0, 1.0, true, false};

// Walks one JSON object, recording which keys were consumed so leftovers can
// be reported as unknown.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_, "expected an object");
    }

    std::string at(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const json* find(const char* key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    double number(const char* key, std::optional<double> fallback, Bounds bounds) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) throw ConfigError(at(key), "missing required key");
            return *fallback;
        }
        return checked_number(*v, at(key), bounds);
    }

    std::optional<double> optional_number(const char* key, Bounds bounds) {
        const json* v = find(key);
        if (!v || v->is_null()) return std::nullopt;
        return checked_number(*v, at(key), bounds);
    }

    std::uint64_t count(const char* key, std::optional<std::uint64_t> fallback, std::uint64_t min) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) throw ConfigError(at(key), "missing required key");
            return *fallback;
        }
        if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
            throw ConfigError(at(key), "expected a non-negative integer");
        }
        const auto n = v->get<std::uint64_t>();
        if (n < min) throw ConfigError(at(key), "must be at least " + std::to_string(min));
        return n;
    }

    std::string string(const char* key, std::optional<std::string> fallback) {
        const json* v = find(key);
        if (!v) {
            if (!fallback) throw ConfigError(at(key), "missing required key");
            return *fallback;
        }
        if (!v->is_string()) throw ConfigError(at(key), "expected a string");
        return v->get<std::string>();
    }

    bool boolean(const char* key, bool fallback) {
        const json* v = find(key);
        if (!v) return fallback;
        if (!v->is_boolean()) throw ConfigError(at(key), "expected true or false");
        return v->get<bool>();
    }

    std::vector<double> numbers(const char* key, Bounds bounds) {
        const json* v = find(key);
        std::vector<double> out;
        if (!v) return out;
        if (!v->is_array()) throw ConfigError(at(key), "expected an array of numbers");
        for (std::size_t i = 0; i < v->size(); ++i) {
            out.push_back(checked_number((*v)[i], at(key) + "[" + std::to_string(i) + "]", bounds));
        }
        return out;
    }

    std::optional<Reader> object(const char* key) {
        const json* v = find(key);
        if (!v) return std::nullopt;
        return Reader(*v, at(key));
    }

    // Elements of an array of objects, each with its indexed path.
    std::vector<Reader> objects(const char* key) {
        const json* v = find(key);
        std::vector<Reader> out;
        if (!v) return out;
        if (!v->is_array()) throw ConfigError(at(key), "expected an array");
        for (std::size_t i = 0; i < v->size(); ++i) out.emplace_back((*v)[i], at(key) + "[" + std::to_string(i) + "]");
        return out;
    }

    const json& node() const { return node_; }
    const std::string& path() const { return path_; }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.contains(it.key())) throw ConfigError(at(it.key()), "unknown key");
        }
    }

private:
    static double checked_number(const json& v, const std::string& path, Bounds bounds) {
        if (!v.is_number()) throw ConfigError(path, "expected a number");
        const double x = v.get<double>();
        if (!bounds.contains(x)) {
            std::ostringstream os;
            os << "value " << x << " is outside " << bounds.describe();
            throw ConfigError(path, os.str());
        }
        return x;
    }

    const json& node_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

template <class F>
void validated(const std::string& path, F&& check) {
    try {
        check();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

Protocol parse_protocol(const std::string& s, const std::string& path) {
    for (Protocol p : {Protocol::Teleport, Protocol::Chsh, Protocol::Surface, Protocol::AptSweep, Protocol::Sync,
                       Protocol::Budget}) {
        if (s == to_string(p)) return p;
    }
    throw ConfigError(path, "unknown protocol '" + s + "'");
}

source::SourceParams parse_source(Reader r) {
    source::SourceParams s;
    s.pair_probability = r.number("pair_probability", s.pair_probability, kUnit);
    s.detection_efficiency = r.number("detection_efficiency", s.detection_efficiency, kUnitOpenLow);
    s.repetition_rate_hz = r.number("repetition_rate_hz", s.repetition_rate_hz, kPositive);
    s.visibility_hv = r.number("visibility_hv", s.visibility_hv, kUnit);
    s.visibility_pm = r.number("visibility_pm", s.visibility_pm, kUnit);
    r.finish();
    validated(r.at("visibility_pm"),
              [&] { source::bell_diagonal_from_visibilities(s.visibility_hv, s.visibility_pm); });
    return s;
}

ChannelConfig parse_channel(Reader r) {
    ChannelConfig c;
    c.name = r.string("name", std::nullopt);
    c.geometry.distance_m = r.number("distance_m", std::nullopt, kPositive);
    c.geometry.divergence_rad = r.number("divergence_rad", 0.0, kNonNegative);
    c.geometry.far_field_spot_m = r.optional_number("far_field_spot_m", kPositive);
    c.geometry.receiver_aperture_m = r.number("receiver_aperture_m", std::nullopt, kPositive);
    c.geometry.pointing_rms_rad = r.number("pointing_rms_rad", 0.0, kNonNegative);
    c.atmospheric_db = r.number("atmospheric_db", 0.0, kNonNegative);
    c.optics_db = r.number("optics_db", 0.0, kNonNegative);
    std::set<std::string> names;
    for (Reader w : r.objects("weather")) {
        WeatherVariant v;
        v.name = w.string("name", std::nullopt);
        if (!names.insert(v.name).second) throw ConfigError(w.at("name"), "duplicate weather name '" + v.name + "'");
        v.far_field_spot_m = w.optional_number("far_field_spot_m", kPositive);
        if (!v.far_field_spot_m) v.far_field_spot_m = c.geometry.far_field_spot_m;
        v.atmospheric_db = w.number("atmospheric_db", c.atmospheric_db, kNonNegative);
        v.optics_db = w.number("optics_db", c.optics_db, kNonNegative);
        w.finish();
        c.weather.push_back(std::move(v));
    }
    r.finish();
    validated(r.path(), [&] { c.geometry.validate(); });
    return c;
}

timing::DetectorParams parse_detector(Reader r) {
    timing::DetectorParams d;
    d.efficiency = r.number("efficiency", d.efficiency, kUnit);
    d.dark_rate = r.number("dark_rate", d.dark_rate, kNonNegative);
    d.background_rate = r.number("background_rate", d.background_rate, kNonNegative);
    d.jitter_sigma_ps = r.number("jitter_sigma_ps", d.jitter_sigma_ps, kNonNegative);
    r.finish();
    return d;
}

AptConfig parse_apt(Reader r) {
    AptConfig a;
    std::set<std::string> names;
    for (Reader s : r.objects("stages")) {
        apt::LoopStage st;
        st.name = s.string("name", std::nullopt);
        if (!names.insert(st.name).second) throw ConfigError(s.at("name"), "duplicate stage name '" + st.name + "'");
        st.sensor_rate_hz = s.number("sensor_rate_hz", std::nullopt, kPositive);
        st.sensor_noise_rms_urad = s.number("sensor_noise_rms_urad", 0.0, kNonNegative);
        st.actuator_range_urad = s.number("actuator_range_urad", std::nullopt, kPositive);
        st.target_bandwidth_hz = s.number("target_bandwidth_hz", 0.0, kNonNegative);
        st.enabled = s.boolean("enabled", true);
        if (auto g = s.object("gains")) {
            st.gains.kp = g->number("kp", 0.0, kAny);
            st.gains.ki = g->number("ki", 0.0, kAny);
            st.gains.kd = g->number("kd", 0.0, kAny);
            g->finish();
        } else {
            if (!(st.target_bandwidth_hz > 0.0)) {
                throw ConfigError(s.at("target_bandwidth_hz"), "required and positive when gains are absent");
            }
            validated(s.at("target_bandwidth_hz"), [&] { st = apt::autotune(st); });
        }
        s.finish();
        validated(s.path(), [&] { st.validate(); });
        a.stages.push_back(std::move(st));
    }
    if (a.stages.empty()) throw ConfigError(r.at("stages"), "at least one stage is required");
    if (a.stages.size() > 3) throw ConfigError(r.at("stages"), "at most three stages are supported");

    if (auto d = r.object("disturbance")) {
        a.disturbance.drift_rate_urad_per_s = d->number("drift_rate_urad_per_s", 0.0, kNonNegative);
        a.disturbance.turbulence_rms_urad = d->number("turbulence_rms_urad", 0.0, kNonNegative);
        a.disturbance.turbulence_knee_hz = d->number("turbulence_knee_hz", a.disturbance.turbulence_knee_hz, kPositive);
        if (auto p = d->object("probe")) {
            apt::SinusoidProbe probe;
            probe.frequency_hz = p->number("frequency_hz", std::nullopt, kPositive);
            probe.amplitude_urad = p->number("amplitude_urad", std::nullopt, kNonNegative);
            p->finish();
            a.disturbance.probe = probe;
        }
        d->finish();
    }
    a.duration_s = r.number("duration_s", a.duration_s, kPositive);
    a.dt_s = r.number("dt_s", a.dt_s, kPositive);
    a.probe_frequencies_hz = r.numbers("probe_frequencies_hz", kPositive);
    a.probe_amplitude_urad = r.number("probe_amplitude_urad", a.probe_amplitude_urad, kPositive);
    a.sweep_duration_s = r.number("sweep_duration_s", a.sweep_duration_s, kPositive);
    a.channel = r.string("channel", std::string{});
    r.finish();

    double fastest = 0.0;
    for (const auto& st : a.stages) fastest = std::max(fastest, st.sensor_rate_hz);
    if (a.dt_s > 0.5 / fastest) throw ConfigError(r.at("dt_s"), "must resolve the fastest sensor (dt <= 1/(2 rate))");
    return a;
}

TeleportConfig parse_teleport(Reader r) {
    TeleportConfig t;
    t.collinear_twofold_rate = r.number("collinear_twofold_rate", t.collinear_twofold_rate, kNonNegative);
    t.bsm_identification_fraction =
        r.number("bsm_identification_fraction", t.bsm_identification_fraction, kUnitOpenLow);
    t.bsm_visibility = r.number("bsm_visibility", t.bsm_visibility, kUnit);
    t.coincidence_window_ns = r.number("coincidence_window_ns", t.coincidence_window_ns, kPositive);
    t.multi_pair_emission = r.boolean("multi_pair_emission", t.multi_pair_emission);
    t.receiver = r.string("receiver", t.receiver);
    t.channel_loss_db = r.optional_number("channel_loss_db", kNonNegative);
    t.channel = r.string("channel", std::string{});
    t.weather = r.string("weather", std::string{});
    r.finish();
    return t;
}

ChshConfig parse_chsh(Reader r) {
    ChshConfig c;
    c.effective_visibility_hv = r.number("effective_visibility_hv", c.effective_visibility_hv, kUnit);
    c.effective_visibility_pm = r.number("effective_visibility_pm", c.effective_visibility_pm, kUnit);
    validated(r.at("effective_visibility_pm"), [&] {
        source::bell_diagonal_from_visibilities(c.effective_visibility_hv, c.effective_visibility_pm);
    });
    c.coincidence_window_ns = r.number("coincidence_window_ns", c.coincidence_window_ns, kPositive);
    c.qrng_interval_us = r.number("qrng_interval_us", c.qrng_interval_us, kPositive);
    c.alice_detector = r.string("alice_detector", c.alice_detector);
    c.bob_detector = r.string("bob_detector", c.bob_detector);
    c.alice_loss_db = r.optional_number("alice_loss_db", kNonNegative);
    c.bob_loss_db = r.optional_number("bob_loss_db", kNonNegative);
    c.alice_channel = r.string("alice_channel", std::string{});
    c.bob_channel = r.string("bob_channel", std::string{});
    c.weather = r.string("weather", std::string{});
    c.accidental_shard_s = r.number("accidental_shard_s", c.accidental_shard_s, kPositive);
    if (auto l = r.object("locality")) {
        LocalityConfig loc;
        loc.receiver_separation_km = l->number("receiver_separation_km", std::nullopt, kNonNegative);
        loc.path_difference_km = l->number("path_difference_km", std::nullopt, kNonNegative);
        loc.measurement_duration_us = l->number("measurement_duration_us", loc.measurement_duration_us, kNonNegative);
        l->finish();
        c.locality = loc;
    }
    r.finish();
    return c;
}

SurfaceConfig parse_surface(Reader r, const source::SourceParams& fallback) {
    SurfaceConfig s;
    std::set<std::string> labels;
    for (Reader src : r.objects("sources")) {
        SurfaceSource ss;
        ss.label = src.string("label", std::nullopt);
        if (!labels.insert(ss.label).second) throw ConfigError(src.at("label"), "duplicate label '" + ss.label + "'");
        ss.pair_probability = src.number("pair_probability", std::nullopt, kUnit);
        ss.detection_efficiency = src.number("detection_efficiency", std::nullopt, kUnitOpenLow);
        ss.repetition_rate_hz = src.number("repetition_rate_hz", fallback.repetition_rate_hz, kPositive);
        ss.collinear_twofold_rate = src.optional_number("collinear_twofold_rate", kNonNegative);
        src.finish();
        s.sources.push_back(std::move(ss));
    }
    if (s.sources.empty()) {
        s.sources.push_back(SurfaceSource{"source", fallback.pair_probability, fallback.detection_efficiency,
                                          fallback.repetition_rate_hz, std::nullopt});
    }
    if (auto g = r.object("grid")) {
        experiments::SurfaceGrid& grid = s.grid;
        grid.loss_min_db = g->number("loss_min_db", grid.loss_min_db, kNonNegative);
        grid.loss_max_db = g->number("loss_max_db", grid.loss_max_db, kNonNegative);
        grid.dark_min = g->number("dark_min", grid.dark_min, kNonNegative);
        grid.dark_max = g->number("dark_max", grid.dark_max, kNonNegative);
        grid.loss_points = g->count("loss_points", grid.loss_points, 1);
        grid.dark_points = g->count("dark_points", grid.dark_points, 1);
        g->finish();
        if (grid.loss_max_db < grid.loss_min_db) throw ConfigError(g->at("loss_max_db"), "must be >= loss_min_db");
        if (grid.dark_max < grid.dark_min) throw ConfigError(g->at("dark_max"), "must be >= dark_min");
    }
    s.coincidence_window_ns = r.number("coincidence_window_ns", s.coincidence_window_ns, kPositive);
    s.f0 = r.number("f0", s.f0, Bounds{0.5, 1.0});
    for (Reader c : r.objects("checkpoints")) {
        SurfaceCheckpoint cp;
        cp.loss_db = c.number("loss_db", std::nullopt, kNonNegative);
        cp.noise_rate = c.number("noise_rate", std::nullopt, kNonNegative);
        c.finish();
        s.checkpoints.push_back(cp);
    }
    r.finish();
    return s;
}

SyncConfig parse_sync(Reader r) {
    SyncConfig s;
    s.shape.fwhm_ns = r.number("fwhm_ns", s.shape.fwhm_ns, kPositive);
    s.shape.rise_time_ns = r.number("rise_time_ns", s.shape.rise_time_ns, kPositive);
    s.shape.amplitude_jitter_fraction = r.number("amplitude_jitter_fraction", 0.0, kNonNegative);
    s.shape.repetition_hz = r.number("repetition_hz", s.shape.repetition_hz, kPositive);
    s.cfd.walk_suppression = r.number("walk_suppression", s.cfd.walk_suppression, Bounds{0.0, 0.1});
    s.cfd.electronics_jitter_ps = r.number("electronics_jitter_ps", 0.0, kNonNegative);
    s.tdc_resolution_ps = r.number("tdc_resolution_ps", s.tdc_resolution_ps, kPositive);
    s.pulses = r.count("pulses", s.pulses, timing::kMinFitSamples);
    s.alice_distance_m = r.number("alice_distance_m", 0.0, kNonNegative);
    s.bob_distance_m = r.number("bob_distance_m", 0.0, kNonNegative);
    s.spcm_jitter_ps = r.number("spcm_jitter_ps", s.spcm_jitter_ps, kNonNegative);
    r.finish();
    validated(r.path(), [&] {
        s.shape.validate();
        s.cfd.validate();
    });
    return s;
}

void require_detector(const ScenarioConfig& c, const std::string& station, const std::string& path) {
    if (!c.detectors.contains(station)) throw ConfigError(path, "no detector named '" + station + "'");
}

void require_weather(const ChannelConfig& ch, const std::string& weather, const std::string& path) {
    if (weather.empty()) return;
    for (const auto& w : ch.weather) {
        if (w.name == weather) return;
    }
    throw ConfigError(path, "channel '" + ch.name + "' has no weather variant '" + weather + "'");
}

void cross_check(ScenarioConfig& c) {
    if (c.teleport) {
        TeleportConfig& t = *c.teleport;
        require_detector(c, t.receiver, "teleport.receiver");
        if (!t.channel_loss_db) {
            if (t.channel.empty()) {
                if (c.channels.empty()) throw ConfigError("teleport.channel_loss_db", "required when no channel is configured");
                t.channel = c.channels.front().name;
            }
            require_weather(find_channel(c, t.channel, "teleport.channel"), t.weather, "teleport.weather");
        }
    }
    if (c.chsh) {
        const ChshConfig& h = *c.chsh;
        require_detector(c, h.alice_detector, "chsh.alice_detector");
        require_detector(c, h.bob_detector, "chsh.bob_detector");
        if (!h.alice_loss_db) {
            if (h.alice_channel.empty()) throw ConfigError("chsh.alice_channel", "required when alice_loss_db is absent");
            require_weather(find_channel(c, h.alice_channel, "chsh.alice_channel"), h.weather, "chsh.weather");
        }
        if (!h.bob_loss_db) {
            if (h.bob_channel.empty()) throw ConfigError("chsh.bob_channel", "required when bob_loss_db is absent");
            require_weather(find_channel(c, h.bob_channel, "chsh.bob_channel"), h.weather, "chsh.weather");
        }
    }
    if (c.apt && !c.apt->channel.empty()) find_channel(c, c.apt->channel, "apt.channel");

    switch (c.protocol) {
        case Protocol::Teleport:
            if (!c.teleport) throw ConfigError("teleport", "section required for protocol teleport");
            break;
        case Protocol::Chsh:
            if (!c.chsh) throw ConfigError("chsh", "section required for protocol chsh");
            break;
        case Protocol::Surface:
            if (!c.surface) throw ConfigError("surface", "section required for protocol surface");
            break;
        case Protocol::AptSweep:
            if (!c.apt) throw ConfigError("apt", "section required for protocol apt-sweep");
            break;
        case Protocol::Sync:
            if (!c.sync) throw ConfigError("sync", "section required for protocol sync");
            break;
        case Protocol::Budget:
            if (c.channels.empty()) throw ConfigError("channels", "at least one channel required for protocol budget");
            break;
    }
}

void put_optional(json& j, const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
}

void put_nonempty(json& j, const char* key, const std::string& v) {
    if (!v.empty()) j[key] = v;
}

}  // namespace

std::string_view to_string(Protocol p) noexcept {
    switch (p) {
        case Protocol::Teleport: return "teleport";
        case Protocol::Chsh: return "chsh";
        case Protocol::Surface: return "surface";
        case Protocol::AptSweep: return "apt-sweep";
        case Protocol::Sync: return "sync";
        case Protocol::Budget: return "budget";
    }
    return "?";
}

ScenarioConfig parse_config(const json& doc) {
    Reader r(doc, "");
    ScenarioConfig c;
    c.name = r.string("name", std::string("scenario"));
    c.notes = r.string("notes", std::string{});
    c.protocol = parse_protocol(r.string("protocol", std::nullopt), "protocol");
    c.seed = r.count("seed", std::nullopt, 0);
    c.duration_s = r.number("duration_s", c.duration_s, kPositive);
    c.time_scale = r.number("time_scale", c.time_scale, kPositive);
    if (auto s = r.object("source")) c.source = parse_source(*s);

    std::set<std::string> names;
    for (Reader ch : r.objects("channels")) {
        ChannelConfig cc = parse_channel(ch);
        if (!names.insert(cc.name).second) throw ConfigError(ch.at("name"), "duplicate channel name '" + cc.name + "'");
        c.channels.push_back(std::move(cc));
    }
    if (auto d = r.object("detectors")) {
        for (auto it = d->node().begin(); it != d->node().end(); ++it) {
            if (auto station = d->object(it.key().c_str())) c.detectors[it.key()] = parse_detector(*station);
        }
        d->finish();
    }
    if (auto a = r.object("apt")) c.apt = parse_apt(*a);
    if (auto t = r.object("teleport")) c.teleport = parse_teleport(*t);
    if (auto h = r.object("chsh")) c.chsh = parse_chsh(*h);
    if (auto s = r.object("surface")) c.surface = parse_surface(*s, c.source);
    if (auto s = r.object("sync")) c.sync = parse_sync(*s);
    r.finish();
    cross_check(c);
    return c;
}

ScenarioConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open scenario file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": malformed JSON: " + e.what());
    }
    return parse_config(doc);
}

json to_json(const ScenarioConfig& c) {
    json j;
    j["name"] = c.name;
    put_nonempty(j, "notes", c.notes);
    j["protocol"] = std::string(to_string(c.protocol));
    j["seed"] = c.seed;
    j["duration_s"] = c.duration_s;
    j["time_scale"] = c.time_scale;
    j["source"] = {{"pair_probability", c.source.pair_probability},
                   {"detection_efficiency", c.source.detection_efficiency},
                   {"repetition_rate_hz", c.source.repetition_rate_hz},
                   {"visibility_hv", c.source.visibility_hv},
                   {"visibility_pm", c.source.visibility_pm}};

    json channels = json::array();
    for (const ChannelConfig& ch : c.channels) {
        json jc = {{"name", ch.name},
                   {"distance_m", ch.geometry.distance_m},
                   {"divergence_rad", ch.geometry.divergence_rad},
                   {"receiver_aperture_m", ch.geometry.receiver_aperture_m},
                   {"pointing_rms_rad", ch.geometry.pointing_rms_rad},
                   {"atmospheric_db", ch.atmospheric_db},
                   {"optics_db", ch.optics_db}};
        put_optional(jc, "far_field_spot_m", ch.geometry.far_field_spot_m);
        if (!ch.weather.empty()) {
            json weather = json::array();
            for (const WeatherVariant& w : ch.weather) {
                json jw = {{"name", w.name}, {"atmospheric_db", w.atmospheric_db}, {"optics_db", w.optics_db}};
                put_optional(jw, "far_field_spot_m", w.far_field_spot_m);
                weather.push_back(std::move(jw));
            }
            jc["weather"] = std::move(weather);
        }
        channels.push_back(std::move(jc));
    }
    if (!channels.empty()) j["channels"] = std::move(channels);

    if (!c.detectors.empty()) {
        json d = json::object();
        for (const auto& [station, p] : c.detectors) {
            d[station] = {{"efficiency", p.efficiency},
                          {"dark_rate", p.dark_rate},
                          {"background_rate", p.background_rate},
                          {"jitter_sigma_ps", p.jitter_sigma_ps}};
        }
        j["detectors"] = std::move(d);
    }

    if (c.apt) {
        const AptConfig& a = *c.apt;
        json stages = json::array();
        for (const apt::LoopStage& s : a.stages) {
            stages.push_back({{"name", s.name},
                              {"sensor_rate_hz", s.sensor_rate_hz},
                              {"sensor_noise_rms_urad", s.sensor_noise_rms_urad},
                              {"actuator_range_urad", s.actuator_range_urad},
                              {"target_bandwidth_hz", s.target_bandwidth_hz},
                              {"enabled", s.enabled},
                              {"gains", {{"kp", s.gains.kp}, {"ki", s.gains.ki}, {"kd", s.gains.kd}}}});
        }
        json dist = {{"drift_rate_urad_per_s", a.disturbance.drift_rate_urad_per_s},
                     {"turbulence_rms_urad", a.disturbance.turbulence_rms_urad},
                     {"turbulence_knee_hz", a.disturbance.turbulence_knee_hz}};
        if (a.disturbance.probe) {
            dist["probe"] = {{"frequency_hz", a.disturbance.probe->frequency_hz},
                             {"amplitude_urad", a.disturbance.probe->amplitude_urad}};
        }
        json ja = {{"stages", std::move(stages)},
                   {"disturbance", std::move(dist)},
                   {"duration_s", a.duration_s},
                   {"dt_s", a.dt_s},
                   {"probe_frequencies_hz", a.probe_frequencies_hz},
                   {"probe_amplitude_urad", a.probe_amplitude_urad},
                   {"sweep_duration_s", a.sweep_duration_s}};
        put_nonempty(ja, "channel", a.channel);
        j["apt"] = std::move(ja);
    }

    if (c.teleport) {
        const TeleportConfig& t = *c.teleport;
        json jt = {{"collinear_twofold_rate", t.collinear_twofold_rate},
                   {"bsm_identification_fraction", t.bsm_identification_fraction},
                   {"bsm_visibility", t.bsm_visibility},
                   {"coincidence_window_ns", t.coincidence_window_ns},
                   {"multi_pair_emission", t.multi_pair_emission},
                   {"receiver", t.receiver}};
        put_optional(jt, "channel_loss_db", t.channel_loss_db);
        put_nonempty(jt, "channel", t.channel);
        put_nonempty(jt, "weather", t.weather);
        j["teleport"] = std::move(jt);
    }

    if (c.chsh) {
        const ChshConfig& h = *c.chsh;
        json jh = {{"effective_visibility_hv", h.effective_visibility_hv},
                   {"effective_visibility_pm", h.effective_visibility_pm},
                   {"coincidence_window_ns", h.coincidence_window_ns},
                   {"qrng_interval_us", h.qrng_interval_us},
                   {"alice_detector", h.alice_detector},
                   {"bob_detector", h.bob_detector},
                   {"accidental_shard_s", h.accidental_shard_s}};
        put_optional(jh, "alice_loss_db", h.alice_loss_db);
        put_optional(jh, "bob_loss_db", h.bob_loss_db);
        put_nonempty(jh, "alice_channel", h.alice_channel);
        put_nonempty(jh, "bob_channel", h.bob_channel);
        put_nonempty(jh, "weather", h.weather);
        if (h.locality) {
            jh["locality"] = {{"receiver_separation_km", h.locality->receiver_separation_km},
                              {"path_difference_km", h.locality->path_difference_km},
                              {"measurement_duration_us", h.locality->measurement_duration_us}};
        }
        j["chsh"] = std::move(jh);
    }

    if (c.surface) {
        const SurfaceConfig& s = *c.surface;
        json sources = json::array();
        for (const SurfaceSource& src : s.sources) {
            json js = {{"label", src.label},
                       {"pair_probability", src.pair_probability},
                       {"detection_efficiency", src.detection_efficiency},
                       {"repetition_rate_hz", src.repetition_rate_hz}};
            put_optional(js, "collinear_twofold_rate", src.collinear_twofold_rate);
            sources.push_back(std::move(js));
        }
        json checkpoints = json::array();
        for (const SurfaceCheckpoint& cp : s.checkpoints) {
            checkpoints.push_back({{"loss_db", cp.loss_db}, {"noise_rate", cp.noise_rate}});
        }
        j["surface"] = {{"sources", std::move(sources)},
                        {"grid",
                         {{"loss_min_db", s.grid.loss_min_db},
                          {"loss_max_db", s.grid.loss_max_db},
                          {"dark_min", s.grid.dark_min},
                          {"dark_max", s.grid.dark_max},
                          {"loss_points", s.grid.loss_points},
                          {"dark_points", s.grid.dark_points}}},
                        {"coincidence_window_ns", s.coincidence_window_ns},
                        {"f0", s.f0},
                        {"checkpoints", std::move(checkpoints)}};
    }

    if (c.sync) {
        const SyncConfig& s = *c.sync;
        j["sync"] = {{"fwhm_ns", s.shape.fwhm_ns},
                     {"rise_time_ns", s.shape.rise_time_ns},
                     {"amplitude_jitter_fraction", s.shape.amplitude_jitter_fraction},
                     {"repetition_hz", s.shape.repetition_hz},
                     {"walk_suppression", s.cfd.walk_suppression},
                     {"electronics_jitter_ps", s.cfd.electronics_jitter_ps},
                     {"tdc_resolution_ps", s.tdc_resolution_ps},
                     {"pulses", s.pulses},
                     {"alice_distance_m", s.alice_distance_m},
                     {"bob_distance_m", s.bob_distance_m},
                     {"spcm_jitter_ps", s.spcm_jitter_ps}};
    }
    return j;
}

const ChannelConfig& find_channel(const ScenarioConfig& config, const std::string& name, const std::string& path) {
    for (const ChannelConfig& ch : config.channels) {
        if (ch.name == name) return ch;
    }
    throw ConfigError(path, "no channel named '" + name + "'");
}

channel::LinkBudget channel_budget(const ChannelConfig& ch, const std::string& weather) {
    if (weather.empty()) return channel::total_budget(ch.geometry, ch.atmospheric_db, ch.optics_db);
    for (const WeatherVariant& w : ch.weather) {
        if (w.name != weather) continue;
        channel::ChannelGeometry g = ch.geometry;
        g.far_field_spot_m = w.far_field_spot_m;
        return channel::total_budget(g, w.atmospheric_db, w.optics_db);
    }
    throw std::invalid_argument("channel '" + ch.name + "' has no weather variant '" + weather + "'");
}

experiments::TeleportationSetup teleportation_setup(const ScenarioConfig& c) {
    if (!c.teleport) throw ConfigError("teleport", "section missing");
    const TeleportConfig& t = *c.teleport;
    experiments::TeleportationSetup s;
    s.source = c.source;
    s.collinear_twofold_rate = t.collinear_twofold_rate;
    s.bsm_identification_fraction = t.bsm_identification_fraction;
    s.bsm_visibility = t.bsm_visibility;
    s.channel_loss_db = t.channel_loss_db ? *t.channel_loss_db
                                          : channel_budget(find_channel(c, t.channel, "teleport.channel"), t.weather).total_db;
    s.receiver = c.detectors.at(t.receiver);
    s.window = timing::CoincidenceWindow{t.coincidence_window_ns};
    s.multi_pair_emission = t.multi_pair_emission;
    s.duration_s = c.simulated_duration_s();
    s.seed = c.seed;
    return s;
}

experiments::ChshSetup chsh_setup(const ScenarioConfig& c) {
    if (!c.chsh) throw ConfigError("chsh", "section missing");
    const ChshConfig& h = *c.chsh;
    experiments::ChshSetup s;
    s.source = c.source;
    s.state = source::bell_diagonal_from_visibilities(h.effective_visibility_hv, h.effective_visibility_pm);
    s.alice_loss_db = h.alice_loss_db ? *h.alice_loss_db
                                      : channel_budget(find_channel(c, h.alice_channel, "chsh.alice_channel"), h.weather).total_db;
    s.bob_loss_db = h.bob_loss_db ? *h.bob_loss_db
                                  : channel_budget(find_channel(c, h.bob_channel, "chsh.bob_channel"), h.weather).total_db;
    s.alice = c.detectors.at(h.alice_detector);
    s.bob = c.detectors.at(h.bob_detector);
    s.window = timing::CoincidenceWindow{h.coincidence_window_ns};
    s.qrng_interval_us = h.qrng_interval_us;
    experiments::default_chsh_angles(s);
    s.duration_s = c.simulated_duration_s();
    s.seed = c.seed;
    s.accidental_shard_s = h.accidental_shard_s;
    return s;
}

experiments::SyncSetup sync_setup(const ScenarioConfig& c) {
    if (!c.sync) throw ConfigError("sync", "section missing");
    const SyncConfig& y = *c.sync;
    experiments::SyncSetup s;
    s.shape = y.shape;
    s.cfd = y.cfd;
    s.tdc_resolution_ps = y.tdc_resolution_ps;
    s.pulses = y.pulses;
    s.alice_distance_m = y.alice_distance_m;
    s.bob_distance_m = y.bob_distance_m;
    s.spcm_jitter_ps = y.spcm_jitter_ps;
    s.seed = c.seed;
    return s;
}

experiments::AptSetup apt_setup(const ScenarioConfig& c) {
    if (!c.apt) throw ConfigError("apt", "section missing");
    const AptConfig& a = *c.apt;
    experiments::AptSetup s;
    s.stages = a.stages;
    s.disturbance = a.disturbance;
    s.duration_s = a.duration_s;
    s.dt_s = a.dt_s;
    s.probe_frequencies_hz = a.probe_frequencies_hz;
    s.probe_amplitude_urad = a.probe_amplitude_urad;
    s.sweep_duration_s = a.sweep_duration_s;
    if (!a.channel.empty()) s.geometry = find_channel(c, a.channel, "apt.channel").geometry;
    s.seed = c.seed;
    return s;
}

}  // namespace qlink::io

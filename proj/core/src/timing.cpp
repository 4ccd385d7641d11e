#include "qlink/timing.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "qlink/rng.hpp"

namespace qlink::timing {

void DetectorParams::validate() const {
    if (!(efficiency >= 0.0 && efficiency <= 1.0)) throw std::invalid_argument("efficiency must lie in [0, 1]");
    if (!(dark_rate >= 0.0)) throw std::invalid_argument("dark_rate must be non-negative");
    if (!(background_rate >= 0.0)) throw std::invalid_argument("background_rate must be non-negative");
    if (!(jitter_sigma_ps >= 0.0)) throw std::invalid_argument("jitter_sigma_ps must be non-negative");
}

TimeTagStream::TimeTagStream(std::string station, Picoseconds pps_epoch_ps)
    : station_(std::move(station)), pps_epoch_ps_(pps_epoch_ps) {
    if (pps_epoch_ps_ < 0) throw std::invalid_argument("PPS epoch must be non-negative");
}

void TimeTagStream::push(TimeTag tag) {
    if (tag.time_ps < 0) throw std::invalid_argument("time tags must be non-negative");
    if (!records_.empty() && tag.time_ps < records_.back().time_ps) {
        throw std::invalid_argument("time tags must be appended in nondecreasing order");
    }
    records_.push_back(tag);
}

std::vector<Picoseconds> TimeTagStream::pps_marks() const {
    std::vector<Picoseconds> marks;
    const Picoseconds last = records_.empty() ? pps_epoch_ps_ : records_.back().time_ps;
    for (Picoseconds t = pps_epoch_ps_; t <= last; t += kPsPerSecond) marks.push_back(t);
    return marks;
}

void TimeTagStream::write_csv(std::ostream& out) const {
    out << "# station=" << station_ << '\n';
    out << "# pps_epoch_ps=" << pps_epoch_ps_ << '\n';
    out << "channel_id,time_ps\n";
    for (const TimeTag& t : records_) out << t.channel << ',' << t.time_ps << '\n';
}

TimeTagStream TimeTagStream::read_csv(std::istream& in) {
    std::string station;
    Picoseconds epoch = 0;
    std::string line;
    bool saw_header = false;
    std::vector<TimeTag> tags;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# station=", 0) == 0) {
            station = line.substr(10);
        } else if (line.rfind("# pps_epoch_ps=", 0) == 0) {
            epoch = std::stoll(line.substr(15));
        } else if (line[0] == '#') {
            continue;
        } else if (!saw_header) {
            if (line != "channel_id,time_ps") throw std::invalid_argument("missing channel_id,time_ps header");
            saw_header = true;
        } else {
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw std::invalid_argument("malformed tag line: " + line);
            tags.push_back({static_cast<std::int32_t>(std::stol(line.substr(0, comma))), std::stoll(line.substr(comma + 1))});
        }
    }
    TimeTagStream stream(station, epoch);
    stream.reserve(tags.size());
    for (const TimeTag& t : tags) stream.push(t);
    return stream;
}

void SyncPulseShape::validate() const {
    if (!(fwhm_ns > 0.0)) throw std::invalid_argument("fwhm_ns must be positive");
    if (!(rise_time_ns > 0.0 && rise_time_ns <= fwhm_ns)) throw std::invalid_argument("rise_time_ns must lie in (0, fwhm_ns]");
    if (!(amplitude_jitter_fraction >= 0.0)) throw std::invalid_argument("amplitude_jitter_fraction must be non-negative");
    if (!(repetition_hz > 0.0)) throw std::invalid_argument("repetition_hz must be positive");
}

void CfdModel::validate() const {
    if (!(walk_suppression >= 0.0 && walk_suppression <= 0.1)) {
        throw std::invalid_argument("walk_suppression must lie in [0, 0.1]");
    }
    if (!(electronics_jitter_ps >= 0.0)) throw std::invalid_argument("electronics_jitter_ps must be non-negative");
}

Picoseconds CoincidenceWindow::half_width_ps() const {
    if (!(width_ns > 0.0)) throw std::invalid_argument("coincidence window must be positive");
    return static_cast<Picoseconds>(std::llround(width_ns * static_cast<double>(kPsPerNs) / 2.0));
}

TimeTagStream generate_noise_tags(const DetectorParams& params, double duration_s, std::uint64_t seed,
                                  std::int32_t channel, std::string station) {
    params.validate();
    if (!(duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    TimeTagStream stream(std::move(station));
    const double rate = params.noise_rate();
    if (rate <= 0.0) return stream;

    const auto end = static_cast<Picoseconds>(std::llround(duration_s * static_cast<double>(kPsPerSecond)));
    Rng rng = make_rng(seed, hash_label("noise-tags"));
    std::exponential_distribution<double> gap(rate / static_cast<double>(kPsPerSecond));
    stream.reserve(static_cast<std::size_t>(rate * duration_s * 1.01) + 16);
    Picoseconds t = 0;
    while (true) {
        t += static_cast<Picoseconds>(std::llround(gap(rng)));
        if (t >= end) break;
        stream.push({channel, t});
    }
    return stream;
}

TimeTagStream discriminate_sync(const SyncPulseShape& shape, const CfdModel& cfd,
                                std::span<const double> true_emission_times_ps, double tdc_resolution_ps,
                                std::uint64_t seed, std::int32_t channel, std::string station) {
    shape.validate();
    cfd.validate();
    if (!(tdc_resolution_ps > 0.0)) throw std::invalid_argument("tdc_resolution_ps must be positive");

    const double walk_sigma_ps =
        shape.amplitude_jitter_fraction * shape.rise_time_ns * static_cast<double>(kPsPerNs) * cfd.walk_suppression;
    Rng rng = make_rng(seed, hash_label("cfd"));
    std::normal_distribution<double> unit(0.0, 1.0);

    std::vector<TimeTag> tags;
    tags.reserve(true_emission_times_ps.size());
    for (double truth : true_emission_times_ps) {
        if (!(truth >= 0.0)) throw std::invalid_argument("true emission times must be non-negative");
        // Draw both normals unconditionally so the stream layout does not
        // depend on which jitter terms are switched on.
        const double walk = walk_sigma_ps * unit(rng);
        const double jitter = cfd.electronics_jitter_ps * unit(rng);
        const double measured = std::max(0.0, truth + walk + jitter);
        const double quantized = std::floor(measured / tdc_resolution_ps) * tdc_resolution_ps;
        tags.push_back({channel, static_cast<Picoseconds>(std::llround(quantized))});
    }
    std::stable_sort(tags.begin(), tags.end(), [](const TimeTag& x, const TimeTag& y) { return x.time_ps < y.time_ps; });

    TimeTagStream stream(std::move(station));
    stream.reserve(tags.size());
    for (const TimeTag& t : tags) stream.push(t);
    return stream;
}

double predicted_station_sigma_ps(const SyncPulseShape& shape, const CfdModel& cfd, double tdc_resolution_ps) {
    const double walk =
        shape.amplitude_jitter_fraction * shape.rise_time_ns * static_cast<double>(kPsPerNs) * cfd.walk_suppression;
    return std::sqrt(walk * walk + cfd.electronics_jitter_ps * cfd.electronics_jitter_ps +
                     tdc_resolution_ps * tdc_resolution_ps / 12.0);
}

namespace {

void require_sorted(std::span<const TimeTag> tags, const char* which) {
    for (std::size_t i = 1; i < tags.size(); ++i) {
        if (tags[i].time_ps < tags[i - 1].time_ps) {
            throw std::invalid_argument(std::string("stream ") + which + " is not time-sorted at record " +
                                        std::to_string(i));
        }
    }
}

}  // namespace

std::vector<CoincidencePair> match_coincidences(std::span<const TimeTag> a, std::span<const TimeTag> b,
                                                CoincidenceWindow window, Picoseconds offset_ps) {
    require_sorted(a, "a");
    require_sorted(b, "b");
    const Picoseconds half = window.half_width_ps();

    std::vector<CoincidencePair> pairs;
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const Picoseconds delta = a[i].time_ps - offset_ps - b[j].time_ps;
        if (delta > half) {
            ++j;  // b is too early for this and every later a
        } else if (delta < -half) {
            ++i;
        } else {
            pairs.push_back({i, j, delta});
            ++i;
            ++j;
        }
    }
    return pairs;
}

std::vector<CoincidencePair> match_coincidences(const TimeTagStream& a, const TimeTagStream& b,
                                                CoincidenceWindow window, Picoseconds offset_ps) {
    return match_coincidences(a.records(), b.records(), window, offset_ps);
}

double expected_accidentals(double rate_a, double rate_b, CoincidenceWindow window, double duration_s) {
    const double width_s = 2.0 * static_cast<double>(window.half_width_ps()) / static_cast<double>(kPsPerSecond);
    return rate_a * rate_b * width_s * duration_s;
}

Histogram make_histogram(std::span<const Picoseconds> samples) {
    if (samples.empty()) throw std::invalid_argument("cannot histogram an empty sample");
    const auto [min_it, max_it] = std::minmax_element(samples.begin(), samples.end());
    const Picoseconds lo = *min_it;
    const Picoseconds hi = *max_it;
    if (lo == hi) throw std::invalid_argument("all samples are equal");

    Picoseconds lattice = 0;
    for (Picoseconds s : samples) lattice = std::gcd(lattice, s - lo);

    std::vector<Picoseconds> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto quantile = [&](double q) {
        return static_cast<double>(sorted[static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1))]);
    };
    const double iqr = quantile(0.75) - quantile(0.25);
    const double n = static_cast<double>(samples.size());
    const double fd = 2.0 * iqr / std::cbrt(n);

    const double g = static_cast<double>(lattice);
    double width = g * std::max(1.0, std::round(fd / g));
    constexpr double kMaxBins = 4000.0;
    const double span = static_cast<double>(hi - lo);
    if (span / width > kMaxBins) width = g * std::ceil(span / kMaxBins / g);

    constexpr int kPad = 3;  // empty bins on both sides anchor the tails
    Histogram h;
    h.bin_width_ps = width;
    h.first_edge_ps = static_cast<double>(lo) - g / 2.0 - kPad * width;
    const auto bins = static_cast<std::size_t>(std::floor(span / width)) + 1 + 2 * kPad;
    h.counts.assign(bins, 0.0);
    for (Picoseconds s : samples) {
        const auto idx = static_cast<std::size_t>(std::floor((static_cast<double>(s) - h.first_edge_ps) / width));
        h.counts[std::min(idx, bins - 1)] += 1.0;
    }
    return h;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

struct BinModel {
    double value;
    Eigen::Vector3d grad;  // d/d(total, center, sigma)
};

BinModel bin_model(const Eigen::Vector3d& p, double lo, double hi) {
    const double total = p(0), mu = p(1), sigma = p(2);
    const double zl = (lo - mu) / sigma;
    const double zh = (hi - mu) / sigma;
    const double mass = normal_cdf(zh) - normal_cdf(zl);
    const double pl = normal_pdf(zl), ph = normal_pdf(zh);
    BinModel m;
    m.value = total * mass;
    m.grad << mass, total * (pl - ph) / sigma, total * (zl * pl - zh * ph) / sigma;
    return m;
}

}  // namespace

GaussianFit fit_gaussian_histogram(std::span<const Picoseconds> residuals) {
    if (residuals.size() < kMinFitSamples) {
        throw std::invalid_argument("need at least " + std::to_string(kMinFitSamples) + " samples for a Gaussian fit");
    }
    const Histogram h = make_histogram(residuals);  // throws on all-equal input

    const double n = static_cast<double>(residuals.size());
    double mean = 0.0;
    for (Picoseconds r : residuals) mean += static_cast<double>(r);
    mean /= n;
    double var = 0.0;
    for (Picoseconds r : residuals) var += (static_cast<double>(r) - mean) * (static_cast<double>(r) - mean);
    var /= (n - 1.0);

    Eigen::Vector3d p(n, mean, std::max(std::sqrt(var), h.bin_width_ps / 4.0));
    const std::size_t bins = h.counts.size();

    // Pearson weights 1/max(model, 1), refreshed each iteration.
    auto assemble = [&](const Eigen::Vector3d& params, Eigen::Matrix3d& jtj, Eigen::Vector3d& jtr) {
        jtj.setZero();
        jtr.setZero();
        double chi2 = 0.0;
        for (std::size_t i = 0; i < bins; ++i) {
            const double lo = h.first_edge_ps + static_cast<double>(i) * h.bin_width_ps;
            const BinModel m = bin_model(params, lo, lo + h.bin_width_ps);
            const double w = 1.0 / std::max(m.value, 1.0);
            const double r = h.counts[i] - m.value;
            chi2 += w * r * r;
            jtj += w * m.grad * m.grad.transpose();
            jtr += w * r * m.grad;
        }
        return chi2;
    };

    Eigen::Matrix3d jtj;
    Eigen::Vector3d jtr;
    double chi2 = assemble(p, jtj, jtr);
    double lambda = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        Eigen::Matrix3d damped = jtj;
        damped.diagonal() *= (1.0 + lambda);
        const Eigen::Vector3d step = damped.ldlt().solve(jtr);
        Eigen::Vector3d trial = p + step;
        if (!(trial(2) > 0.0) || !(trial(0) > 0.0) || !trial.allFinite()) {
            lambda *= 10.0;
            continue;
        }
        Eigen::Matrix3d jtj_t;
        Eigen::Vector3d jtr_t;
        const double chi2_t = assemble(trial, jtj_t, jtr_t);
        if (chi2_t <= chi2) {
            const bool converged = std::abs(chi2 - chi2_t) < 1e-10 * std::max(1.0, chi2) &&
                                   step.cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, p.cwiseAbs().maxCoeff());
            p = trial;
            chi2 = chi2_t;
            jtj = jtj_t;
            jtr = jtr_t;
            lambda = std::max(lambda / 10.0, 1e-12);
            if (converged) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }

    const Eigen::Matrix3d cov = jtj.inverse();
    GaussianFit fit;
    fit.center_ps = p(1);
    fit.delta_ps = p(2);
    fit.center_err_ps = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.delta_err_ps = std::sqrt(std::max(0.0, cov(2, 2)));
    fit.samples = residuals.size();
    fit.bin_width_ps = h.bin_width_ps;
    return fit;
}

}  // namespace qlink::timing

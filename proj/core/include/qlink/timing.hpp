#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace qlink::timing {

// All event times are integer picoseconds.
using Picoseconds = std::int64_t;
inline constexpr Picoseconds kPsPerSecond = 1'000'000'000'000;
inline constexpr Picoseconds kPsPerNs = 1'000;

struct DetectorParams {
    double efficiency = 1.0;
    double dark_rate = 0.0;        // s^-1
    double background_rate = 0.0;  // s^-1
    double jitter_sigma_ps = 350.0;

    double noise_rate() const noexcept { return dark_rate + background_rate; }
    void validate() const;
};

struct TimeTag {
    std::int32_t channel = 0;
    Picoseconds time_ps = 0;

    friend bool operator==(const TimeTag&, const TimeTag&) = default;
};

// Time-ordered tag records of one station. The PPS epoch is the time of the
// first GPS second boundary; later boundaries follow every kPsPerSecond.
class TimeTagStream {
public:
    explicit TimeTagStream(std::string station = {}, Picoseconds pps_epoch_ps = 0);

    // Throws std::invalid_argument when the tag is negative or earlier than
    // the last appended tag.
    void push(TimeTag tag);
    void reserve(std::size_t n) { records_.reserve(n); }

    const std::string& station() const noexcept { return station_; }
    Picoseconds pps_epoch_ps() const noexcept { return pps_epoch_ps_; }
    std::span<const TimeTag> records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    // Second boundaries from the epoch through the last recorded tag.
    std::vector<Picoseconds> pps_marks() const;

    void write_csv(std::ostream& out) const;
    static TimeTagStream read_csv(std::istream& in);

private:
    std::string station_;
    Picoseconds pps_epoch_ps_;
    std::vector<TimeTag> records_;
};

// Shape of the synchronization laser pulse as seen by the photoreceiver.
struct SyncPulseShape {
    double fwhm_ns = 2.65;
    double rise_time_ns = 2.0;
    double amplitude_jitter_fraction = 0.0;  // rms pulse-energy fluctuation
    double repetition_hz = 10e3;

    void validate() const;
};

// Constant-fraction discriminator reduced to two numbers: the fraction of the
// leading-edge amplitude walk that survives the CFD, and the Gaussian timing
// jitter of photoreceiver plus TDC electronics.
struct CfdModel {
    double walk_suppression = 0.1;  // at most 0.1
    double electronics_jitter_ps = 0.0;

    void validate() const;
};

struct CoincidenceWindow {
    double width_ns = 1.0;

    Picoseconds half_width_ps() const;
};

// Homogeneous Poisson stream at dark_rate + background_rate.
TimeTagStream generate_noise_tags(const DetectorParams& params, double duration_s, std::uint64_t seed,
                                  std::int32_t channel = 0, std::string station = {});

// Timestamp = truth + residual CFD walk + electronics jitter, quantized down
// to the TDC grid. True times must be non-negative.
TimeTagStream discriminate_sync(const SyncPulseShape& shape, const CfdModel& cfd,
                                std::span<const double> true_emission_times_ps, double tdc_resolution_ps,
                                std::uint64_t seed, std::int32_t channel = 0, std::string station = {});

// rms per-station timing error predicted by the discriminator model.
double predicted_station_sigma_ps(const SyncPulseShape& shape, const CfdModel& cfd, double tdc_resolution_ps);

struct CoincidencePair {
    std::size_t index_a = 0;
    std::size_t index_b = 0;
    Picoseconds delta_ps = 0;  // t_a - t_b - offset

    friend bool operator==(const CoincidencePair&, const CoincidencePair&) = default;
};

// Greedy time-ordered one-to-one matching with |t_a - t_b - offset| <= width/2.
// Throws std::invalid_argument if either input is not time-sorted.
std::vector<CoincidencePair> match_coincidences(std::span<const TimeTag> a, std::span<const TimeTag> b,
                                                CoincidenceWindow window, Picoseconds offset_ps);
std::vector<CoincidencePair> match_coincidences(const TimeTagStream& a, const TimeTagStream& b,
                                                CoincidenceWindow window, Picoseconds offset_ps);

// Expected accidental matches between two independent Poisson streams.
double expected_accidentals(double rate_a, double rate_b, CoincidenceWindow window, double duration_s);

struct Histogram {
    double first_edge_ps = 0.0;
    double bin_width_ps = 0.0;
    std::vector<double> counts;

    double center(std::size_t i) const { return first_edge_ps + (static_cast<double>(i) + 0.5) * bin_width_ps; }
};

// Bins are aligned to the lattice of the data (e.g. a TDC grid) and widened
// to a multiple of it following the Freedman-Diaconis rule.
Histogram make_histogram(std::span<const Picoseconds> samples);

struct GaussianFit {
    double center_ps = 0.0;
    double delta_ps = 0.0;  // Gaussian sigma
    double delta_err_ps = 0.0;
    double center_err_ps = 0.0;
    std::size_t samples = 0;
    double bin_width_ps = 0.0;
};

inline constexpr std::size_t kMinFitSamples = 100;

// Weighted least-squares fit of a bin-integrated Gaussian to the histogram of
// `residuals`. Throws std::invalid_argument with fewer than kMinFitSamples
// samples or when all samples are equal.
GaussianFit fit_gaussian_histogram(std::span<const Picoseconds> residuals);

}  // namespace qlink::timing

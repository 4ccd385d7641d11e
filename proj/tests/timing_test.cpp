#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "qlink/timing.hpp"

namespace t = qlink::timing;
using t::Picoseconds;

namespace {

t::DetectorParams noise_only(double rate) {
    t::DetectorParams d;
    d.dark_rate = rate;
    return d;
}

std::vector<Picoseconds> gaussian_samples(double sigma, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<Picoseconds> out(n);
    for (auto& x : out) x = static_cast<Picoseconds>(std::llround(g(rng)));
    return out;
}

}  // namespace

TEST(NoiseTags, ZeroRateIsEmpty) { EXPECT_TRUE(t::generate_noise_tags(noise_only(0.0), 10.0, 1).empty()); }

TEST(NoiseTags, LongRunCount) {
    const auto s = t::generate_noise_tags(noise_only(200.0), 14'400.0, 3);
    const double mean = 200.0 * 14'400.0;
    EXPECT_NEAR(static_cast<double>(s.size()), mean, 3.0 * std::sqrt(mean));
    const auto tags = s.records();
    for (std::size_t i = 1; i < tags.size(); ++i) ASSERT_GE(tags[i].time_ps, tags[i - 1].time_ps);
    EXPECT_LT(tags.back().time_ps, 14'400 * t::kPsPerSecond);
}

TEST(NoiseTags, ShortRunMean) {
    double sum = 0.0;
    const int reps = 1000;
    for (int i = 0; i < reps; ++i) sum += static_cast<double>(t::generate_noise_tags(noise_only(20.0), 1.0, i).size());
    EXPECT_NEAR(sum / reps, 20.0, 3.0 * std::sqrt(20.0 / reps));
}

TEST(NoiseTags, ShardRatesInBand) {
    const double rate = 500.0;
    const double len = 2.0;
    int outside = 0;
    for (int shard = 0; shard < 100; ++shard) {
        const double n = static_cast<double>(t::generate_noise_tags(noise_only(rate), len, 1000 + shard).size());
        if (std::abs(n - rate * len) > 3.0 * std::sqrt(rate * len)) ++outside;
    }
    // About 0.3 expected; allow a handful.
    EXPECT_LE(outside, 3);
}

TEST(Stream, CsvRoundTripAndPps) {
    t::TimeTagStream s("alice", 250);
    s.push({0, 300});
    s.push({1, 2 * t::kPsPerSecond + 300});
    s.push({1, 2 * t::kPsPerSecond + 300});
    std::stringstream io;
    s.write_csv(io);
    const auto back = t::TimeTagStream::read_csv(io);
    EXPECT_EQ(back.station(), "alice");
    EXPECT_EQ(back.pps_epoch_ps(), 250);
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.records()[i], s.records()[i]);
    const auto marks = s.pps_marks();
    ASSERT_EQ(marks.size(), 3u);
    EXPECT_EQ(marks[2], 250 + 2 * t::kPsPerSecond);
}

TEST(Stream, RejectsDisorder) {
    t::TimeTagStream s;
    s.push({0, 10});
    EXPECT_THROW(s.push({0, 9}), std::invalid_argument);
    EXPECT_THROW(s.push({0, -1}), std::invalid_argument);
    std::stringstream bad("x,y\n1,2\n");
    EXPECT_THROW(t::TimeTagStream::read_csv(bad), std::invalid_argument);
}

TEST(Coincidences, IdenticalAndDisjoint) {
    const auto s = t::generate_noise_tags(noise_only(1000.0), 1.0, 8);
    const auto same = t::match_coincidences(s, s, t::CoincidenceWindow{1.0}, 0);
    ASSERT_EQ(same.size(), s.size());
    for (std::size_t i = 0; i < same.size(); ++i) {
        EXPECT_EQ(same[i].index_a, i);
        EXPECT_EQ(same[i].index_b, i);
        EXPECT_EQ(same[i].delta_ps, 0);
    }
    t::TimeTagStream a, b;
    for (int i = 0; i < 100; ++i) {
        a.push({0, i * 10'000});
        b.push({0, i * 10'000 + 5'000});
    }
    EXPECT_TRUE(t::match_coincidences(a, b, t::CoincidenceWindow{2.0}, 0).empty());
    EXPECT_EQ(t::match_coincidences(a, b, t::CoincidenceWindow{2.0}, -5'000).size(), 100u);
}

TEST(Coincidences, SymmetricAndOneToOne) {
    const auto a = t::generate_noise_tags(noise_only(2e5), 1.0, 1);
    const auto b = t::generate_noise_tags(noise_only(2e5), 1.0, 2);
    const t::CoincidenceWindow w{50.0};
    const auto ab = t::match_coincidences(a, b, w, 300);
    const auto ba = t::match_coincidences(b, a, w, -300);
    ASSERT_EQ(ab.size(), ba.size());
    std::vector<bool> used_a(a.size()), used_b(b.size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
        EXPECT_EQ(ab[i].index_a, ba[i].index_b);
        EXPECT_EQ(ab[i].index_b, ba[i].index_a);
        EXPECT_EQ(ab[i].delta_ps, -ba[i].delta_ps);
        ASSERT_FALSE(used_a[ab[i].index_a]);
        ASSERT_FALSE(used_b[ab[i].index_b]);
        used_a[ab[i].index_a] = used_b[ab[i].index_b] = true;
        EXPECT_LE(std::abs(ab[i].delta_ps), w.half_width_ps());
    }
}

TEST(Coincidences, UnsortedInputRejected) {
    std::vector<t::TimeTag> a{{0, 5}, {0, 3}};
    std::vector<t::TimeTag> b{{0, 1}};
    EXPECT_THROW(t::match_coincidences(a, b, t::CoincidenceWindow{1.0}, 0), std::invalid_argument);
}

class AccidentalLaw : public ::testing::TestWithParam<double> {};

TEST_P(AccidentalLaw, MatchesProductFormula) {
    const double r1 = 2e5, r2 = 3e5, duration = 5.0;
    const t::CoincidenceWindow w{GetParam()};
    const auto a = t::generate_noise_tags(noise_only(r1), duration, 11);
    const auto b = t::generate_noise_tags(noise_only(r2), duration, 12);
    const double expect = r1 * r2 * (w.width_ns * 1e-9) * duration;
    EXPECT_NEAR(t::expected_accidentals(r1, r2, w, duration), expect, 1e-9 * expect);
    const auto got = static_cast<double>(t::match_coincidences(a, b, w, 0).size());
    EXPECT_NEAR(got, expect, 3.0 * std::sqrt(expect));
}

INSTANTIATE_TEST_SUITE_P(Windows, AccidentalLaw, ::testing::Values(0.5, 1.0, 2.0, 4.0));

TEST(Discriminator, QuantizationOnly) {
    const t::SyncPulseShape shape;
    t::CfdModel cfd;
    cfd.walk_suppression = 0.1;
    std::vector<double> truth;
    for (int i = 0; i < 1000; ++i) truth.push_back(1e6 * i + 37.0 * i);
    const auto s = t::discriminate_sync(shape, cfd, truth, 100.0, 1);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double err = truth[i] - static_cast<double>(s.records()[i].time_ps);
        ASSERT_GE(err, 0.0);
        ASSERT_LT(err, 100.0);
    }
    const auto exact = t::discriminate_sync(shape, cfd, truth, 1.0, 1);
    for (std::size_t i = 0; i < truth.size(); ++i) ASSERT_EQ(static_cast<double>(exact.records()[i].time_ps), truth[i]);
}

TEST(Discriminator, PredictedSigma) {
    t::SyncPulseShape shape;
    shape.amplitude_jitter_fraction = 0.3;
    t::CfdModel cfd{0.1, 270.0};
    // walk = 0.3 * 2000 ps * 0.1 = 60 ps
    const double expect = std::sqrt(60.0 * 60.0 + 270.0 * 270.0 + 100.0 * 100.0 / 12.0);
    EXPECT_NEAR(t::predicted_station_sigma_ps(shape, cfd, 100.0), expect, 1e-9);
    cfd.walk_suppression = 0.2;
    EXPECT_THROW(cfd.validate(), std::invalid_argument);
}

TEST(GaussianFit, RecoversSigma) {
    const auto samples = gaussian_samples(394.0, 10'000, 21);
    const auto fit = t::fit_gaussian_histogram(samples);
    EXPECT_NEAR(fit.delta_ps, 394.0, 3.0 * fit.delta_err_ps);
    EXPECT_NEAR(fit.center_ps, 0.0, 3.0 * fit.center_err_ps);
    EXPECT_GT(fit.delta_err_ps, 0.0);
    EXPECT_LT(fit.delta_err_ps, 10.0);
}

TEST(GaussianFit, TwoSeedsAgree) {
    const auto a = t::fit_gaussian_histogram(gaussian_samples(394.0, 10'000, 31));
    const auto b = t::fit_gaussian_histogram(gaussian_samples(394.0, 10'000, 32));
    EXPECT_LT(std::abs(a.delta_ps - b.delta_ps), 3.0 * std::hypot(a.delta_err_ps, b.delta_err_ps));
}

TEST(GaussianFit, QuantizedDelta) {
    // A fixed offset seen through a 100 ps TDC with random grid phase.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> phase(0.0, 100.0);
    std::vector<Picoseconds> samples;
    for (int i = 0; i < 5000; ++i) {
        const double ta = std::floor((1050.0 + phase(rng)) / 100.0) * 100.0;
        const double tb = std::floor((1050.0 + phase(rng)) / 100.0) * 100.0;
        samples.push_back(static_cast<Picoseconds>(ta - tb));
    }
    const auto fit = t::fit_gaussian_histogram(samples);
    EXPECT_LE(fit.delta_ps, 100.0);
}

TEST(GaussianFit, Preconditions) {
    std::vector<Picoseconds> few(50, 3);
    EXPECT_THROW(t::fit_gaussian_histogram(few), std::invalid_argument);
    std::vector<Picoseconds> flat(500, 7);
    EXPECT_THROW(t::fit_gaussian_histogram(flat), std::invalid_argument);
}

TEST(Histogram, AlignsToLattice) {
    std::vector<Picoseconds> samples;
    for (int i = 0; i < 1000; ++i) samples.push_back(100 * (i % 17 - 8));
    const auto h = t::make_histogram(samples);
    EXPECT_EQ(std::fmod(h.bin_width_ps, 100.0), 0.0);
    double total = 0.0;
    for (double c : h.counts) total += c;
    EXPECT_EQ(total, 1000.0);
}

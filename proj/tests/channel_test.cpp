#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "qlink/apt.hpp"
#include "qlink/channel.hpp"
#include "test_util.hpp"

namespace c = qlink::channel;

namespace {

c::ChannelGeometry link_97km(double spot_m, double pointing_rad = 0.0) {
    c::ChannelGeometry g;
    g.distance_m = 97'000.0;
    g.far_field_spot_m = spot_m;
    g.receiver_aperture_m = 0.4;
    g.pointing_rms_rad = pointing_rad;
    return g;
}

}  // namespace

TEST(GeometricLoss, EndpointSpots) {
    EXPECT_NEAR(c::geometric_loss(link_97km(3.5)).db, 18.84, 0.01);
    EXPECT_NEAR(c::geometric_loss(link_97km(3.5)).db, 19.0, 0.5);
    EXPECT_NEAR(c::geometric_loss(link_97km(17.9)).db, 33.0, 0.5);
    // -20 log10(0.4 / 17.9)
    EXPECT_NEAR(c::geometric_loss(17.9, 0.4).db, -20.0 * std::log10(0.4 / 17.9), 1e-12);
}

TEST(GeometricLoss, FullCapture) {
    const auto eq = c::geometric_loss(0.4, 0.4);
    EXPECT_EQ(eq.db, 0.0);
    EXPECT_TRUE(eq.full_capture);
    EXPECT_EQ(c::geometric_loss(0.2, 0.4).db, 0.0);
}

TEST(GeometricLoss, Monotone) {
    double prev = -1.0;
    for (double spot = 0.5; spot < 30.0; spot += 0.5) {
        const double db = c::geometric_loss(spot, 0.4).db;
        ASSERT_GT(db, prev);
        prev = db;
    }
    prev = 1e9;
    for (double ap = 0.05; ap < 3.0; ap += 0.05) {
        const double db = c::geometric_loss(3.5, ap).db;
        ASSERT_LT(db, prev);
        prev = db;
    }
}

TEST(GeometricLoss, SpotFromDivergence) {
    c::ChannelGeometry g;
    g.distance_m = 1000.0;
    g.divergence_rad = 1e-3;
    g.receiver_aperture_m = 0.1;
    EXPECT_DOUBLE_EQ(g.spot_diameter_m(), 1.0);
    EXPECT_NEAR(c::geometric_loss(g).db, 20.0, 1e-12);
}

TEST(Budget, PaperCases) {
    const auto best = c::total_budget(link_97km(3.5), 8.0, 8.0);
    EXPECT_NEAR(best.total_db, 35.0, 0.5);
    const auto worst = c::total_budget(link_97km(17.9), 12.0, 8.0);
    EXPECT_NEAR(worst.total_db, 53.0, 0.5);
    for (const auto& b : {best, worst}) {
        EXPECT_EQ(b.pointing_db, 0.0);
        EXPECT_NEAR(b.total_db, b.geometric_db + b.atmospheric_db + b.optics_db + b.pointing_db, 1e-9);
    }
    const auto zero = c::total_budget(link_97km(0.4), 0.0, 0.0);
    EXPECT_EQ(zero.total_db, 0.0);
    EXPECT_THROW(c::total_budget(link_97km(3.5), -1.0, 0.0), std::invalid_argument);
}

TEST(Pointing, DisplacementAndLoss) {
    EXPECT_NEAR(qlink::apt::pointing_displacement_m(3.5, 97'000.0), 0.3395, 1e-4);
    EXPECT_EQ(c::pointing_loss_db(link_97km(3.5, 0.0)), 0.0);
    const double db = c::pointing_loss_db(link_97km(3.5, 3.5e-6));
    const double oracle = 20.0 * std::log10(std::sqrt(3.5 * 3.5 + 0.679 * 0.679) / 3.5);
    EXPECT_NEAR(db, oracle, 1e-3);
    EXPECT_LT(db, 0.3);
}

TEST(Transmittance, Inverse) {
    EXPECT_NEAR(c::transmittance(44.0), 3.98e-5, 1e-7);
    EXPECT_EQ(c::transmittance(0.0), 1.0);
    for (double db = 0.0; db <= 100.0; db += 0.25) ASSERT_NEAR(c::to_db(c::transmittance(db)), db, 1e-12);
    EXPECT_THROW(c::transmittance(-1.0), std::invalid_argument);
    EXPECT_THROW(c::to_db(0.0), std::invalid_argument);
}

TEST(Transmission, Sampling) {
    const auto all = c::sample_transmission(1.0, 1000, 3);
    EXPECT_EQ(std::count(all.begin(), all.end(), true), 1000);
    const auto none = c::sample_transmission(0.0, 1000, 3);
    EXPECT_EQ(std::count(none.begin(), none.end(), true), 0);
    const double eta = 3.98e-5;
    const std::size_t n = 10'000'000;
    const auto got = c::sample_transmission(eta, n, 7);
    const auto survivors = static_cast<double>(std::count(got.begin(), got.end(), true));
    EXPECT_NEAR(survivors, eta * n, 3.0 * qlink::testing::binomial_sigma(static_cast<double>(n), eta));
}

TEST(Geometry, Validation) {
    c::ChannelGeometry g = link_97km(3.5);
    g.receiver_aperture_m = 0.0;
    EXPECT_THROW(g.validate(), std::invalid_argument);
    c::ChannelGeometry h;
    h.distance_m = 1.0;
    h.receiver_aperture_m = 0.1;
    EXPECT_THROW(h.validate(), std::invalid_argument);
}

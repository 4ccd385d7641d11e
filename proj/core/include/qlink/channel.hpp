#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace qlink::channel {

struct ChannelGeometry {
    double distance_m = 0.0;
    double divergence_rad = 0.0;             // full angle
    std::optional<double> far_field_spot_m;  // diameter; derived from divergence when absent
    double receiver_aperture_m = 0.0;        // diameter
    double pointing_rms_rad = 0.0;

    double spot_diameter_m() const;
    void validate() const;
};

// Itemized loss ledger; every entry in dB and non-negative.
struct LinkBudget {
    double geometric_db = 0.0;
    double atmospheric_db = 0.0;
    double optics_db = 0.0;
    double pointing_db = 0.0;
    double total_db = 0.0;

    double transmittance() const;
};

struct GeometricLoss {
    double db = 0.0;
    // Aperture at least as large as the spot: everything is captured.
    bool full_capture = false;
};

// Top-hat far field: loss = -10 log10((aperture / spot)^2).
GeometricLoss geometric_loss(const ChannelGeometry& geom);
GeometricLoss geometric_loss(double spot_diameter_m, double aperture_m);

// sqrt(spot^2 + (2 * pointing_rms * distance)^2)
double effective_spot_m(double spot_diameter_m, double pointing_rms_rad, double distance_m);

// Extra geometric loss from broadening the spot by pointing jitter.
double pointing_loss_db(const ChannelGeometry& geom);

LinkBudget total_budget(const ChannelGeometry& geom, double atmospheric_db, double optics_db);

double transmittance(double db);
double to_db(double eta);

// Independent Bernoulli(eta) survival per photon.
std::vector<bool> sample_transmission(double eta, std::size_t photons, std::uint64_t seed);

}  // namespace qlink::channel

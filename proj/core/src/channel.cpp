#include "qlink/channel.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "qlink/rng.hpp"

namespace qlink::channel {

double ChannelGeometry::spot_diameter_m() const {
    return far_field_spot_m ? *far_field_spot_m : divergence_rad * distance_m;
}

void ChannelGeometry::validate() const {
    if (!(distance_m > 0.0)) throw std::invalid_argument("distance_m must be positive");
    if (!(divergence_rad > 0.0) && !far_field_spot_m) {
        throw std::invalid_argument("divergence_rad must be positive when far_field_spot_m is absent");
    }
    if (divergence_rad < 0.0) throw std::invalid_argument("divergence_rad must be non-negative");
    if (far_field_spot_m && !(*far_field_spot_m > 0.0)) throw std::invalid_argument("far_field_spot_m must be positive");
    if (!(receiver_aperture_m > 0.0)) throw std::invalid_argument("receiver_aperture_m must be positive");
    if (!(pointing_rms_rad >= 0.0)) throw std::invalid_argument("pointing_rms_rad must be non-negative");
}

double LinkBudget::transmittance() const { return channel::transmittance(total_db); }

GeometricLoss geometric_loss(double spot_diameter_m, double aperture_m) {
    if (!(spot_diameter_m > 0.0) || !(aperture_m > 0.0)) {
        throw std::invalid_argument("spot and aperture diameters must be positive");
    }
    if (aperture_m >= spot_diameter_m) return GeometricLoss{0.0, true};
    const double ratio = aperture_m / spot_diameter_m;
    return GeometricLoss{-10.0 * std::log10(ratio * ratio), false};
}

GeometricLoss geometric_loss(const ChannelGeometry& geom) {
    return geometric_loss(geom.spot_diameter_m(), geom.receiver_aperture_m);
}

double effective_spot_m(double spot_diameter_m, double pointing_rms_rad, double distance_m) {
    const double wander = 2.0 * pointing_rms_rad * distance_m;
    return std::sqrt(spot_diameter_m * spot_diameter_m + wander * wander);
}

double pointing_loss_db(const ChannelGeometry& geom) {
    if (geom.pointing_rms_rad == 0.0) return 0.0;
    const double spot = geom.spot_diameter_m();
    const double broadened = effective_spot_m(spot, geom.pointing_rms_rad, geom.distance_m);
    return geometric_loss(broadened, geom.receiver_aperture_m).db - geometric_loss(spot, geom.receiver_aperture_m).db;
}

LinkBudget total_budget(const ChannelGeometry& geom, double atmospheric_db, double optics_db) {
    geom.validate();
    if (!(atmospheric_db >= 0.0) || !(optics_db >= 0.0)) {
        throw std::invalid_argument("component losses must be non-negative");
    }
    LinkBudget b;
    b.geometric_db = geometric_loss(geom).db;
    b.atmospheric_db = atmospheric_db;
    b.optics_db = optics_db;
    b.pointing_db = pointing_loss_db(geom);
    b.total_db = b.geometric_db + b.atmospheric_db + b.optics_db + b.pointing_db;
    return b;
}

double transmittance(double db) {
    if (!(db >= 0.0)) throw std::invalid_argument("loss in dB must be non-negative");
    return std::pow(10.0, -db / 10.0);
}

double to_db(double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("transmittance must lie in (0, 1]");
    return -10.0 * std::log10(eta);
}

std::vector<bool> sample_transmission(double eta, std::size_t photons, std::uint64_t seed) {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("transmittance must lie in [0, 1]");
    std::vector<bool> survived(photons, false);
    if (eta == 0.0) return survived;
    if (eta == 1.0) {
        survived.assign(photons, true);
        return survived;
    }
    Rng rng = make_rng(seed, hash_label("transmission"));
    std::bernoulli_distribution keep(eta);
    for (std::size_t i = 0; i < photons; ++i) survived[i] = keep(rng);
    return survived;
}

}  // namespace qlink::channel

#include "pdcmodes/grid.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/tpa.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pdcmodes {

PolarGrid make_polar_grid(double theta_max, int n_theta, int n_phi) {
    if (n_theta < 1 || !(theta_max > 0)) throw Error("invalid polar grid extent");
    return polar_grid_with_step(theta_max / n_theta, n_theta, n_phi);
}

PolarGrid polar_grid_with_step(double dtheta, int n_theta, int n_phi) {
    if (n_theta < 1 || n_phi < 1 || !(dtheta > 0) || !std::isfinite(dtheta))
        throw Error("invalid polar grid extent");
    PolarGrid grid;
    grid.dtheta = dtheta;
    grid.dphi = 2.0 * std::numbers::pi / n_phi;
    grid.theta.resize(n_theta);
    grid.phi.resize(n_phi);
    for (int j = 0; j < n_theta; ++j) grid.theta[j] = (j + 0.5) * grid.dtheta;
    for (int k = 0; k < n_phi; ++k) grid.phi[k] = k * grid.dphi;
    return grid;
}

double pair_envelope(const SourceConfig& config, double theta) {
    const TwoPhotonAmplitude amplitude(config);
    return std::norm(amplitude.at(theta, theta, -1.0));
}

PolarGrid build_grid(const SourceConfig& config, int n_theta, int n_phi) {
    if (n_theta < 16 || n_phi < 16) throw Error("build_grid needs n_theta, n_phi >= 16");
    const TwoPhotonAmplitude amplitude(config);
    constexpr int kSamples = 4096;
    constexpr double kTail = 0.01;

    for (double theta_max = 2e-3;; theta_max *= 1.1) {
        if (theta_max > kThetaCap)
            throw Error("emission envelope does not fall below 1% of its peak within 0.2 rad");
        const double span = 2.0 * theta_max;
        double peak = 0;
        double tail = 0;
        for (int s = 0; s <= kSamples; ++s) {
            const double theta = span * s / kSamples;
            const double value = std::norm(amplitude.at(theta, theta, -1.0));
            peak = std::max(peak, value);
            if (theta >= theta_max) tail = std::max(tail, value);
        }
        if (peak > 0 && tail < kTail * peak) return make_polar_grid(theta_max, n_theta, n_phi);
    }
}

}  // namespace pdcmodes

#ifndef PDCMODES_GRID_HPP
#define PDCMODES_GRID_HPP

#include "pdcmodes/config.hpp"

#include <cstddef>
#include <vector>

namespace pdcmodes {

/// Far-field polar grid. Polar nodes sit at half-node offsets,
/// theta_j = (j + 1/2) * dtheta, so no node lies on the axis; azimuthal
/// nodes are phi_k = k * dphi on [0, 2pi).
struct PolarGrid {
    std::vector<double> theta;
    std::vector<double> phi;
    double dtheta = 0;
    double dphi = 0;

    std::size_t n_theta() const { return theta.size(); }
    std::size_t n_phi() const { return phi.size(); }
    double theta_max() const { return dtheta * static_cast<double>(theta.size()); }
    /// Quadrature weight of node (j, k) for integrals over theta dtheta dphi.
    double area_weight(std::size_t j) const { return theta[j] * dtheta * dphi; }
};

/// Hard upper bound for the polar extent.
inline constexpr double kThetaCap = 0.2;

PolarGrid make_polar_grid(double theta_max, int n_theta, int n_phi);
/// Same grid specified by its polar step, for exact round trips through files.
PolarGrid polar_grid_with_step(double dtheta, int n_theta, int n_phi);

/// Low-gain emission envelope along exactly anti-collinear pairs
/// (q_i = -q_s): |sinc * interference|^2. Independent of the pump width.
double pair_envelope(const SourceConfig& config, double theta);

/// Chooses theta_max by growing it until the emission envelope stays below 1%
/// of its peak everywhere between theta_max and 2*theta_max. Throws Error
/// when that needs theta_max > kThetaCap.
PolarGrid build_grid(const SourceConfig& config, int n_theta, int n_phi);
inline PolarGrid build_grid(const SourceConfig& config) {
    return build_grid(config, config.n_theta, config.n_phi);
}

}  // namespace pdcmodes

#endif

#ifndef PDCMODES_TPA_HPP
#define PDCMODES_TPA_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/grid.hpp"

#include <Eigen/Core>

#include <complex>
#include <vector>

namespace pdcmodes {

using cplx = std::complex<double>;

/// Paraxial, frequency-degenerate two-photon amplitude of the two-crystal
/// source. Angles map to transverse wavevectors q = k * theta (cos phi, sin phi)
/// with k the detected wavenumber.
class TwoPhotonAmplitude {
public:
    explicit TwoPhotonAmplitude(const SourceConfig& config);

    cplx operator()(double theta_s, double phi_s, double theta_i, double phi_i) const;
    /// Same amplitude parametrized by the azimuth difference phi_s - phi_i.
    cplx at(double theta_s, double theta_i, double cos_dphi) const;

    /// Relative phase between the two crystals' contributions.
    double interference_phase(double theta_s, double theta_i, double cos_dphi) const;

    /// Pump angular envelope for |q_s + q_i|^2.
    double pump_envelope(double sum_q_sq) const;

private:
    double k_;
    double crystal_length_;
    double waist_sq_;
    double mismatch_;
    double phase_offset_;  ///< pi*L/L_pi + Kerr phase
    double free_space_;    ///< L / (2k)
};

/// Convenience wrapper evaluating one amplitude.
cplx tpa_pointwise(const SourceConfig& config, double theta_s, double phi_s, double theta_i,
                   double phi_i);

/// Interference phase on axis (theta_s = theta_i = 0).
double collinear_phase(const SourceConfig& config);

/// Azimuthal Fourier component of the amplitude at fixed l,
///   F_l(ts, ti) = sqrt(ts*ti) * (1/2pi) Int F(ts, ti, dphi) exp(-i l (dphi - pi)) d(dphi),
/// sampled on the polar grid. The sqrt(ts*ti) factor makes the SVD act on a
/// flat theta measure. `quadrature_change` is the max relative change of
/// the n_phi-node trapezoid estimate against one with 2*n_phi nodes.
struct RadialKernel {
    int l = 0;
    Eigen::MatrixXcd values;
    double quadrature_change = 0;
};

RadialKernel radial_kernel(const SourceConfig& config, const PolarGrid& grid, int l);

/// Kernels for l = 0..l_max sharing one pass over the amplitude. F_{-l} = F_l,
/// so negative l are not materialized.
std::vector<RadialKernel> radial_kernels(const SourceConfig& config, const PolarGrid& grid,
                                         int l_max, int threads = 0);

}  // namespace pdcmodes

#endif

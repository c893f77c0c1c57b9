#ifndef PDCMODES_SCANS_HPP
#define PDCMODES_SCANS_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/pipeline.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pdcmodes {

/// G0(P) = c * sqrt(P), with the intensity prefactor of I = A sinh^2(c sqrt P).
struct GainLaw {
    double c = 0;
    double amplitude = 1;
    double residual = 0;  ///< rms residual of log I

    double gain(double power) const;
};

/// Gain law implied by a config: c = gain / sqrt(pump_power).
GainLaw gain_law(const SourceConfig& config);

/// Least-squares fit of I = A sinh^2(c sqrt P) in log space. Needs at least
/// three points with I > 0 and I strictly increasing with P.
GainLaw calibrate_gain(std::span<const std::pair<double, double>> power_intensity);

struct KerrCalibration {
    double kappa = 0;      ///< rad / W
    double intercept = 0;  ///< phase at P = 0
    double residual = 0;   ///< rms residual of the phase fit
};

/// Kerr slope from (P, L_min) observations of the collinear destructive
/// interference distance: phi_K = pi (L_pi - L_min) / L_pi fitted linearly
/// against P. L_min must not grow with P.
KerrCalibration kerr_calibration(std::span<const std::pair<double, double>> power_distance,
                                 double pi_distance);

/// Gap distance in (0, 2 L_pi) where the collinear amplitude vanishes at the
/// config's pump power.
double collinear_minimum_distance(const SourceConfig& config);

/// Collinear emission |F(0, 0)|^2 of the low-gain amplitude.
double collinear_emission(const SourceConfig& config);

struct ScanPoint {
    double value = 0;
    double G0 = 0;
    double kerr_phase = 0;
    double K = 0;
    double K_oam = 0;
    /// Mean intensity at the innermost node relative to the peak.
    double collinear_intensity = 0;
    std::vector<double> l_weights;  ///< Lambda_l for l = 0..l_max
    std::vector<double> p_weights;  ///< Lambda_p for p = 0..p_max-1
    GainedSpectrum spectrum;
};

struct ScanResult {
    std::string variable;
    SourceConfig config;
    std::vector<ScanPoint> points;
};

ScanPoint scan_point(const ModeAnalysis& analysis, double value);

/// Mode counts versus pump power. G0 follows `law` and the Kerr phase is
/// kappa * P.
ScanResult scan_power(const SourceConfig& config, std::span<const double> powers,
                      const GainLaw& law, int threads = 0);
ScanResult scan_power(const SourceConfig& config, std::span<const double> powers,
                      int threads = 0);

/// Mode counts versus gap distance at the config's power and gain.
ScanResult scan_distance(const SourceConfig& config, std::span<const double> distances,
                         int threads = 0);

void write_scan_csv(const std::filesystem::path& path, const ScanResult& result);

/// scan.csv plus points/NNN/weights.csv (Lambda_lp of every point) under `dir`.
void write_scan(const std::filesystem::path& dir, const ScanResult& result);

}  // namespace pdcmodes

#endif

#ifndef PDCMODES_CONFIG_HPP
#define PDCMODES_CONFIG_HPP

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pdcmodes {

/// Physical and numerical parameters of the two-crystal source.
///
/// All lengths in metres, power in watts, phases in radians. `gain` is the
/// parametric gain G0 of the strongest mode at `pump_power`; scans rescale it
/// as G0 ∝ sqrt(P).
struct SourceConfig {
    double pump_wavelength = 354.67e-9;
    double detect_wavelength = 710e-9;
    double crystal_length = 2e-3;
    double gap_distance = 15e-3;
    double pump_fwhm = 170e-6;
    double pi_distance = 18e-3;
    double gain = 7.6;
    double kerr_coeff = 0.0;       ///< rad / W
    double pump_power = 0.045;     ///< W
    double collinear_mismatch = 0; ///< 1/m

    int l_max = 12;
    int p_max = 8;
    int n_theta = 256;
    int n_phi = 256;

    double focal_length = 0.2; ///< far-field lens, r = f * theta
    int n_freq = 1;            ///< effective frequency modes in synthesized frames
    double read_noise = 0.0;   ///< additive Gaussian noise, fraction of mean peak intensity
    double full_well = 0.0;    ///< clipping level, fraction of mean peak intensity; 0 disables

    double detect_wavenumber() const;
    /// 1/e^2 intensity radius of the pump waist, derived from the intensity FWHM.
    double pump_waist() const;
    /// Pump phase acquired through the Kerr effect at `pump_power`.
    double kerr_phase() const { return kerr_coeff * pump_power; }

    /// Throws Error describing the first violated constraint.
    void validate() const;
};

/// Keys understood by the config parser, in canonical output order.
std::vector<std::string> config_keys();

/// Parses `key = value` text. '#' starts a comment. Unknown keys and malformed
/// values raise Error naming the key and the 1-based line number.
SourceConfig parse_config(std::string_view text, std::string_view origin = "<config>");
SourceConfig load_config(const std::filesystem::path& path);

/// Serializes every key with round-trip precision.
std::string format_config(const SourceConfig& config);

}  // namespace pdcmodes

#endif

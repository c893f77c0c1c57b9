#include "pdcmodes/config.hpp"

#include "pdcmodes/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <variant>

namespace pdcmodes {

namespace {

using Field = std::variant<double SourceConfig::*, int SourceConfig::*>;

struct KeySpec {
    const char* name;
    Field field;
};

constexpr KeySpec kKeys[] = {
    {"pump_wavelength", &SourceConfig::pump_wavelength},
    {"detect_wavelength", &SourceConfig::detect_wavelength},
    {"crystal_length", &SourceConfig::crystal_length},
    {"gap_distance", &SourceConfig::gap_distance},
    {"pump_fwhm", &SourceConfig::pump_fwhm},
    {"pi_distance", &SourceConfig::pi_distance},
    {"gain", &SourceConfig::gain},
    {"kerr_coeff", &SourceConfig::kerr_coeff},
    {"pump_power", &SourceConfig::pump_power},
    {"collinear_mismatch", &SourceConfig::collinear_mismatch},
    {"l_max", &SourceConfig::l_max},
    {"p_max", &SourceConfig::p_max},
    {"n_theta", &SourceConfig::n_theta},
    {"n_phi", &SourceConfig::n_phi},
    {"focal_length", &SourceConfig::focal_length},
    {"n_freq", &SourceConfig::n_freq},
    {"read_noise", &SourceConfig::read_noise},
    {"full_well", &SourceConfig::full_well},
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string where(std::string_view origin, int line) {
    return std::string(origin) + ":" + std::to_string(line);
}

}  // namespace

double SourceConfig::detect_wavenumber() const {
    return 2.0 * std::numbers::pi / detect_wavelength;
}

double SourceConfig::pump_waist() const {
    return pump_fwhm / std::sqrt(2.0 * std::numbers::ln2);
}

void SourceConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(std::string("invalid config: ") + what);
    };
    require(pump_wavelength > 0, "pump_wavelength must be > 0");
    require(detect_wavelength > 0, "detect_wavelength must be > 0");
    require(crystal_length > 0, "crystal_length must be > 0");
    require(gap_distance > 0, "gap_distance must be > 0");
    require(pump_fwhm > 0, "pump_fwhm must be > 0");
    require(pi_distance > 0, "pi_distance must be > 0");
    require(focal_length > 0, "focal_length must be > 0");
    require(gain >= 0, "gain must be >= 0");
    require(pump_power >= 0, "pump_power must be >= 0");
    require(std::abs(detect_wavelength - 2.0 * pump_wavelength) <= 20e-9,
            "detect_wavelength must lie within 20 nm of twice pump_wavelength");
    require(l_max >= 0, "l_max must be >= 0");
    require(p_max >= 1, "p_max must be >= 1");
    require(n_theta >= 16, "n_theta must be >= 16");
    require(n_phi >= 16, "n_phi must be >= 16");
    require(n_phi > 2 * l_max, "n_phi must exceed 2*l_max");
    require(n_freq >= 1, "n_freq must be >= 1");
    require(read_noise >= 0, "read_noise must be >= 0");
    require(full_well >= 0, "full_well must be >= 0");
    require(std::isfinite(kerr_coeff) && std::isfinite(collinear_mismatch),
            "kerr_coeff and collinear_mismatch must be finite");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& k : kKeys) keys.emplace_back(k.name);
    return keys;
}

SourceConfig parse_config(std::string_view text, std::string_view origin) {
    SourceConfig config;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line = raw;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(where(origin, line_no) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));

        const KeySpec* spec = nullptr;
        for (const auto& k : kKeys)
            if (key == k.name) spec = &k;
        if (!spec)
            throw Error(where(origin, line_no) + ": unknown key '" + std::string(key) + "'");

        const char* begin = value.data();
        const char* end = value.data() + value.size();
        std::visit(
            [&](auto member) {
                using T = std::remove_reference_t<decltype(config.*member)>;
                T parsed{};
                auto [ptr, ec] = std::from_chars(begin, end, parsed);
                if (ec != std::errc() || ptr != end || value.empty())
                    throw Error(where(origin, line_no) + ": bad value '" + std::string(value) +
                                "' for key '" + std::string(key) + "'");
                config.*member = parsed;
            },
            spec->field);
    }
    config.validate();
    return config;
}

SourceConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str(), path.string());
}

std::string format_config(const SourceConfig& config) {
    std::string out;
    char buf[64];
    for (const auto& k : kKeys) {
        std::visit(
            [&](auto member) {
                if constexpr (std::is_same_v<decltype(member), double SourceConfig::*>)
                    std::snprintf(buf, sizeof buf, "%.17g", config.*member);
                else
                    std::snprintf(buf, sizeof buf, "%d", config.*member);
            },
            k.field);
        out += k.name;
        out += " = ";
        out += buf;
        out += '\n';
    }
    return out;
}

}  // namespace pdcmodes

#include "pdcmodes/scans.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/io.hpp"
#include "pdcmodes/parallel.hpp"
#include "pdcmodes/tpa.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace pdcmodes {

namespace {

double log_sinh_sq(double x) {
    if (x > 20.0) return 2.0 * x + 2.0 * std::log1p(-std::exp(-2.0 * x)) - std::log(4.0);
    return 2.0 * std::log(std::sinh(x));
}

std::vector<std::pair<double, double>> sorted(std::span<const std::pair<double, double>> data) {
    std::vector<std::pair<double, double>> out(data.begin(), data.end());
    std::sort(out.begin(), out.end());
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].first == out[i - 1].first) throw Error("duplicate power values");
    return out;
}

template <typename F>
double golden_section(F&& f, double lo, double hi, int iterations = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iterations && b - a > 1e-14 * (std::abs(a) + std::abs(b)); ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

double GainLaw::gain(double power) const {
    if (power < 0) throw Error("pump power must be >= 0");
    return c * std::sqrt(power);
}

GainLaw gain_law(const SourceConfig& config) {
    if (!(config.pump_power > 0)) throw Error("gain law needs pump_power > 0");
    GainLaw law;
    law.c = config.gain / std::sqrt(config.pump_power);
    return law;
}

GainLaw calibrate_gain(std::span<const std::pair<double, double>> power_intensity) {
    if (power_intensity.size() < 3) throw Error("calibrate_gain needs at least 3 points");
    const auto data = sorted(power_intensity);
    for (const auto& [p, i] : data)
        if (!(p > 0) || !(i > 0)) throw Error("calibrate_gain needs P > 0 and I > 0");
    for (std::size_t k = 1; k < data.size(); ++k)
        if (!(data[k].second > data[k - 1].second))
            throw Error("calibrate_gain: intensity does not increase with power");

    const auto n = static_cast<double>(data.size());
    auto fit = [&](double c, double* log_a) {
        double offset = 0;
        for (const auto& [p, i] : data) offset += std::log(i) - log_sinh_sq(c * std::sqrt(p));
        offset /= n;
        double cost = 0;
        for (const auto& [p, i] : data) {
            const double r = std::log(i) - offset - log_sinh_sq(c * std::sqrt(p));
            cost += r * r;
        }
        if (log_a) *log_a = offset;
        return cost;
    };

    // Bracket over mode gains c sqrt(P_max) from 1e-3 to 60, then refine.
    const double root_max = std::sqrt(data.back().first);
    const double lo = 1e-3 / root_max, hi = 60.0 / root_max;
    constexpr int kGrid = 600;
    int best = 0;
    double best_cost = fit(lo, nullptr);
    std::vector<double> cs(kGrid + 1);
    for (int k = 0; k <= kGrid; ++k) {
        cs[k] = lo * std::pow(hi / lo, static_cast<double>(k) / kGrid);
        const double cost = fit(cs[k], nullptr);
        if (cost < best_cost) {
            best_cost = cost;
            best = k;
        }
    }
    const double a = cs[std::max(best - 1, 0)];
    const double b = cs[std::min(best + 1, kGrid)];
    GainLaw law;
    law.c = golden_section([&](double c) { return fit(c, nullptr); }, a, b);
    double log_a = 0;
    law.residual = std::sqrt(fit(law.c, &log_a) / n);
    law.amplitude = std::exp(log_a);
    return law;
}

KerrCalibration kerr_calibration(std::span<const std::pair<double, double>> power_distance,
                                 double pi_distance) {
    if (power_distance.size() < 2) throw Error("kerr_calibration needs at least 2 observations");
    if (!(pi_distance > 0)) throw Error("kerr_calibration needs L_pi > 0");
    const auto data = sorted(power_distance);
    for (std::size_t k = 1; k < data.size(); ++k)
        if (data[k].second > data[k - 1].second)
            throw Error("kerr_calibration: destructive distance grows with power (non-monotone data)");

    const auto n = static_cast<double>(data.size());
    double sp = 0, sf = 0, spp = 0, spf = 0;
    std::vector<double> phase;
    for (const auto& [p, l] : data) {
        const double f = std::numbers::pi * (pi_distance - l) / pi_distance;
        phase.push_back(f);
        sp += p;
        sf += f;
        spp += p * p;
        spf += p * f;
    }
    const double denom = n * spp - sp * sp;
    if (!(denom > 0)) throw Error("kerr_calibration needs distinct powers");
    KerrCalibration out;
    out.kappa = (n * spf - sp * sf) / denom;
    out.intercept = (sf - out.kappa * sp) / n;
    double ss = 0;
    for (std::size_t k = 0; k < data.size(); ++k) {
        const double r = phase[k] - out.intercept - out.kappa * data[k].first;
        ss += r * r;
    }
    out.residual = std::sqrt(ss / n);
    return out;
}

double collinear_emission(const SourceConfig& config) {
    return std::norm(TwoPhotonAmplitude(config).at(0.0, 0.0, 1.0));
}

double collinear_minimum_distance(const SourceConfig& config) {
    const double span = 2.0 * config.pi_distance;
    auto emission = [&](double gap) {
        SourceConfig c = config;
        c.gap_distance = gap;
        return collinear_emission(c);
    };
    constexpr int kGrid = 720;
    int best = 1;
    double best_value = emission(span / kGrid);
    for (int k = 1; k < kGrid; ++k) {
        const double v = emission(span * k / kGrid);
        if (v < best_value) {
            best_value = v;
            best = k;
        }
    }
    return golden_section(emission, span * (best - 1) / kGrid, span * (best + 1) / kGrid);
}

ScanPoint scan_point(const ModeAnalysis& analysis, double value) {
    ScanPoint point;
    point.value = value;
    point.G0 = analysis.spectrum.G0;
    point.kerr_phase = analysis.config.kerr_phase();
    point.K = analysis.counts.K;
    point.K_oam = analysis.counts.K_oam;
    const auto mean = mean_intensity(analysis.decomposition, analysis.spectrum, analysis.grid);
    const double peak = *std::max_element(mean.radial.begin(), mean.radial.end());
    point.collinear_intensity = peak > 0 ? mean.radial.front() / peak : 0.0;
    const auto lm = analysis.spectrum.l_marginal();
    const int l_max = analysis.spectrum.l_max;
    for (int l = 0; l <= l_max; ++l) point.l_weights.push_back(lm[l + l_max]);
    point.p_weights = analysis.spectrum.p_marginal();
    point.spectrum = analysis.spectrum;
    return point;
}

namespace {

void check_values(std::span<const double> values, const char* what) {
    if (values.empty()) throw Error(std::string("empty ") + what + " range");
    for (std::size_t i = 1; i < values.size(); ++i)
        if (!(values[i] > values[i - 1]))
            throw Error(std::string(what) + " values must be strictly increasing");
}

ScanResult run_scan(const std::string& variable, const SourceConfig& config,
                    const std::vector<SourceConfig>& configs, std::span<const double> values,
                    int threads) {
    ScanResult result;
    result.variable = variable;
    result.config = config;
    result.points.resize(configs.size());
    parallel_for(configs.size(), threads, [&](std::size_t i) {
        result.points[i] = scan_point(analyze(configs[i], 1), values[i]);
    });
    return result;
}

}  // namespace

ScanResult scan_power(const SourceConfig& config, std::span<const double> powers,
                      const GainLaw& law, int threads) {
    check_values(powers, "power");
    std::vector<SourceConfig> configs;
    for (double p : powers) {
        if (!(p > 0)) throw Error("scan powers must be > 0");
        SourceConfig c = config;
        c.pump_power = p;
        c.gain = law.gain(p);
        configs.push_back(c);
    }
    return run_scan("pump_power", config, configs, powers, threads);
}

ScanResult scan_power(const SourceConfig& config, std::span<const double> powers, int threads) {
    return scan_power(config, powers, gain_law(config), threads);
}

ScanResult scan_distance(const SourceConfig& config, std::span<const double> distances,
                         int threads) {
    check_values(distances, "distance");
    std::vector<SourceConfig> configs;
    for (double d : distances) {
        if (d < 7e-3 - 1e-12 || d > 27e-3 + 1e-12)
            throw Error("scan distances must lie within 7..27 mm");
        SourceConfig c = config;
        c.gap_distance = d;
        configs.push_back(c);
    }
    return run_scan("gap_distance", config, configs, distances, threads);
}

void write_scan_csv(const std::filesystem::path& path, const ScanResult& result) {
    std::vector<std::string> header{result.variable, "G0", "kerr_phase", "K", "K_oam",
                                    "collinear_intensity"};
    const std::size_t n_l = result.points.empty() ? 0 : result.points.front().l_weights.size();
    const std::size_t n_p = result.points.empty() ? 0 : result.points.front().p_weights.size();
    for (std::size_t l = 0; l < n_l; ++l) header.push_back("Lambda_l" + std::to_string(l));
    for (std::size_t p = 0; p < n_p; ++p) header.push_back("Lambda_p" + std::to_string(p));
    CsvWriter csv(path, header);
    for (const auto& pt : result.points) {
        csv.cell(pt.value).cell(pt.G0).cell(pt.kerr_phase).cell(pt.K).cell(pt.K_oam).cell(
            pt.collinear_intensity);
        for (double w : pt.l_weights) csv.cell(w);
        for (double w : pt.p_weights) csv.cell(w);
        csv.end_row();
    }
}

void write_scan(const std::filesystem::path& dir, const ScanResult& result) {
    std::filesystem::create_directories(dir);
    write_scan_csv(dir / "scan.csv", result);
    for (std::size_t i = 0; i < result.points.size(); ++i) {
        const auto& pt = result.points[i];
        char name[16];
        std::snprintf(name, sizeof name, "%03zu", i);
        const auto point_dir = dir / "points" / name;
        std::filesystem::create_directories(point_dir);
        CsvWriter csv(point_dir / "weights.csv", {result.variable, "l", "p", "Lambda", "mode_gain"});
        const auto& s = pt.spectrum;
        for (int l = -s.l_max; l <= s.l_max; ++l)
            for (int p = 0; p < s.p_max; ++p)
                csv.cell(pt.value).cell(l).cell(p).cell(s.weight(l, p)).cell(s.mode_gain(l, p)).end_row();
    }
}

}  // namespace pdcmodes

#include "pdcmodes/tpa.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace pdcmodes {

namespace {

double sinc(double x) { return std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

}  // namespace

TwoPhotonAmplitude::TwoPhotonAmplitude(const SourceConfig& config)
    : k_(config.detect_wavenumber()),
      crystal_length_(config.crystal_length),
      waist_sq_(config.pump_waist() * config.pump_waist()),
      mismatch_(config.collinear_mismatch),
      phase_offset_(std::numbers::pi * config.gap_distance / config.pi_distance +
                    config.kerr_phase()),
      free_space_(config.gap_distance / (2.0 * config.detect_wavenumber())) {}

double TwoPhotonAmplitude::pump_envelope(double sum_q_sq) const {
    return std::exp(-0.25 * sum_q_sq * waist_sq_);
}

double TwoPhotonAmplitude::interference_phase(double theta_s, double theta_i,
                                              double cos_dphi) const {
    const double qs = k_ * theta_s;
    const double qi = k_ * theta_i;
    const double radial = qs * qs + qi * qi;
    const double diff_sq = radial - 2.0 * qs * qi * cos_dphi;
    return diff_sq / (4.0 * k_) * crystal_length_ + phase_offset_ - radial * free_space_;
}

cplx TwoPhotonAmplitude::at(double theta_s, double theta_i, double cos_dphi) const {
    const double qs = k_ * theta_s;
    const double qi = k_ * theta_i;
    const double radial = qs * qs + qi * qi;
    const double cross = 2.0 * qs * qi * cos_dphi;
    const double mismatch = (radial - cross) / (4.0 * k_) + mismatch_;
    const double half = 0.5 * mismatch * crystal_length_;
    const double psi =
        (mismatch - mismatch_) * crystal_length_ + phase_offset_ - radial * free_space_;
    // (1 + e^{i psi}) / 2 = cos(psi/2) e^{i psi/2}
    const double magnitude = pump_envelope(radial + cross) * sinc(half) * std::cos(0.5 * psi);
    return std::polar(magnitude, half + 0.5 * psi);
}

cplx TwoPhotonAmplitude::operator()(double theta_s, double phi_s, double theta_i,
                                    double phi_i) const {
    return at(theta_s, theta_i, std::cos(phi_s - phi_i));
}

cplx tpa_pointwise(const SourceConfig& config, double theta_s, double phi_s, double theta_i,
                   double phi_i) {
    return TwoPhotonAmplitude(config)(theta_s, phi_s, theta_i, phi_i);
}

double collinear_phase(const SourceConfig& config) {
    return TwoPhotonAmplitude(config).interference_phase(0, 0, 1);
}

std::vector<RadialKernel> radial_kernels(const SourceConfig& config, const PolarGrid& grid,
                                         int l_max, int threads) {
    if (l_max < 0) throw Error("radial_kernels: l_max must be >= 0");
    const int n = static_cast<int>(grid.n_theta());
    const int n_phi = static_cast<int>(grid.n_phi());
    if (n_phi <= 2 * l_max) throw Error("radial_kernels: n_phi must exceed 2*l_max");

    const TwoPhotonAmplitude amplitude(config);
    const int half = n_phi / 2;
    const bool even = n_phi % 2 == 0;

    // F is even in dphi, so only nodes in [0, pi] are evaluated and the DFT
    // reduces to a cosine sum with multiplicities. The midpoints between nodes
    // give the doubled-node estimate used for the convergence diagnostic.
    const int n_mid = (n_phi + 1) / 2;
    std::vector<double> cos_node(half + 1), cos_mid(n_mid);
    std::vector<double> mult_node(half + 1, 2.0), mult_mid(n_mid, 2.0);
    for (int m = 0; m <= half; ++m) cos_node[m] = std::cos(m * grid.dphi);
    for (int m = 0; m < n_mid; ++m) cos_mid[m] = std::cos((m + 0.5) * grid.dphi);
    mult_node[0] = 1.0;
    if (even) mult_node[half] = 1.0;
    else mult_mid[n_mid - 1] = 1.0;
    std::vector<double> node_table((l_max + 1) * (half + 1));
    std::vector<double> mid_table((l_max + 1) * n_mid);
    for (int l = 0; l <= l_max; ++l) {
        for (int m = 0; m <= half; ++m)
            node_table[l * (half + 1) + m] = std::cos(l * m * grid.dphi) * mult_node[m];
        for (int m = 0; m < n_mid; ++m)
            mid_table[l * n_mid + m] = std::cos(l * (m + 0.5) * grid.dphi) * mult_mid[m];
    }

    std::vector<RadialKernel> kernels(l_max + 1);
    for (int l = 0; l <= l_max; ++l) {
        kernels[l].l = l;
        kernels[l].values.resize(n, n);
    }
    std::vector<std::vector<double>> row_diff(n, std::vector<double>(l_max + 1, 0.0));

    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t row) {
        const int i = static_cast<int>(row);
        std::vector<cplx> at_node(half + 1), at_mid(n_mid);
        for (int j = i; j < n; ++j) {
            for (int m = 0; m <= half; ++m)
                at_node[m] = amplitude.at(grid.theta[i], grid.theta[j], cos_node[m]);
            for (int m = 0; m < n_mid; ++m)
                at_mid[m] = amplitude.at(grid.theta[i], grid.theta[j], cos_mid[m]);
            const double measure = std::sqrt(grid.theta[i] * grid.theta[j]);
            for (int l = 0; l <= l_max; ++l) {
                const double* c = &node_table[l * (half + 1)];
                const double* d = &mid_table[l * n_mid];
                cplx base = 0;
                cplx mid = 0;
                for (int m = 0; m <= half; ++m) base += at_node[m] * c[m];
                for (int m = 0; m < n_mid; ++m) mid += at_mid[m] * d[m];
                const double scale = ((l % 2 == 0) ? 1.0 : -1.0) * measure / n_phi;
                const cplx value = base * scale;
                const cplx doubled = 0.5 * (base + mid) * scale;
                kernels[l].values(i, j) = value;
                kernels[l].values(j, i) = value;
                row_diff[i][l] = std::max(row_diff[i][l], std::abs(value - doubled));
            }
        }
    });

    for (int l = 0; l <= l_max; ++l) {
        double diff = 0;
        for (int i = 0; i < n; ++i) diff = std::max(diff, row_diff[i][l]);
        const double scale = kernels[l].values.cwiseAbs().maxCoeff();
        kernels[l].quadrature_change = scale > 0 ? diff / scale : 0.0;
        if (kernels[l].quadrature_change > 1e-6) {
            std::ostringstream msg;
            msg << "azimuthal quadrature for l=" << l << " changes by "
                << kernels[l].quadrature_change << " relative when doubling n_phi";
            warn(msg.str());
        }
    }
    return kernels;
}

RadialKernel radial_kernel(const SourceConfig& config, const PolarGrid& grid, int l) {
    const int al = std::abs(l);
    auto kernels = radial_kernels(config, grid, al, 1);
    RadialKernel kernel = std::move(kernels[al]);
    kernel.l = l;
    return kernel;
}

}  // namespace pdcmodes

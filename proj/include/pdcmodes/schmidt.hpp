#ifndef PDCMODES_SCHMIDT_HPP
#define PDCMODES_SCHMIDT_HPP

#include "pdcmodes/grid.hpp"
#include "pdcmodes/tpa.hpp"

#include <Eigen/Core>

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace pdcmodes {

/// One Schmidt mode u_lp(theta, phi) = i^l * profile(theta) / sqrt(theta) * exp(i l phi).
struct SchmidtMode {
    int l = 0;
    int p = 0;
    double lambda = 0;          ///< globally normalized low-gain weight
    double singular_value = 0;  ///< continuum singular value of the kernel F_l
    /// Radial profile on the grid's theta nodes; sum |u|^2 dtheta = 1 and the
    /// entry of largest modulus is real and positive.
    Eigen::VectorXcd profile;
    /// Phase e^{i beta} with F_l ~ sum_p singular_value * e^{i beta} u_p u_p^T.
    cplx takagi_phase{1.0, 0.0};

    /// OAM phase factor i^l carried by the mode.
    cplx oam_phase() const;
};

class SchmidtDecomposition {
public:
    SchmidtDecomposition() = default;
    SchmidtDecomposition(PolarGrid grid, int l_max, int p_max, std::vector<SchmidtMode> modes);

    const PolarGrid& grid() const { return grid_; }
    int l_max() const { return l_max_; }
    int p_max() const { return p_max_; }
    std::size_t size() const { return modes_.size(); }

    /// Flat index of (l, p); modes are stored l-major from -l_max to l_max.
    std::size_t index(int l, int p) const;
    const SchmidtMode& mode(int l, int p) const { return modes_[index(l, p)]; }
    const std::vector<SchmidtMode>& modes() const { return modes_; }
    double lambda(int l, int p) const { return mode(l, p).lambda; }
    double lambda_max() const;
    /// Low-gain Schmidt number 1 / sum lambda^2.
    double schmidt_number() const;

private:
    PolarGrid grid_;
    int l_max_ = 0;
    int p_max_ = 0;
    std::vector<SchmidtMode> modes_;
};

/// Per-l SVD of the radial kernels. `kernels` must contain every |l| in
/// 0..l_max at least once (negative l entries are accepted and treated as the
/// |l| kernel). Squared singular values of all signed l are pooled and
/// normalized to unit sum. Throws Error on non-finite kernel entries.
SchmidtDecomposition decompose(std::span<const RadialKernel> kernels, const PolarGrid& grid,
                               int p_max, int threads = 0);

/// Mode weights after high-gain redistribution,
/// Lambda_lp ∝ sinh^2(G sqrt(lambda_lp)) with G = G0 / sqrt(lambda_max).
struct GainedSpectrum {
    int l_max = 0;
    int p_max = 0;
    double G0 = 0;
    double G = 0;
    std::vector<double> weights;     ///< same indexing as SchmidtDecomposition
    std::vector<double> mode_gains;  ///< squeezing parameters G sqrt(lambda_lp)

    std::size_t index(int l, int p) const {
        return static_cast<std::size_t>((l + l_max) * p_max + p);
    }
    double weight(int l, int p) const { return weights[index(l, p)]; }
    double mode_gain(int l, int p) const { return mode_gains[index(l, p)]; }
    /// Lambda_l = sum_p Lambda_lp, indexed by l + l_max.
    std::vector<double> l_marginal() const;
    /// Lambda_p = sum_l Lambda_lp, indexed by p.
    std::vector<double> p_marginal() const;
};

GainedSpectrum redistribute(const SchmidtDecomposition& dec, double G0);

struct ModeCounts {
    double K = 1;
    double K_oam = 1;
};

ModeCounts mode_counts(const GainedSpectrum& spectrum);

/// Inverse participation ratio 1 / sum w^2 of a normalized weight vector.
double participation_number(std::span<const double> weights);

/// Ensemble-mean far-field intensity I(theta, phi) = sum Lambda_lp |u_lp|^2 / theta,
/// normalized to unit integral over theta dtheta dphi.
struct MeanIntensity {
    std::vector<double> radial;  ///< I(theta_j), independent of phi
    Eigen::MatrixXd field;       ///< n_theta x n_phi
};

MeanIntensity mean_intensity(const SchmidtDecomposition& dec, const GainedSpectrum& spectrum,
                             const PolarGrid& grid);

/// Number of local maxima of a radial profile exceeding `fraction` of its peak.
int count_rings(std::span<const double> radial, double fraction = 0.05);

}  // namespace pdcmodes

#endif

#ifndef PDCMODES_RECONSTRUCT_HPP
#define PDCMODES_RECONSTRUCT_HPP

#include "pdcmodes/grid.hpp"
#include "pdcmodes/synthesis.hpp"

#include <Eigen/Core>

#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdcmodes {

inline constexpr double kDefaultSectorHalfAngle = 4.5 * std::numbers::pi / 180.0;
inline constexpr double kDefaultAnnulusHalfWidth = 1.1e-3;

/// Signed polar coordinate of the radial sector spectra: -theta_{n-1} .. -theta_0,
/// then theta_0 .. theta_{n-1}.
std::vector<double> signed_theta(const PolarGrid& grid);

/// S(theta) = sum over the sector of I * theta * dphi. Positive theta uses the
/// sector around phi = 0, negative theta the sector around phi = pi.
Eigen::VectorXd radial_sector_reduce(const Frame& frame, const PolarGrid& grid,
                                     double half_angle = kDefaultSectorHalfAngle);

/// S(phi) = sum over the annulus |theta - theta_center| <= half_width of
/// I * theta * dtheta.
Eigen::VectorXd azimuth_annulus_reduce(const Frame& frame, const PolarGrid& grid,
                                       double theta_center,
                                       double half_width = kDefaultAnnulusHalfWidth);

/// Azimuthally averaged intensity I(theta) of one frame.
Eigen::VectorXd radial_profile(const Frame& frame, const PolarGrid& grid);

struct CovarianceMatrix {
    std::string coordinate;  ///< "theta" or "phi"
    std::vector<double> coords;
    Eigen::MatrixXd values;
    Eigen::VectorXd mean;
    std::size_t count = 0;
};

/// Streaming unbiased covariance (divisor n - 1). Updates use Welford's
/// recurrence; partial accumulators combine exactly with merge().
class CovarianceAccumulator {
public:
    explicit CovarianceAccumulator(Eigen::Index dim = 0);

    void add(const Eigen::VectorXd& sample);
    void merge(const CovarianceAccumulator& other);
    std::size_t count() const { return count_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    /// Throws Error for fewer than two samples.
    Eigen::MatrixXd covariance() const;

private:
    std::size_t count_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd comoment_;
};

/// Sample covariance of the given per-frame vectors.
CovarianceMatrix covariance(std::span<const Eigen::VectorXd> samples, std::string coordinate = {},
                            std::vector<double> coords = {});
CovarianceMatrix to_covariance_matrix(const CovarianceAccumulator& acc, std::string coordinate,
                                      std::vector<double> coords);

/// Sums of |entries| over the same-sign (auto) and opposite-sign (cross)
/// quadrants of a signed-theta covariance.
struct QuadrantMass {
    double auto_mass = 0;
    double cross_mass = 0;
};
QuadrantMass quadrant_mass(const CovarianceMatrix& cov);

struct RadialModes {
    std::vector<double> weights;  ///< Lambda_p, normalized over the recovered modes
    std::vector<double> singular_values;
    /// Profiles on the positive theta nodes, sum |u|^2 dtheta = 1, real and
    /// positive at the entry of largest modulus. Zero outside the support.
    Eigen::MatrixXd profiles;
    std::vector<double> theta;
    std::vector<int> support;  ///< theta nodes entering the decomposition
    double clipped_fraction = 0;
};

struct RadialModeOptions {
    int p_rec = 3;
    /// theta nodes whose mean sector signal is below this fraction of the peak
    /// are excluded from the decomposition.
    double support_fraction = 0.02;
    /// Use the cross-correlation quadrant instead of the auto-correlation one.
    bool use_cross = false;
};

/// Elementwise square root of the clipped auto block, then SVD. Warns when
/// the clipped negative mass exceeds 5% of the block's absolute mass.
RadialModes radial_modes_from_cov(const CovarianceMatrix& cov, double dtheta,
                                  const RadialModeOptions& options = {});

/// C(dphi) = mean over all (phi, phi') with phi - phi' = dphi (circular).
struct AzimuthProfile {
    std::vector<double> dphi;
    std::vector<double> values;
};
AzimuthProfile dphi_average(const CovarianceMatrix& cov);

struct OAMSpectrum {
    int l_fit = 0;
    std::vector<double> weights;  ///< Lambda_l for l = 0..l_fit, sum over signed l is 1
    double background = 0;        ///< in units of the fitted profile
    double amplitude = 0;         ///< (sum over signed l of the raw weights)^2
    double residual = 0;          ///< rms residual of the fit
    double K_oam = 1;
    int iterations = 0;

    double weight(int l) const;
};

/// Model for the fit: C(dphi) = [sum_{l=-L..L} w_l e^{il dphi}]^2 + b with
/// w_l = w_{-l} >= 0 and b <= 0. Projected Levenberg-Marquardt, initialized
/// from the cosine transform of sqrt(C - min C).
OAMSpectrum fit_oam_weights(const AzimuthProfile& profile, int l_fit, int max_iterations = 2000);

/// Evaluates the fit model (unnormalized weights) at the given offsets.
std::vector<double> oam_model(std::span<const double> raw_weights, double background,
                              std::span<const double> dphi);

struct G2Estimate {
    double g2 = 0;
    double standard_error = 0;
    std::optional<double> K;  ///< empty when g2 - 1 is not resolved above noise
    std::size_t samples = 0;
};

G2Estimate g2_and_K(std::span<const double> intensities);

/// Replays a frame sequence; may be invoked more than once.
using FrameVisitor = std::function<void(const Frame&)>;
using FrameSource = std::function<void(const FrameVisitor&)>;

struct RadialReconstruction {
    CovarianceMatrix cov;
    RadialModes modes;
};

struct OAMReconstruction {
    double theta_center = 0;
    CovarianceMatrix cov;
    AzimuthProfile profile;
    OAMSpectrum spectrum;
};

struct StackAnalysis {
    Eigen::VectorXd mean_radial;  ///< azimuthally averaged mean intensity
    std::vector<double> totals;   ///< per-frame integrated intensity
    RadialReconstruction radial;
    OAMReconstruction oam;
    G2Estimate g2;
};

struct StackAnalysisOptions {
    double sector_half_angle = kDefaultSectorHalfAngle;
    double annulus_half_width = kDefaultAnnulusHalfWidth;
    /// Annulus centre; by default the peak of the mean radial intensity.
    std::optional<double> theta_center;
    RadialModeOptions radial;
    int l_fit = 3;
};

/// Two passes over the frames: mean intensity first, then the radial and
/// azimuthal covariances.
StackAnalysis analyze_stack(const FrameSource& source, const PolarGrid& grid,
                            const StackAnalysisOptions& options = {});

FrameSource frames_of(const FrameStack& stack);

}  // namespace pdcmodes

#endif

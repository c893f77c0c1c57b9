#ifndef PDCMODES_SYNTHESIS_HPP
#define PDCMODES_SYNTHESIS_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/grid.hpp"
#include "pdcmodes/pipeline.hpp"
#include "pdcmodes/schmidt.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <random>
#include <string_view>
#include <vector>

namespace pdcmodes {

/// degenerate: signal and idler both reach the camera. signal_only: a
/// filter removes the idler and with it the signal-idler correlations.
enum class DetectionMode { degenerate, signal_only };

std::string_view to_string(DetectionMode mode);
DetectionMode parse_detection_mode(std::string_view text);

using Rng = std::mt19937_64;

/// Independent generator for shot `index` of a run seeded with `seed`.
Rng frame_rng(std::uint64_t seed, std::uint64_t index);

/// Mode amplitudes of one shot. Entries are replica-major: replica r, mode i
/// (SchmidtDecomposition indexing) sits at r * n_modes + i.
struct ModeAmplitudes {
    std::size_t n_modes = 0;
    int n_freq = 1;
    std::vector<cplx> signal;
    std::vector<cplx> idler;
};

/// Draws c = cosh(g) a + sinh(g) b*, d = cosh(g) b + sinh(g) a* per mode from
/// vacuum amplitudes a, b with E|a|^2 = 1/2. Replicas r >= 1 model extra
/// frequency modes whose idler partner is not detected: their idler comes
/// from an independent draw.
ModeAmplitudes sample_amplitudes(const GainedSpectrum& spectrum, int n_freq, Rng& rng);

/// One camera shot on the polar grid. Pixels are theta-major
/// (pixel (j, k) at j * n_phi + k).
struct Frame {
    std::size_t index = 0;
    bool normalized = false;
    std::vector<float> pixels;
    /// Realized photon numbers |c_lp|^2 - 1/2 averaged over replicas.
    std::vector<float> photon_numbers;

    float at(std::size_t j, std::size_t k, std::size_t n_phi) const { return pixels[j * n_phi + k]; }
};

/// Integral of a frame over theta dtheta dphi.
double frame_integral(const Frame& frame, const PolarGrid& grid);

struct RenderOptions {
    DetectionMode mode = DetectionMode::degenerate;
    int n_freq = 1;
    double read_noise = 0;  ///< fraction of the mean peak intensity
    double full_well = 0;   ///< fraction of the mean peak intensity, 0 disables
    bool normalize = false;
};

/// Renders shots from sampled amplitudes. The signal field is
/// E_s = sum c_lp u_lp with u_lp = i^l profile e^{il phi} / sqrt(2 pi theta);
/// the idler uses e^{-il phi} and the Takagi phase of the mode. Intensities
/// are vacuum-subtracted, clipped at zero and scaled so that the ensemble mean
/// of the signal beam integrates to one.
class FrameRenderer {
public:
    FrameRenderer(const SchmidtDecomposition& dec, const GainedSpectrum& spectrum,
                  RenderOptions options);

    const PolarGrid& grid() const { return grid_; }
    const RenderOptions& options() const { return options_; }
    const GainedSpectrum& spectrum() const { return spectrum_; }
    /// Peak of the ensemble-mean signal intensity in frame units.
    double mean_peak() const { return mean_peak_; }

    Frame render(const ModeAmplitudes& amplitudes, Rng& noise_rng, std::size_t index = 0) const;
    /// Samples and renders shot `index` of a run seeded with `seed`.
    Frame shot(std::uint64_t seed, std::size_t index) const;

private:
    PolarGrid grid_;
    GainedSpectrum spectrum_;
    RenderOptions options_;
    int l_max_ = 0;
    Eigen::MatrixXcd radial_;     ///< n_theta x n_modes, profile / sqrt(2 pi theta)
    std::vector<int> l_column_;   ///< l + l_max per mode
    std::vector<cplx> oam_;       ///< i^l per mode
    std::vector<cplx> takagi_;    ///< e^{i beta} per mode
    Eigen::MatrixXcd azimuth_;    ///< (2 l_max + 1) x n_phi, e^{il phi}
    std::vector<double> vacuum_;  ///< mean vacuum intensity of one beam per theta node
    double scale_ = 1;
    double mean_peak_ = 0;
};

/// Convenience wrapper around FrameRenderer::render.
Frame render_frame(const ModeAmplitudes& amplitudes, const SchmidtDecomposition& dec,
                   const GainedSpectrum& spectrum, DetectionMode mode);

/// Everything needed to interpret a stack of frames.
struct StackInfo {
    PolarGrid grid;
    SourceConfig config;
    std::uint64_t seed = 0;
    DetectionMode mode = DetectionMode::degenerate;
    bool normalized = false;
    std::size_t n_frames = 0;
    std::size_t n_modes = 0;
};

struct FrameStack {
    StackInfo info;
    std::vector<Frame> frames;
};

using FrameSink = std::function<void(Frame&&)>;

/// Renders shots 0..n_frames-1 and hands them to `sink` in index order.
/// Output depends only on (renderer, seed), not on the thread count.
void synthesize_stream(const FrameRenderer& renderer, std::size_t n_frames, std::uint64_t seed,
                       const FrameSink& sink, int threads = 0);

RenderOptions render_options(const SourceConfig& config, DetectionMode mode, bool normalize);

StackInfo stack_info(const ModeAnalysis& analysis, std::size_t n_frames, std::uint64_t seed,
                     DetectionMode mode, bool normalize);

FrameStack synthesize_stack(const ModeAnalysis& analysis, std::size_t n_frames,
                            std::uint64_t seed, DetectionMode mode, bool normalize,
                            int threads = 0);
FrameStack synthesize_stack(const SourceConfig& config, std::size_t n_frames, std::uint64_t seed,
                            DetectionMode mode, bool normalize, int threads = 0);

}  // namespace pdcmodes

#endif

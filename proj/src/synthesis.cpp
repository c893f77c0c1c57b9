#include "pdcmodes/synthesis.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pdcmodes {

std::string_view to_string(DetectionMode mode) {
    return mode == DetectionMode::signal_only ? "signal_only" : "degenerate";
}

DetectionMode parse_detection_mode(std::string_view text) {
    if (text == "degenerate") return DetectionMode::degenerate;
    if (text == "signal_only") return DetectionMode::signal_only;
    throw Error("unknown detection mode '" + std::string(text) +
                "' (expected degenerate or signal_only)");
}

Rng frame_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      0x9e3779b9u};
    return Rng(seq);
}

namespace {

cplx vacuum(std::normal_distribution<double>& normal, Rng& rng) {
    const double re = normal(rng);
    const double im = normal(rng);
    return {re, im};
}

}  // namespace

ModeAmplitudes sample_amplitudes(const GainedSpectrum& spectrum, int n_freq, Rng& rng) {
    if (n_freq < 1) throw Error("sample_amplitudes: n_freq must be >= 1");
    ModeAmplitudes out;
    out.n_modes = spectrum.mode_gains.size();
    out.n_freq = n_freq;
    out.signal.resize(out.n_modes * n_freq);
    out.idler.resize(out.n_modes * n_freq);
    // Each real quadrature has variance 1/4 so that E|a|^2 = 1/2.
    std::normal_distribution<double> normal(0.0, 0.5);
    for (int r = 0; r < n_freq; ++r) {
        for (std::size_t i = 0; i < out.n_modes; ++i) {
            const double g = spectrum.mode_gains[i];
            const double ch = std::cosh(g);
            const double sh = std::sinh(g);
            const cplx a = vacuum(normal, rng);
            const cplx b = vacuum(normal, rng);
            const std::size_t at = r * out.n_modes + i;
            out.signal[at] = ch * a + sh * std::conj(b);
            if (r == 0) {
                out.idler[at] = ch * b + sh * std::conj(a);
            } else {
                const cplx a2 = vacuum(normal, rng);
                const cplx b2 = vacuum(normal, rng);
                out.idler[at] = ch * b2 + sh * std::conj(a2);
            }
        }
    }
    return out;
}

double frame_integral(const Frame& frame, const PolarGrid& grid) {
    const auto n_phi = grid.n_phi();
    double total = 0;
    for (std::size_t j = 0; j < grid.n_theta(); ++j) {
        double row = 0;
        for (std::size_t k = 0; k < n_phi; ++k) row += frame.pixels[j * n_phi + k];
        total += row * grid.area_weight(j);
    }
    return total;
}

FrameRenderer::FrameRenderer(const SchmidtDecomposition& dec, const GainedSpectrum& spectrum,
                             RenderOptions options)
    : grid_(dec.grid()), spectrum_(spectrum), options_(options), l_max_(dec.l_max()) {
    if (spectrum.weights.size() != dec.size() || spectrum.mode_gains.size() != dec.size())
        throw Error("FrameRenderer: spectrum does not match decomposition");
    if (options.n_freq < 1) throw Error("FrameRenderer: n_freq must be >= 1");
    if (options.read_noise < 0 || options.full_well < 0)
        throw Error("FrameRenderer: camera noise parameters must be >= 0");

    const auto n_theta = static_cast<Eigen::Index>(grid_.n_theta());
    const auto n_phi = static_cast<Eigen::Index>(grid_.n_phi());
    const auto n_modes = static_cast<Eigen::Index>(dec.size());
    radial_.resize(n_theta, n_modes);
    l_column_.resize(dec.size());
    oam_.resize(dec.size());
    takagi_.resize(dec.size());
    for (Eigen::Index i = 0; i < n_modes; ++i) {
        const auto& m = dec.modes()[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_theta; ++j)
            radial_(j, i) = m.profile(j) / std::sqrt(2.0 * std::numbers::pi * grid_.theta[j]);
        l_column_[i] = m.l + l_max_;
        oam_[i] = m.oam_phase();
        takagi_[i] = m.takagi_phase;
    }
    azimuth_.resize(2 * l_max_ + 1, n_phi);
    for (int l = -l_max_; l <= l_max_; ++l)
        for (Eigen::Index k = 0; k < n_phi; ++k)
            azimuth_(l + l_max_, k) = std::polar(1.0, l * grid_.phi[k]);

    vacuum_.assign(grid_.n_theta(), 0.0);
    std::vector<double> mean(grid_.n_theta(), 0.0);
    double photons = 0;
    for (Eigen::Index i = 0; i < n_modes; ++i) {
        const double sh = std::sinh(spectrum.mode_gains[i]);
        photons += sh * sh;
        for (Eigen::Index j = 0; j < n_theta; ++j) {
            const double density = std::norm(radial_(j, i));
            vacuum_[j] += 0.5 * density;
            mean[j] += sh * sh * density;
        }
    }
    scale_ = photons > 0 ? 1.0 / photons : 1.0;
    for (double v : mean) mean_peak_ = std::max(mean_peak_, v * scale_);
}

Frame FrameRenderer::render(const ModeAmplitudes& amplitudes, Rng& noise_rng,
                            std::size_t index) const {
    const auto n_modes = static_cast<std::size_t>(radial_.cols());
    if (amplitudes.n_modes != n_modes) throw Error("render: amplitudes do not match decomposition");
    const auto n_theta = radial_.rows();
    const auto n_phi = azimuth_.cols();
    const auto n_l = azimuth_.rows();
    const bool both = options_.mode == DetectionMode::degenerate;
    const int beams = both ? 2 : 1;

    Eigen::MatrixXd intensity = Eigen::MatrixXd::Zero(n_theta, n_phi);
    Eigen::MatrixXcd coeff(beams * n_theta, n_l);
    for (int r = 0; r < amplitudes.n_freq; ++r) {
        coeff.setZero();
        for (std::size_t i = 0; i < n_modes; ++i) {
            const std::size_t at = r * n_modes + i;
            const cplx cs = oam_[i] * amplitudes.signal[at];
            coeff.col(l_column_[i]).head(n_theta) += cs * radial_.col(static_cast<Eigen::Index>(i));
            if (both) {
                // The idler partner of signal mode (l, p) winds as e^{-il phi}.
                const cplx ci = oam_[i] * takagi_[i] * amplitudes.idler[at];
                coeff.col(2 * l_max_ - l_column_[i]).tail(n_theta) +=
                    ci * radial_.col(static_cast<Eigen::Index>(i));
            }
        }
        const Eigen::MatrixXcd field = coeff * azimuth_;
        intensity += field.topRows(n_theta).cwiseAbs2();
        if (both) intensity += field.bottomRows(n_theta).cwiseAbs2();
    }

    Frame frame;
    frame.index = index;
    frame.pixels.resize(static_cast<std::size_t>(n_theta * n_phi));
    const double inv_freq = 1.0 / amplitudes.n_freq;
    std::normal_distribution<double> noise(0.0, options_.read_noise * mean_peak_);
    const double well = options_.full_well * mean_peak_;
    for (Eigen::Index j = 0; j < n_theta; ++j) {
        const double vac = beams * vacuum_[static_cast<std::size_t>(j)];
        for (Eigen::Index k = 0; k < n_phi; ++k) {
            double v = std::max(0.0, (intensity(j, k) * inv_freq - vac) * scale_);
            if (options_.read_noise > 0) v = std::max(0.0, v + noise(noise_rng));
            if (well > 0) v = std::min(v, well);
            frame.pixels[static_cast<std::size_t>(j * n_phi + k)] = static_cast<float>(v);
        }
    }

    frame.photon_numbers.assign(n_modes, 0.0f);
    for (std::size_t i = 0; i < n_modes; ++i) {
        double n = 0;
        for (int r = 0; r < amplitudes.n_freq; ++r)
            n += std::norm(amplitudes.signal[r * n_modes + i]) - 0.5;
        frame.photon_numbers[i] = static_cast<float>(n * inv_freq);
    }

    if (options_.normalize) {
        const double total = frame_integral(frame, grid_);
        if (total > 0) {
            for (auto& p : frame.pixels) p = static_cast<float>(p / total);
            frame.normalized = true;
        }
    }
    return frame;
}

Frame FrameRenderer::shot(std::uint64_t seed, std::size_t index) const {
    Rng rng = frame_rng(seed, index);
    const auto amplitudes = sample_amplitudes(spectrum_, options_.n_freq, rng);
    return render(amplitudes, rng, index);
}

Frame render_frame(const ModeAmplitudes& amplitudes, const SchmidtDecomposition& dec,
                   const GainedSpectrum& spectrum, DetectionMode mode) {
    RenderOptions options;
    options.mode = mode;
    options.n_freq = amplitudes.n_freq;
    Rng unused(0);
    return FrameRenderer(dec, spectrum, options).render(amplitudes, unused);
}

void synthesize_stream(const FrameRenderer& renderer, std::size_t n_frames, std::uint64_t seed,
                       const FrameSink& sink, int threads) {
    if (threads <= 0) threads = default_threads();
    const std::size_t chunk = std::max<std::size_t>(8, 4 * static_cast<std::size_t>(threads));
    std::vector<Frame> batch;
    for (std::size_t start = 0; start < n_frames; start += chunk) {
        const std::size_t count = std::min(chunk, n_frames - start);
        batch.assign(count, Frame{});
        parallel_for(count, threads,
                     [&](std::size_t i) { batch[i] = renderer.shot(seed, start + i); });
        for (auto& f : batch) sink(std::move(f));
    }
}

RenderOptions render_options(const SourceConfig& config, DetectionMode mode, bool normalize) {
    RenderOptions options;
    options.mode = mode;
    options.n_freq = config.n_freq;
    options.read_noise = config.read_noise;
    options.full_well = config.full_well;
    options.normalize = normalize;
    return options;
}

StackInfo stack_info(const ModeAnalysis& analysis, std::size_t n_frames, std::uint64_t seed,
                     DetectionMode mode, bool normalize) {
    StackInfo info;
    info.grid = analysis.grid;
    info.config = analysis.config;
    info.seed = seed;
    info.mode = mode;
    info.normalized = normalize;
    info.n_frames = n_frames;
    info.n_modes = analysis.decomposition.size();
    return info;
}

FrameStack synthesize_stack(const ModeAnalysis& analysis, std::size_t n_frames,
                            std::uint64_t seed, DetectionMode mode, bool normalize,
                            int threads) {
    if (n_frames < 1) throw Error("synthesize_stack: need at least one frame");
    const FrameRenderer renderer(analysis.decomposition, analysis.spectrum,
                                 render_options(analysis.config, mode, normalize));
    FrameStack stack;
    stack.info = stack_info(analysis, n_frames, seed, mode, normalize);
    stack.frames.reserve(n_frames);
    synthesize_stream(renderer, n_frames, seed,
                      [&](Frame&& f) { stack.frames.push_back(std::move(f)); }, threads);
    return stack;
}

FrameStack synthesize_stack(const SourceConfig& config, std::size_t n_frames, std::uint64_t seed,
                            DetectionMode mode, bool normalize, int threads) {
    return synthesize_stack(analyze(config, threads), n_frames, seed, mode, normalize, threads);
}

}  // namespace pdcmodes

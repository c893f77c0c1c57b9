#include "pdcmodes/pipeline.hpp"

#include "pdcmodes/tpa.hpp"

namespace pdcmodes {

ModeAnalysis analyze_on_grid(const SourceConfig& config, const PolarGrid& grid, int threads) {
    config.validate();
    ModeAnalysis out;
    out.config = config;
    out.grid = grid;
    const auto kernels = radial_kernels(config, grid, config.l_max, threads);
    out.decomposition = decompose(kernels, grid, config.p_max, threads);
    out.spectrum = redistribute(out.decomposition, config.gain);
    out.counts = mode_counts(out.spectrum);
    return out;
}

ModeAnalysis analyze(const SourceConfig& config, int threads) {
    config.validate();
    return analyze_on_grid(config, build_grid(config), threads);
}

}  // namespace pdcmodes

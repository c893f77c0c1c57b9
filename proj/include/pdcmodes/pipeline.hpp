#ifndef PDCMODES_PIPELINE_HPP
#define PDCMODES_PIPELINE_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/grid.hpp"
#include "pdcmodes/schmidt.hpp"

namespace pdcmodes {

/// Forward model for one configuration: grid, kernels, decomposition and the
/// gain-redistributed spectrum at config.gain.
struct ModeAnalysis {
    SourceConfig config;
    PolarGrid grid;
    SchmidtDecomposition decomposition;
    GainedSpectrum spectrum;
    ModeCounts counts;
};

ModeAnalysis analyze(const SourceConfig& config, int threads = 0);

/// Same, on a caller-supplied grid (used to compare configurations on one grid).
ModeAnalysis analyze_on_grid(const SourceConfig& config, const PolarGrid& grid, int threads = 0);

}  // namespace pdcmodes

#endif

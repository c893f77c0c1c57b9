#ifndef PDCMODES_CLI_HPP
#define PDCMODES_CLI_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/pipeline.hpp"
#include "pdcmodes/reconstruct.hpp"
#include "pdcmodes/scans.hpp"
#include "pdcmodes/synthesis.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pdcmodes {

inline constexpr int kManifestVersion = 1;
inline constexpr int kCsvVersion = 1;
inline constexpr int kStackVersion = 1;

struct GlobalOptions {
    std::optional<std::filesystem::path> config_path;
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    int threads = 0;
};

/// Written as manifest.json into every output directory.
struct RunManifest {
    std::string subcommand;
    std::string config_path;  ///< empty when built-in defaults were used
    std::string output_dir;
    std::uint64_t seed = 0;
    int threads = 0;
    std::vector<std::pair<std::string, std::string>> arguments;  ///< subcommand options
    std::string config_text;             ///< resolved config, canonical form
    std::string started;                 ///< UTC, ISO 8601
    std::string finished;
};

std::string manifest_json(const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

/// Config from --config, or the built-in defaults.
SourceConfig load_run_config(const GlobalOptions& global);

/// Inclusive range from..to with the given step. Errors on an empty range.
std::vector<double> scan_range(double from, double to, double step);

/// Two numeric columns; a non-numeric first line is taken as a header.
std::vector<std::pair<double, double>> read_pairs_csv(const std::filesystem::path& path);

/// modes.csv, weights.csv, counts.csv, mean_intensity.csv/.pgm.
ModeAnalysis cmd_decompose(const GlobalOptions& global);

struct SynthesizeOptions {
    std::size_t frames = 3500;
    DetectionMode mode = DetectionMode::degenerate;
    bool normalize = false;
    std::string name = "stack.bin";
    int preview = 1;  ///< leading frames exported as PGM
};

/// Returns the stack path.
std::filesystem::path cmd_synthesize(const GlobalOptions& global, const SynthesizeOptions& options);

enum class ReconstructKind { radial, oam, g2 };
ReconstructKind parse_reconstruct_kind(std::string_view text);

struct ReconstructOptions {
    std::filesystem::path stack;
    ReconstructKind kind = ReconstructKind::radial;
    StackAnalysisOptions analysis;
};

/// radial: cov.csv, modes_rec.csv, weights_rec.csv; oam: c_dphi.csv,
/// oam_weights.csv, oam_summary.csv; g2: g2.csv.
StackAnalysis cmd_reconstruct(const GlobalOptions& global, const ReconstructOptions& options);

struct ScanOptions {
    std::string variable;  ///< "power" or "distance"
    std::vector<double> values;
};

ScanResult cmd_scan(const GlobalOptions& global, const ScanOptions& options);

struct CalibrateOptions {
    std::string kind;  ///< "gain" or "kerr"
    std::filesystem::path data;
    /// L_pi for the Kerr fit; defaults to the config's pi_distance.
    std::optional<double> pi_distance;
};

void cmd_calibrate(const GlobalOptions& global, const CalibrateOptions& options);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace pdcmodes

#endif

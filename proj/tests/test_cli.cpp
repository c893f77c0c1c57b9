#include "fixtures.hpp"

#include "pdcmodes/cli.hpp"
#include "pdcmodes/error.hpp"
#include "pdcmodes/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace pdcmodes;
using fixtures::slurp;
using fixtures::TempDir;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "pdcmodes");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

/// Coarse source written to `dir/coarse.conf`.
fs::path coarse_config(const TempDir& dir) {
    const auto path = dir / "coarse.conf";
    std::ofstream(path) << format_config(fixtures::coarse());
    return path;
}

}  // namespace

TEST(Cli, DecomposeWritesTablesAndManifest) {
    TempDir dir("decompose");
    const auto out = dir / "run";
    ASSERT_EQ(run({"--config", coarse_config(dir).string(), "--out", out.string(), "decompose"}), 0);
    for (const char* f : {"modes.csv", "weights.csv", "counts.csv", "mean_intensity.csv",
                          "mean_intensity.pgm", "manifest.json"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(slurp(out / "weights.csv").rfind("rank,l,p,lambda,Lambda,mode_gain,takagi_phase\n", 0), 0u);

    const auto m = read_manifest(out / "manifest.json");
    EXPECT_EQ(m.subcommand, "decompose");
    EXPECT_EQ(m.seed, 1u);
    EXPECT_EQ(parse_config(m.config_text, "manifest").n_theta, 64);
    EXPECT_FALSE(m.started.empty());
    const auto j = nlohmann::json::parse(slurp(out / "manifest.json"));
    EXPECT_EQ(j.at("format_versions").at("manifest").get<int>(), kManifestVersion);
}

TEST(Cli, ManifestRoundTrip) {
    RunManifest m;
    m.subcommand = "scan";
    m.config_path = "a.conf";
    m.output_dir = "out";
    m.seed = 42;
    m.threads = 3;
    m.arguments = {{"variable", "power"}, {"values", "0.02,0.03"}};
    m.config_text = "gain = 7\n";
    m.started = "2026-01-01T00:00:00Z";
    m.finished = "2026-01-01T00:00:01Z";
    TempDir dir("manifest");
    std::ofstream(dir / "m.json") << manifest_json(m);
    const auto r = read_manifest(dir / "m.json");
    EXPECT_EQ(r.subcommand, m.subcommand);
    EXPECT_EQ(r.seed, 42u);
    EXPECT_EQ(r.threads, 3);
    EXPECT_EQ(r.arguments, m.arguments);
    EXPECT_EQ(r.config_text, m.config_text);
    std::ofstream(dir / "bad.json") << "{";
    EXPECT_THROW(read_manifest(dir / "bad.json"), Error);
}

TEST(Cli, InvalidConfigKeyFailsWithMessage) {
    TempDir dir("badkey");
    const auto path = dir / "bad.conf";
    std::ofstream(path) << "gain = 7\nwavelength_nm = 800\n";
    testing::internal::CaptureStderr();
    const int code = run({"--config", path.string(), "--out", (dir / "o").string(), "decompose"});
    const auto err = testing::internal::GetCapturedStderr();
    EXPECT_EQ(code, 1);
    EXPECT_NE(err.find("error:"), std::string::npos);
    EXPECT_NE(err.find("wavelength_nm"), std::string::npos);
}

TEST(Cli, UnknownSubcommandOptionIsAUsageError) {
    testing::internal::CaptureStderr();
    testing::internal::CaptureStdout();
    EXPECT_NE(run({"decompose", "--frobnicate"}), 0);
    testing::internal::GetCapturedStdout();
    testing::internal::GetCapturedStderr();
}

TEST(Cli, SynthesizeIsDeterministicAcrossThreadCounts) {
    TempDir dir("synth");
    const auto config = coarse_config(dir).string();
    testing::internal::CaptureStdout();
    ASSERT_EQ(run({"--config", config, "--out", (dir / "a").string(), "--seed", "9", "--threads", "1",
                   "synthesize", "-n", "30", "--mode", "signal_only"}),
              0);
    ASSERT_EQ(run({"--config", config, "--out", (dir / "b").string(), "--seed", "9", "--threads", "4",
                   "synthesize", "-n", "30", "--mode", "signal_only"}),
              0);
    ASSERT_EQ(run({"--config", config, "--out", (dir / "c").string(), "--seed", "10", "synthesize",
                   "-n", "30", "--mode", "signal_only"}),
              0);
    testing::internal::GetCapturedStdout();
    const auto a = slurp(dir.path / "a" / "stack.bin");
    EXPECT_EQ(a.size(), 30u * 64 * 64 * sizeof(float));
    EXPECT_EQ(a, slurp(dir.path / "b" / "stack.bin"));
    EXPECT_EQ(slurp(dir.path / "a" / "stack.bin.modes"), slurp(dir.path / "b" / "stack.bin.modes"));
    EXPECT_NE(a, slurp(dir.path / "c" / "stack.bin"));
    const auto info = read_sidecar(dir.path / "a" / "stack.bin");
    EXPECT_EQ(info.mode, DetectionMode::signal_only);
    EXPECT_EQ(info.seed, 9u);
    EXPECT_EQ(info.n_frames, 30u);
    EXPECT_TRUE(fs::exists(dir.path / "a" / "frame_000000.pgm"));
}

TEST(Cli, ReconstructWritesEveryKind) {
    TempDir dir("rec");
    GlobalOptions g;
    g.config_path = coarse_config(dir);
    g.out = dir / "synth";
    SynthesizeOptions s;
    s.frames = 200;
    const auto stack = cmd_synthesize(g, s);

    const std::pair<const char*, std::vector<const char*>> kinds[] = {
        {"radial", {"cov.csv", "modes_rec.csv", "weights_rec.csv"}},
        {"oam", {"c_dphi.csv", "oam_weights.csv", "oam_summary.csv"}},
        {"g2", {"g2.csv"}}};
    for (const auto& [kind, files] : kinds) {
        const auto out = dir.path / kind;
        ASSERT_EQ(run({"--out", out.string(), "reconstruct", stack.string(), "--kind", kind}), 0) << kind;
        for (const char* f : files) EXPECT_TRUE(fs::exists(out / f)) << kind << " " << f;
        EXPECT_EQ(read_manifest(out / "manifest.json").subcommand, "reconstruct");
    }
    EXPECT_EQ(slurp(dir.path / "oam" / "c_dphi.csv").rfind("dphi,C,fit\n", 0), 0u);
    EXPECT_THROW(parse_reconstruct_kind("spiral"), Error);
}

TEST(Cli, ReconstructWithoutSidecarFails) {
    TempDir dir("nosidecar");
    GlobalOptions g;
    g.config_path = coarse_config(dir);
    g.out = dir.path;
    SynthesizeOptions s;
    s.frames = 5;
    const auto stack = cmd_synthesize(g, s);
    fs::remove(sidecar_path(stack));
    testing::internal::CaptureStderr();
    EXPECT_EQ(run({"--out", (dir / "r").string(), "reconstruct", stack.string()}), 1);
    EXPECT_NE(testing::internal::GetCapturedStderr().find("sidecar"), std::string::npos);
}

TEST(Cli, ScanWritesTableAndRejectsEmptyRange) {
    TempDir dir("scan");
    const auto config = coarse_config(dir).string();
    testing::internal::CaptureStdout();
    ASSERT_EQ(run({"--config", config, "--out", (dir / "s").string(), "scan", "power", "--values",
                   "0.02,0.04"}),
              0);
    const auto printed = testing::internal::GetCapturedStdout();
    EXPECT_NE(printed.find("K="), std::string::npos);
    const auto csv = slurp(dir.path / "s" / "scan.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

    testing::internal::CaptureStderr();
    EXPECT_EQ(run({"--config", config, "--out", (dir / "e").string(), "scan", "power", "--from", "0.05",
                   "--to", "0.02", "--step", "0.01"}),
              1);
    EXPECT_EQ(run({"--config", config, "--out", (dir / "e").string(), "scan", "tilt", "--values", "1"}), 1);
    testing::internal::GetCapturedStderr();
}

TEST(Cli, ScanRangeIsInclusive) {
    const auto r = scan_range(0.02, 0.11, 0.01);
    ASSERT_EQ(r.size(), 10u);
    EXPECT_DOUBLE_EQ(r.front(), 0.02);
    EXPECT_NEAR(r.back(), 0.11, 1e-15);
    EXPECT_EQ(scan_range(1, 1, 0.5).size(), 1u);
    EXPECT_THROW(scan_range(0, 1, 0), Error);
    EXPECT_THROW(scan_range(1, 0, 0.1), Error);
}

TEST(Cli, PairsCsvWithAndWithoutHeader) {
    TempDir dir("pairs");
    std::ofstream(dir / "h.csv") << "P,I\n0.1,2\n0.2,5\n";
    std::ofstream(dir / "n.csv") << "0.1,2\n0.2,5\n";
    std::ofstream(dir / "bad.csv") << "P,I\n0.1,x\n";
    const std::vector<std::pair<double, double>> want{{0.1, 2}, {0.2, 5}};
    EXPECT_EQ(read_pairs_csv(dir / "h.csv"), want);
    EXPECT_EQ(read_pairs_csv(dir / "n.csv"), want);
    EXPECT_THROW(read_pairs_csv(dir / "bad.csv"), Error);
    EXPECT_THROW(read_pairs_csv(dir / "missing.csv"), Error);
}

TEST(Cli, CalibrateGainFromMeasurements) {
    TempDir dir("cal");
    {
        std::ofstream data(dir / "gain.csv");
        data << "P,I\n";
        for (double p : {0.5, 1.0, 1.5, 2.0, 3.0}) data << p << "," << 3 * std::pow(std::sinh(2 * std::sqrt(p)), 2) << "\n";
    }
    ASSERT_EQ(run({"--out", (dir / "g").string(), "calibrate", "gain", "--data", (dir / "gain.csv").string()}), 0);
    const auto law = slurp(dir.path / "g" / "gain_law.csv");
    const auto row = law.substr(law.find('\n') + 1);
    EXPECT_NEAR(std::stod(row), 2.0, 0.02);
    EXPECT_TRUE(fs::exists(dir.path / "g" / "gain_points.csv"));

    {
        std::ofstream data(dir / "kerr.csv");
        data << "0.0,0.018\n0.11,0.009\n";
    }
    ASSERT_EQ(run({"--out", (dir / "k").string(), "calibrate", "kerr", "--data", (dir / "kerr.csv").string()}), 0);
    const auto k = slurp(dir.path / "k" / "kerr.csv");
    EXPECT_NEAR(std::stod(k.substr(k.find('\n') + 1)), std::numbers::pi / 0.22, 1e-6);
}

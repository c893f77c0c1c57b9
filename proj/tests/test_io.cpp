#include "fixtures.hpp"

#include "pdcmodes/error.hpp"
#include "pdcmodes/io.hpp"
#include "pdcmodes/synthesis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace pdcmodes;
using fixtures::slurp;
using fixtures::TempDir;

namespace {

FrameStack small_stack(std::size_t n = 6, bool normalize = false) {
    return synthesize_stack(fixtures::coarse_analysis(), n, 5, DetectionMode::signal_only,
                            normalize);
}

}  // namespace

TEST(Csv, NumbersKeepNineSignificantDigits) {
    EXPECT_EQ(format_number(1.0), "1");
    EXPECT_EQ(format_number(0.1234567891234), "0.123456789");
    EXPECT_EQ(format_number(-2.5e-7), "-2.5e-07");
    EXPECT_NEAR(std::stod(format_number(std::numbers::pi)), std::numbers::pi, 1e-8);
}

TEST(Csv, WritesRowsAndRejectsRaggedOnes) {
    TempDir dir("csv");
    {
        CsvWriter csv(dir / "a.csv", {"name", "x", "n"});
        csv.cell(std::string("row")).cell(0.5).cell(3);
        csv.end_row();
        EXPECT_THROW(csv.end_row(), Error);
        csv.cell(std::string("r")).cell(1.0).cell(2);
        EXPECT_THROW(csv.cell(4.0), Error);
        csv.end_row();
    }
    EXPECT_EQ(slurp(dir / "a.csv"), "name,x,n\nrow,0.5,3\nr,1,2\n");
    EXPECT_THROW(CsvWriter(dir.path / "missing" / "b.csv", {"x"}), Error);
}

TEST(Csv, MatrixLayout) {
    TempDir dir("matrix");
    Eigen::MatrixXd m(2, 3);
    m << 1, 2, 3, 4, 5, 6;
    const std::vector<double> rows{0.1, 0.2}, cols{-1, 0, 1};
    write_matrix_csv(dir / "m.csv", m, rows, cols);
    EXPECT_EQ(slurp(dir / "m.csv"), "coord,-1,0,1\n0.1,1,2,3\n0.2,4,5,6\n");
    EXPECT_THROW(write_matrix_csv(dir / "bad.csv", m, cols, rows), Error);
}

TEST(Pgm, HeaderAndScaling) {
    TempDir dir("pgm");
    Eigen::MatrixXd img(2, 3);
    img << 0, 1, 2, 4, 3, -1;
    write_pgm(dir / "i.pgm", img);
    const auto bytes = slurp(dir / "i.pgm");
    const std::string header = "P5\n3 2\n255\n";
    ASSERT_EQ(bytes.size(), header.size() + 6);
    EXPECT_EQ(bytes.substr(0, header.size()), header);
    const auto* px = reinterpret_cast<const unsigned char*>(bytes.data() + header.size());
    EXPECT_EQ(px[0], 0);
    EXPECT_EQ(px[2], 128);
    EXPECT_EQ(px[3], 255);
    EXPECT_EQ(px[5], 0);
}

TEST(PolarToCartesian, MapsAzimuthAndRadius) {
    const auto g = make_polar_grid(0.01, 16, 8);
    Eigen::MatrixXd polar(16, 8);
    for (int j = 0; j < 16; ++j)
        for (int k = 0; k < 8; ++k) polar(j, k) = 100 * k + j;
    const auto img = polar_to_cartesian(polar, g, 64);
    // Right of centre is phi = 0, straight up is phi = pi/2.
    EXPECT_EQ(img(31, 62), polar(15, 0));
    EXPECT_EQ(img(1, 32), polar(15, 2));
    EXPECT_EQ(img(32, 1), polar(15, 4));
    EXPECT_EQ(img(31, 33), polar(0, 0));
    EXPECT_EQ(img(0, 0), 0.0);
    EXPECT_THROW(polar_to_cartesian(polar, g, 1), Error);
}

TEST(FrameMatrix, ThetaMajorLayout) {
    const auto& a = fixtures::coarse_analysis();
    Frame f;
    f.pixels.resize(a.grid.n_theta() * a.grid.n_phi());
    for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<float>(i);
    const auto m = frame_matrix(f, a.grid);
    EXPECT_EQ(m(1, 2), static_cast<double>(a.grid.n_phi() + 2));
    f.pixels.pop_back();
    EXPECT_THROW(frame_matrix(f, a.grid), Error);
}

TEST(Stack, RoundTripsPixelsPhotonNumbersAndMetadata) {
    TempDir dir("stack");
    const auto s = small_stack(6, true);
    write_stack(dir / "s.bin", s);
    const auto r = read_stack(dir / "s.bin");
    EXPECT_EQ(r.info.n_frames, 6u);
    EXPECT_EQ(r.info.seed, 5u);
    EXPECT_EQ(r.info.mode, DetectionMode::signal_only);
    EXPECT_TRUE(r.info.normalized);
    EXPECT_EQ(r.info.n_modes, s.info.n_modes);
    EXPECT_EQ(r.info.grid.theta, s.info.grid.theta);
    EXPECT_EQ(r.info.grid.phi, s.info.grid.phi);
    EXPECT_EQ(format_config(r.info.config), format_config(s.info.config));
    ASSERT_EQ(r.frames.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(r.frames[i].index, i);
        EXPECT_EQ(r.frames[i].pixels, s.frames[i].pixels);
        EXPECT_EQ(r.frames[i].photon_numbers, s.frames[i].photon_numbers);
        EXPECT_TRUE(r.frames[i].normalized);
    }
}

TEST(Stack, ReaderRewinds) {
    TempDir dir("rewind");
    write_stack(dir / "s.bin", small_stack(3));
    StackReader reader(dir / "s.bin");
    Frame a, b;
    ASSERT_TRUE(reader.next(a));
    while (reader.next(b)) {
    }
    EXPECT_EQ(b.index, 2u);
    reader.rewind();
    ASSERT_TRUE(reader.next(b));
    EXPECT_EQ(a.pixels, b.pixels);
}

TEST(Stack, SidecarIsReadable) {
    const auto s = small_stack(2);
    const auto text = format_sidecar(s.info);
    EXPECT_NE(text.find("detection_mode = signal_only"), std::string::npos);
    EXPECT_NE(text.find("seed = 5"), std::string::npos);
    EXPECT_NE(text.find("[config]"), std::string::npos);
}

TEST(Stack, MissingSidecarIsAnError) {
    TempDir dir("nosidecar");
    write_stack(dir / "s.bin", small_stack(2));
    std::filesystem::remove(sidecar_path(dir / "s.bin"));
    try {
        StackReader reader(dir / "s.bin");
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("sidecar"), std::string::npos);
    }
}

TEST(Stack, TruncatedRasterIsAnError) {
    TempDir dir("trunc");
    const auto path = dir / "s.bin";
    write_stack(path, small_stack(2));
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
    EXPECT_THROW(StackReader{path}, Error);
}

TEST(Stack, UnknownOrBrokenSidecarKeysAreErrors) {
    TempDir dir("keys");
    const auto path = dir / "s.bin";
    write_stack(path, small_stack(2));
    const auto original = slurp(sidecar_path(path));
    auto rewrite = [&](const std::string& text) {
        std::ofstream(sidecar_path(path)) << text;
    };
    rewrite("colour = blue\n" + original);
    EXPECT_THROW(read_sidecar(path), Error);
    rewrite("seed = -\n" + original);
    EXPECT_THROW(read_sidecar(path), Error);
    auto no_format = original;
    no_format.erase(0, no_format.find('\n') + 1);
    rewrite(no_format);
    EXPECT_THROW(read_sidecar(path), Error);
    rewrite(original);
    EXPECT_NO_THROW(read_sidecar(path));
}

TEST(Stack, MissingPhotonNumbersAreTolerated) {
    TempDir dir("nomodes");
    const auto path = dir / "s.bin";
    write_stack(path, small_stack(2));
    std::filesystem::remove(modes_path(path));
    const auto r = read_stack(path);
    ASSERT_EQ(r.frames.size(), 2u);
    EXPECT_TRUE(r.frames[0].photon_numbers.empty());
}

TEST(Stack, WriterChecksFrameShape) {
    TempDir dir("shape");
    auto s = small_stack(1);
    StackWriter w(dir / "s.bin", s.info);
    auto f = s.frames[0];
    f.pixels.pop_back();
    EXPECT_THROW(w.append(f), Error);
    f = s.frames[0];
    f.photon_numbers.push_back(0);
    EXPECT_THROW(w.append(f), Error);
    w.append(s.frames[0]);
    w.close();
    EXPECT_THROW(w.append(s.frames[0]), Error);
    EXPECT_EQ(read_sidecar(dir / "s.bin").n_frames, 1u);
}

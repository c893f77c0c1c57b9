#ifndef PDCMODES_IO_HPP
#define PDCMODES_IO_HPP

#include "pdcmodes/grid.hpp"
#include "pdcmodes/synthesis.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pdcmodes {

/// Fixed 9-significant-digit rendering used by every CSV output.
std::string format_number(double value);

/// Minimal CSV writer: a header row, then rows of numbers or strings.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header);
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

    CsvWriter& cell(double value);
    CsvWriter& cell(long long value);
    CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
    CsvWriter& cell(const std::string& value);
    void end_row();

private:
    std::ofstream out_;
    std::size_t columns_;
    std::size_t filled_ = 0;
};

/// Writes a matrix as CSV with a header "row,c0,c1,..." where the first
/// column holds `row_coords` and the header holds `col_coords`.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      std::span<const double> row_coords, std::span<const double> col_coords);

/// 8-bit binary graymap scaled linearly from 0 to the image maximum.
void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& image);

/// Resamples a polar raster (n_theta x n_phi) onto a square Cartesian camera
/// image with r = focal_length * theta, nearest node in theta and phi.
Eigen::MatrixXd polar_to_cartesian(const Eigen::MatrixXd& polar, const PolarGrid& grid,
                                   int pixels);

Eigen::MatrixXd frame_matrix(const Frame& frame, const PolarGrid& grid);

/// Frame stacks on disk: `path` holds the float32 little-endian rasters back
/// to back, `path.hdr` the key = value sidecar and `path.modes` the per-shot
/// photon numbers.
std::filesystem::path sidecar_path(const std::filesystem::path& stack);
std::filesystem::path modes_path(const std::filesystem::path& stack);

class StackWriter {
public:
    StackWriter(const std::filesystem::path& path, StackInfo info);
    ~StackWriter();
    StackWriter(const StackWriter&) = delete;
    StackWriter& operator=(const StackWriter&) = delete;

    void append(const Frame& frame);
    /// Flushes data and writes the sidecar. Called by the destructor if needed.
    void close();

private:
    std::filesystem::path path_;
    StackInfo info_;
    std::ofstream raster_;
    std::ofstream modes_;
    std::size_t written_ = 0;
    bool closed_ = false;
};

class StackReader {
public:
    explicit StackReader(const std::filesystem::path& path);

    const StackInfo& info() const { return info_; }
    /// Reads the next frame; false at the end of the stack.
    bool next(Frame& frame);
    void rewind();

private:
    StackInfo info_;
    std::ifstream raster_;
    std::ifstream modes_;
    bool has_modes_ = false;
    std::size_t position_ = 0;
};

StackInfo read_sidecar(const std::filesystem::path& stack);
std::string format_sidecar(const StackInfo& info);

void write_stack(const std::filesystem::path& path, const FrameStack& stack);
FrameStack read_stack(const std::filesystem::path& path);

}  // namespace pdcmodes

#endif

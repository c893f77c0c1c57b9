#include "pdcmodes/io.hpp"

#include "pdcmodes/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <sstream>

namespace pdcmodes {

std::string format_number(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", value);
    return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::initializer_list<std::string> header)
    : CsvWriter(path, std::vector<std::string>(header)) {}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
}

CsvWriter& CsvWriter::cell(double value) { return cell(format_number(value)); }

CsvWriter& CsvWriter::cell(long long value) { return cell(std::to_string(value)); }

CsvWriter& CsvWriter::cell(const std::string& value) {
    if (filled_ == columns_) throw Error("CsvWriter: too many cells in row");
    out_ << (filled_ ? "," : "") << value;
    ++filled_;
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_) throw Error("CsvWriter: incomplete row");
    out_ << '\n';
    filled_ = 0;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& matrix,
                      std::span<const double> row_coords, std::span<const double> col_coords) {
    if (row_coords.size() != static_cast<std::size_t>(matrix.rows()) ||
        col_coords.size() != static_cast<std::size_t>(matrix.cols()))
        throw Error("write_matrix_csv: coordinate sizes do not match matrix");
    std::vector<std::string> header{"coord"};
    for (double c : col_coords) header.push_back(format_number(c));
    CsvWriter csv(path, header);
    for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
        csv.cell(row_coords[static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < matrix.cols(); ++j) csv.cell(matrix(i, j));
        csv.end_row();
    }
}

void write_pgm(const std::filesystem::path& path, const Eigen::MatrixXd& image) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
    const double top = image.size() ? image.maxCoeff() : 0.0;
    std::vector<unsigned char> row(static_cast<std::size_t>(image.cols()));
    for (Eigen::Index i = 0; i < image.rows(); ++i) {
        for (Eigen::Index j = 0; j < image.cols(); ++j) {
            const double v = top > 0 ? std::clamp(image(i, j) / top, 0.0, 1.0) : 0.0;
            row[static_cast<std::size_t>(j)] = static_cast<unsigned char>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

Eigen::MatrixXd polar_to_cartesian(const Eigen::MatrixXd& polar, const PolarGrid& grid,
                                   int pixels) {
    if (pixels < 2) throw Error("polar_to_cartesian: need at least 2 pixels");
    const double extent = grid.theta_max();
    const double step = 2.0 * extent / pixels;
    Eigen::MatrixXd image = Eigen::MatrixXd::Zero(pixels, pixels);
    const auto n_theta = static_cast<long>(grid.n_theta());
    const auto n_phi = static_cast<long>(grid.n_phi());
    for (int row = 0; row < pixels; ++row) {
        const double y = extent - (row + 0.5) * step;
        for (int col = 0; col < pixels; ++col) {
            const double x = -extent + (col + 0.5) * step;
            const double r = std::hypot(x, y);
            if (r >= extent) continue;
            double phi = std::atan2(y, x);
            if (phi < 0) phi += 2.0 * std::numbers::pi;
            const long j = std::min(n_theta - 1, static_cast<long>(r / grid.dtheta));
            const long k = static_cast<long>(std::lround(phi / grid.dphi)) % n_phi;
            image(row, col) = polar(j, k);
        }
    }
    return image;
}

Eigen::MatrixXd frame_matrix(const Frame& frame, const PolarGrid& grid) {
    const auto n_theta = static_cast<Eigen::Index>(grid.n_theta());
    const auto n_phi = static_cast<Eigen::Index>(grid.n_phi());
    if (frame.pixels.size() != static_cast<std::size_t>(n_theta * n_phi))
        throw Error("frame does not match grid");
    Eigen::MatrixXd out(n_theta, n_phi);
    for (Eigen::Index j = 0; j < n_theta; ++j)
        for (Eigen::Index k = 0; k < n_phi; ++k)
            out(j, k) = frame.pixels[static_cast<std::size_t>(j * n_phi + k)];
    return out;
}

namespace {

constexpr std::string_view kFormat = "pdcmodes-stack 1";

void write_floats(std::ofstream& out, const std::vector<float>& values) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(float)));
    } else {
        for (float v : values) {
            auto bits = std::bit_cast<std::uint32_t>(v);
            bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) | (bits << 24);
            out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
    }
}

bool read_floats(std::ifstream& in, std::vector<float>& values) {
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!in) return false;
    if constexpr (std::endian::native != std::endian::little) {
        for (auto& v : values) {
            auto bits = std::bit_cast<std::uint32_t>(v);
            bits = (bits >> 24) | ((bits >> 8) & 0xff00u) | ((bits << 8) & 0xff0000u) | (bits << 24);
            v = std::bit_cast<float>(bits);
        }
    }
    return true;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text, const std::string& key, const std::string& origin) {
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw Error(origin + ": bad value '" + text + "' for " + key);
    return value;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& stack) {
    return std::filesystem::path(stack.string() + ".hdr");
}

std::filesystem::path modes_path(const std::filesystem::path& stack) {
    return std::filesystem::path(stack.string() + ".modes");
}

std::string format_sidecar(const StackInfo& info) {
    char dtheta[40];
    std::snprintf(dtheta, sizeof dtheta, "%.17g", info.grid.dtheta);
    std::ostringstream out;
    out << "format = " << kFormat << '\n'
        << "n_frames = " << info.n_frames << '\n'
        << "n_theta = " << info.grid.n_theta() << '\n'
        << "n_phi = " << info.grid.n_phi() << '\n'
        << "dtheta = " << dtheta << '\n'
        << "layout = theta-major float32 little-endian\n"
        << "seed = " << info.seed << '\n'
        << "detection_mode = " << to_string(info.mode) << '\n'
        << "normalized = " << (info.normalized ? 1 : 0) << '\n'
        << "n_modes = " << info.n_modes << '\n'
        << "[config]\n"
        << format_config(info.config);
    return out.str();
}

StackInfo read_sidecar(const std::filesystem::path& stack) {
    const auto path = sidecar_path(stack);
    std::ifstream in(path);
    if (!in) throw Error("missing stack sidecar " + path.string());
    const std::string origin = path.string();
    StackInfo info;
    std::string line;
    std::string config_text;
    bool in_config = false;
    bool have_format = false;
    long n_theta = -1, n_phi = -1;
    double dtheta = 0;
    bool have_frames = false;
    while (std::getline(in, line)) {
        if (in_config) {
            config_text += line + '\n';
            continue;
        }
        const auto text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        if (text == "[config]") {
            in_config = true;
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw Error(origin + ": expected key = value");
        const auto key = trim(std::string_view(text).substr(0, eq));
        const auto value = trim(std::string_view(text).substr(eq + 1));
        if (key == "format") {
            if (value != kFormat) throw Error(origin + ": unsupported format '" + value + "'");
            have_format = true;
        } else if (key == "n_frames") {
            info.n_frames = parse_number<std::size_t>(value, key, origin);
            have_frames = true;
        } else if (key == "n_theta") {
            n_theta = parse_number<long>(value, key, origin);
        } else if (key == "n_phi") {
            n_phi = parse_number<long>(value, key, origin);
        } else if (key == "dtheta") {
            dtheta = parse_number<double>(value, key, origin);
        } else if (key == "seed") {
            info.seed = parse_number<std::uint64_t>(value, key, origin);
        } else if (key == "detection_mode") {
            info.mode = parse_detection_mode(value);
        } else if (key == "normalized") {
            info.normalized = parse_number<int>(value, key, origin) != 0;
        } else if (key == "n_modes") {
            info.n_modes = parse_number<std::size_t>(value, key, origin);
        } else if (key != "layout") {
            throw Error(origin + ": unknown key '" + key + "'");
        }
    }
    if (!have_format || !have_frames || n_theta < 1 || n_phi < 1 || !(dtheta > 0))
        throw Error(origin + ": incomplete stack sidecar");
    info.grid = polar_grid_with_step(dtheta, static_cast<int>(n_theta), static_cast<int>(n_phi));
    info.config = parse_config(config_text, origin);
    return info;
}

StackWriter::StackWriter(const std::filesystem::path& path, StackInfo info)
    : path_(path), info_(std::move(info)), raster_(path, std::ios::binary),
      modes_(modes_path(path), std::ios::binary) {
    if (!raster_ || !modes_) throw Error("cannot write stack " + path.string());
}

StackWriter::~StackWriter() {
    if (!closed_) {
        try {
            close();
        } catch (const std::exception& e) {
            warn(std::string("closing stack failed: ") + e.what());
        }
    }
}

void StackWriter::append(const Frame& frame) {
    if (closed_) throw Error("StackWriter: append after close");
    if (frame.pixels.size() != info_.grid.n_theta() * info_.grid.n_phi())
        throw Error("StackWriter: frame does not match grid");
    if (frame.photon_numbers.size() != info_.n_modes)
        throw Error("StackWriter: photon numbers do not match mode count");
    write_floats(raster_, frame.pixels);
    write_floats(modes_, frame.photon_numbers);
    ++written_;
}

void StackWriter::close() {
    if (closed_) return;
    closed_ = true;
    raster_.close();
    modes_.close();
    if (!raster_ || !modes_) throw Error("error writing stack " + path_.string());
    info_.n_frames = written_;
    std::ofstream side(sidecar_path(path_));
    side << format_sidecar(info_);
    if (!side) throw Error("cannot write " + sidecar_path(path_).string());
}

StackReader::StackReader(const std::filesystem::path& path)
    : info_(read_sidecar(path)), raster_(path, std::ios::binary) {
    if (!raster_) throw Error("cannot open stack " + path.string());
    const auto expected = info_.n_frames * info_.grid.n_theta() * info_.grid.n_phi() * sizeof(float);
    if (std::filesystem::file_size(path) != expected)
        throw Error("stack " + path.string() + " size does not match its sidecar");
    const auto mp = modes_path(path);
    if (info_.n_modes > 0 && std::filesystem::exists(mp) &&
        std::filesystem::file_size(mp) == info_.n_frames * info_.n_modes * sizeof(float)) {
        modes_.open(mp, std::ios::binary);
        has_modes_ = static_cast<bool>(modes_);
    }
}

bool StackReader::next(Frame& frame) {
    if (position_ >= info_.n_frames) return false;
    frame.index = position_;
    frame.normalized = info_.normalized;
    frame.pixels.resize(info_.grid.n_theta() * info_.grid.n_phi());
    if (!read_floats(raster_, frame.pixels)) throw Error("stack truncated");
    if (has_modes_) {
        frame.photon_numbers.resize(info_.n_modes);
        if (!read_floats(modes_, frame.photon_numbers)) throw Error("stack mode file truncated");
    } else {
        frame.photon_numbers.clear();
    }
    ++position_;
    return true;
}

void StackReader::rewind() {
    raster_.clear();
    raster_.seekg(0);
    if (has_modes_) {
        modes_.clear();
        modes_.seekg(0);
    }
    position_ = 0;
}

void write_stack(const std::filesystem::path& path, const FrameStack& stack) {
    StackInfo info = stack.info;
    StackWriter writer(path, info);
    for (const auto& f : stack.frames) writer.append(f);
    writer.close();
}

FrameStack read_stack(const std::filesystem::path& path) {
    StackReader reader(path);
    FrameStack stack;
    stack.info = reader.info();
    stack.frames.reserve(stack.info.n_frames);
    Frame f;
    while (reader.next(f)) stack.frames.push_back(f);
    return stack;
}

}  // namespace pdcmodes

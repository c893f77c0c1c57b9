#ifndef PDCMODES_TESTS_FIXTURES_HPP
#define PDCMODES_TESTS_FIXTURES_HPP

#include "pdcmodes/config.hpp"
#include "pdcmodes/error.hpp"
#include "pdcmodes/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <unistd.h>

namespace fixtures {

inline std::filesystem::path source_dir() { return PDCMODES_SOURCE_DIR; }

inline pdcmodes::SourceConfig shipped(const std::string& name) {
    return pdcmodes::load_config(source_dir() / "configs" / name);
}

/// Shipped operating point at L = 15 mm, G0 = 7.6.
inline pdcmodes::SourceConfig fig3() { return shipped("fig3.conf"); }

/// Same source on a coarse grid for Monte-Carlo heavy tests.
inline pdcmodes::SourceConfig coarse(int n = 64) {
    auto c = fig3();
    c.n_theta = n;
    c.n_phi = n;
    return c;
}

inline const pdcmodes::ModeAnalysis& fig3_analysis() {
    static const auto a = pdcmodes::analyze(fig3());
    return a;
}

inline const pdcmodes::ModeAnalysis& coarse_analysis() {
    static const auto a = pdcmodes::analyze(coarse());
    return a;
}

/// Fresh scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               ("pdcmodes_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
    std::filesystem::path path;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture() {
        pdcmodes::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
    }
    ~WarningCapture() { pdcmodes::set_warning_sink(nullptr); }
    std::vector<std::string> messages;
};

}  // namespace fixtures

#endif

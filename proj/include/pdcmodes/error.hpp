#ifndef PDCMODES_ERROR_HPP
#define PDCMODES_ERROR_HPP

#include <functional>
#include <stdexcept>
#include <string>

namespace pdcmodes {

/// Base exception for all recoverable failures in the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-fatal diagnostics (quadrature convergence, clipped covariance mass, ...)
/// are routed through a process-wide sink. Default writes to stderr.
using WarningSink = std::function<void(const std::string&)>;

void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

}  // namespace pdcmodes

#endif

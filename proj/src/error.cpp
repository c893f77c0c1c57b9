#include "pdcmodes/error.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace pdcmodes {

namespace {

std::mutex sink_mutex;

WarningSink& sink_slot() {
    static WarningSink sink = [](const std::string& message) {
        std::cerr << "warning: " << message << '\n';
    };
    return sink;
}

}  // namespace

void set_warning_sink(WarningSink sink) {
    std::lock_guard lock(sink_mutex);
    sink_slot() = std::move(sink);
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex);
    if (sink_slot()) sink_slot()(message);
}

}  // namespace pdcmodes

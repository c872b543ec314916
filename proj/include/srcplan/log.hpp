#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace srcplan {

inline std::atomic<bool>& quiet_flag() {
    static std::atomic<bool> quiet{false};
    return quiet;
}

inline void set_quiet(bool q) { quiet_flag() = q; }

inline void log_warning(std::string_view msg) {
    if (!quiet_flag()) std::clog << "warning: " << msg << '\n';
}

inline void log_info(std::string_view msg) {
    if (!quiet_flag()) std::clog << msg << '\n';
}

}  // namespace srcplan

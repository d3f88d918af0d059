#pragma once

#include <iostream>
#include <string_view>

namespace gannotation {

// Diagnostics go to standard error; data only ever goes to declared files.
inline void log_notice(std::string_view msg) { std::cerr << "[gannotation] " << msg << '\n'; }
inline void log_warning(std::string_view msg) { std::cerr << "[gannotation] warning: " << msg << '\n'; }

}  // namespace gannotation

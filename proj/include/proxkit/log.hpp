#pragma once

#include <string>

namespace proxkit {

// PROXKIT_LOG: unset/"" = silent, "info", "debug".
int log_level();
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

}  // namespace proxkit

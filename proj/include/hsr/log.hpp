#pragma once

#include <spdlog/spdlog.h>

namespace hsr {

// Routes spdlog's default logger to stderr at the level named by HSR_LOG
// (error | info | debug; default info). Safe to call more than once.
void init_logging();

}  // namespace hsr

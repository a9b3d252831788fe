#include "hsr/log.hpp"

#include <cstdlib>
#include <string>

#include <spdlog/sinks/stdout_sinks.h>

namespace hsr {

void init_logging() {
  static auto logger = [] {
    auto l = spdlog::stderr_logger_mt("hsr");
    l->set_pattern("[%l] %v");
    spdlog::set_default_logger(l);
    return l;
  }();
  const char* env = std::getenv("HSR_LOG");
  const std::string level = env != nullptr ? env : "info";
  if (level == "error") {
    logger->set_level(spdlog::level::err);
  } else if (level == "debug") {
    logger->set_level(spdlog::level::debug);
  } else {
    logger->set_level(spdlog::level::info);
  }
}

}  // namespace hsr

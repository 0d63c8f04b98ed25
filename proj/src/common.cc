#include "chronoshift/common.h"

#include <memory>

#include <spdlog/sinks/stdout_sinks.h>

namespace chronoshift {

Error::Error(std::string code, const std::string& message)
    : std::runtime_error(message), code_(std::move(code)) {}

spdlog::logger& Log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = std::make_shared<spdlog::logger>(
        "chronoshift", std::make_shared<spdlog::sinks::stderr_sink_mt>());
    l->set_pattern("[%l] %v");
    l->set_level(spdlog::level::info);
    return l;
  }();
  return *logger;
}

void SetLogLevel(spdlog::level::level_enum level) { Log().set_level(level); }

}  // namespace chronoshift

#pragma once

#include <cstdint>
#include <string>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace chronoshift {

// Every failure raised by the library carries a short machine-readable code
// (e.g. "format", "not-found") next to the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message);

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* kInvalidArgument = "invalid-argument";
inline constexpr const char* kNotFound = "not-found";
inline constexpr const char* kFormat = "format";
inline constexpr const char* kIo = "io";
inline constexpr const char* kNumerical = "numerical";
inline constexpr const char* kConfig = "config";
inline constexpr const char* kMissingArtifact = "missing-artifact";
}  // namespace errc

inline void Require(bool condition, const char* code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

// Library-wide logger; writes to standard error.
spdlog::logger& Log();

void SetLogLevel(spdlog::level::level_enum level);

}  // namespace chronoshift

#ifndef ROADMRF_COMMON_HPP
#define ROADMRF_COMMON_HPP

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace roadmrf {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed graph input: self-loops, unknown vertices, inconsistent shapes.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameter or file content (maps to CLI exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// File could not be read/written/parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Training data whose variance terms vanish; eta has no finite maximizer.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

enum class LogLevel { error = 0, info = 1, debug = 2 };

// Verbosity comes from the RECON_LOG environment variable, read once.
inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("RECON_LOG");
    if (env == nullptr) return LogLevel::error;
    if (std::strcmp(env, "debug") == 0) return LogLevel::debug;
    if (std::strcmp(env, "info") == 0) return LogLevel::info;
    return LogLevel::error;
  }();
  return level;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::info) std::fprintf(stderr, "[roadmrf] %s\n", msg.c_str());
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::debug) std::fprintf(stderr, "[roadmrf] %s\n", msg.c_str());
}

}  // namespace roadmrf

#endif  // ROADMRF_COMMON_HPP

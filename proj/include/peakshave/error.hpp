#pragma once

#include <stdexcept>
#include <string>

namespace peakshave {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  config = 1,
  data = 2,
  infeasible = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Bad configuration value, unknown key, or violated parameter invariant.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::config, what) {}
};

/// Unreadable or malformed input data, mismatched series lengths.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::data, what) {}
};

/// Tractability guard exceeded or a verification check failed.
class GuardError : public Error {
 public:
  explicit GuardError(const std::string& what) : Error(ExitCode::infeasible, what) {}
};

}  // namespace peakshave

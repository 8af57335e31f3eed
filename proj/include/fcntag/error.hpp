#pragma once

#include <stdexcept>
#include <string>

namespace fcntag {

enum class ErrorKind {
  invalid_input,
  invalid_config,
  unsupported_direction,
  shape,
  contract,
  io,
  numerical,
  invalid_spec,
  invalid_ladder,
  uninitialized_stats,
  empty_report,
  invalid_request,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid input";
    case ErrorKind::invalid_config: return "invalid config";
    case ErrorKind::unsupported_direction: return "unsupported direction";
    case ErrorKind::shape: return "shape error";
    case ErrorKind::contract: return "contract violation";
    case ErrorKind::io: return "I/O error";
    case ErrorKind::numerical: return "numerical failure";
    case ErrorKind::invalid_spec: return "invalid spec";
    case ErrorKind::invalid_ladder: return "invalid ladder";
    case ErrorKind::uninitialized_stats: return "uninitialized statistics";
    case ErrorKind::empty_report: return "empty report";
    case ErrorKind::invalid_request: return "invalid request";
  }
  return "error";
}

/// Single exception type for the library; `kind()` tells callers what went wrong.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit codes used by the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::numerical: return kExitNumerical;
    case ErrorKind::invalid_spec:
    case ErrorKind::invalid_config:
    case ErrorKind::invalid_request: return kExitUsage;
    default: return kExitData;
  }
}

}  // namespace fcntag

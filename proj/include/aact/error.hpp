#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aact {

enum class ErrorCode {
  invalid_argument,  // caller supplied bad data or flags
  parse_error,       // malformed file contents
  io_error,          // missing or unreadable file
  unexpected_step,   // dialogue call out of order
  not_found,         // unknown session / task / feature
  not_implemented,   // validated but unsupported configuration
  runtime_failure,   // numerical or internal failure
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. The code drives HTTP status
/// mapping in the service and the exit code in the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace aact

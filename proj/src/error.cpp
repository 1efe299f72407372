#include "aact/error.hpp"

namespace aact {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::unexpected_step: return "unexpected_step";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::not_implemented: return "not_implemented";
    case ErrorCode::runtime_failure: return "runtime_failure";
  }
  return "unknown";
}

}  // namespace aact

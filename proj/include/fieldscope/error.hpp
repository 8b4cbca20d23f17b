#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldscope {

enum class ErrorCode {
  invalid_argument,
  unknown_field,
  unknown_op,
  outside_domain,
  degenerate_cell,
  size_mismatch,
  non_finite,
  duplicate_name,
  schema_version,
  parse_error,
  io_error,
  cache_miss,
  unsupported,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unknown_field: return "unknown_field";
    case ErrorCode::unknown_op: return "unknown_op";
    case ErrorCode::outside_domain: return "outside_domain";
    case ErrorCode::degenerate_cell: return "degenerate_cell";
    case ErrorCode::size_mismatch: return "size_mismatch";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::duplicate_name: return "duplicate_name";
    case ErrorCode::schema_version: return "schema_version";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::cache_miss: return "cache_miss";
    case ErrorCode::unsupported: return "unsupported";
  }
  return "unknown";
}

/// Library-wide exception. The code is machine readable and travels over the wire.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fieldscope

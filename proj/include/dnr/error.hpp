#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dnr {

enum class ErrorCode {
  dimension_mismatch,
  order_mismatch,
  invalid_argument,
  non_convergence,
  stale_trace,
  non_finite,
  stability,
  out_of_domain,
  io,
  format,
  config,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code next to
/// the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dnr

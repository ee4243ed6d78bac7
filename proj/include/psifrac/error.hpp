#pragma once

#include <stdexcept>
#include <string>

namespace psifrac {

enum class ErrorCode {
  // input / validation failures
  validation,
  syntax,
  unknown_identifier,
  unbound_variable,
  non_differentiable,
  arity,
  ordering,
  missing_derivative,
  grid,
  io,
  // numerical failures
  domain,
  pole,
  convergence,
  singular,
  no_sign_change,
  max_iter,
};

/// True for codes that describe bad input rather than a failed computation.
constexpr bool is_validation(ErrorCode code) noexcept {
  return code < ErrorCode::domain;
}

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace psifrac

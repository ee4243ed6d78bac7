#include "psifrac/error.hpp"

namespace psifrac {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::validation: return "validation";
    case ErrorCode::syntax: return "syntax";
    case ErrorCode::unknown_identifier: return "unknown_identifier";
    case ErrorCode::unbound_variable: return "unbound_variable";
    case ErrorCode::non_differentiable: return "non_differentiable";
    case ErrorCode::arity: return "arity";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::missing_derivative: return "missing_derivative";
    case ErrorCode::grid: return "grid";
    case ErrorCode::io: return "io";
    case ErrorCode::domain: return "domain";
    case ErrorCode::pole: return "pole";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::singular: return "singular";
    case ErrorCode::no_sign_change: return "no_sign_change";
    case ErrorCode::max_iter: return "max_iter";
  }
  return "unknown";
}

}  // namespace psifrac

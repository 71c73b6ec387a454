#pragma once

#include <cmath>

#include "fracvar/errors.hpp"

namespace fracvar {

/// Gamma function for positive arguments.
inline double gamma_fn(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError("gamma_fn: argument must be positive and finite");
  }
  return std::tgamma(x);
}

/// 1 / Gamma(x), with the convention 1/Gamma(0) = 0.
inline double inv_gamma(double x) {
  if (x == 0.0) return 0.0;
  return 1.0 / gamma_fn(x);
}

}  // namespace fracvar

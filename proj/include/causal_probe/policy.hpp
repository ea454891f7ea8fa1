#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace causal_probe {

// Tolerances shared by every module. One record, read everywhere; the CLI may
// replace it once at startup before any work is scheduled.
struct NumericPolicy {
  double structural_tol = 1e-10;  // projector algebra, completeness, unitarity
  double exact_tol = 1e-12;       // values derivable in exact arithmetic
  double tail_tol = 1e-8;         // admissible norm outside a Fock truncation
  double zero_probability = 1e-14;
  double schmidt_tol = 1e-8;      // separability check for product pre-states
};

inline NumericPolicy& numeric_policy() {
  static NumericPolicy policy;
  return policy;
}

// Short human-readable number for messages.
inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: wrong dimensions, invalid labels, malformed scenarios.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A truncated representation lost more norm than the policy allows.
class TruncationError : public Error {
 public:
  using Error::Error;
};

// Renormalization of a probability-zero branch was requested.
class ZeroBranchError : public Error {
 public:
  using Error::Error;
};

}  // namespace causal_probe

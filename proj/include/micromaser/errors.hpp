#pragma once

#include <stdexcept>
#include <string>

namespace micromaser {

// Base class for all library failures.
struct maser_error : std::runtime_error {
  explicit maser_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Parameters outside their physical domain (a, n_b, N, theta, x, ...).
struct invalid_parameter : maser_error {
  explicit invalid_parameter(const std::string &msg) : maser_error(msg) {}
};

// A requested structure does not exist for these parameters:
// no maser branch, no transition, no crossing, no barrier.
struct no_solution : maser_error {
  explicit no_solution(const std::string &msg) : maser_error(msg) {}
};

// The geometric/thermal closed form ceases to converge.
struct divergence_error : maser_error {
  explicit divergence_error(const std::string &msg) : maser_error(msg) {}
};

// Adaptive truncation could not reach its tolerance.
struct truncation_error : maser_error {
  explicit truncation_error(const std::string &msg) : maser_error(msg) {}
};

// Integrand singular (or tolerance unreachable) on the requested range.
struct quadrature_error : maser_error {
  explicit quadrature_error(const std::string &msg) : maser_error(msg) {}
};

// Configuration text could not be parsed; carries a line number.
struct parse_error : maser_error {
  parse_error(const std::string &msg, int line_no)
      : maser_error("line " + std::to_string(line_no) + ": " + msg),
        line(line_no) {}
  int line;
};

} // namespace micromaser

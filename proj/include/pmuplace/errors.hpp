#pragma once

#include <stdexcept>
#include <string>

namespace pmuplace {

// Invalid model data: bad dimensions, non-SPD covariance, unknown bus, ...
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure inside an otherwise valid computation (e.g. inner
// Cholesky breakdown in the covariance recursion).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// The assimilated information matrix leaves part of the state space
// unobserved: E'(Q + A P A')^{-1} E + S is rank deficient.
class NotDetectable : public std::runtime_error {
 public:
  NotDetectable(const std::string& what, int deficiency_rank)
      : std::runtime_error(what), deficiency_rank(deficiency_rank) {}
  int deficiency_rank;
};

// A combinatorial routine was asked to run beyond its size guard.
class RefusedScale : public std::runtime_error {
 public:
  explicit RefusedScale(const std::string& what) : std::runtime_error(what) {}
};

// Case-file problems: JSON syntax or schema violations. `where` carries a
// line number (syntax) or a JSON path (schema).
class CaseFormatError : public std::runtime_error {
 public:
  CaseFormatError(const std::string& what, const std::string& where)
      : std::runtime_error(where.empty() ? what : where + ": " + what),
        where(where) {}
  std::string where;
};

}  // namespace pmuplace

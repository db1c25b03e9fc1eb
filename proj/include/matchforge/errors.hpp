#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace matchforge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or duplicated columns, bad column kinds.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Cell values outside their domain (non-binary treatment, non-numeric value).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnimputableError : public Error {
 public:
  using Error::Error;
};

class SingleArmError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

class NoModelError : public Error {
 public:
  using Error::Error;
};

// Cohen's D with zero pooled deviation and distinct means.
class InfiniteEffectError : public Error {
 public:
  using Error::Error;
};

class UndefinedTauError : public Error {
 public:
  using Error::Error;
};

class NoSelectionError : public Error {
 public:
  using Error::Error;
};

class A2AUnavailableError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchforge

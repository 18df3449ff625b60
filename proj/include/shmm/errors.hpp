#pragma once

#include <stdexcept>
#include <string>

namespace shmm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

// A forward pass produced -inf/NaN; the model parameters are corrupt.
class NonFiniteLikelihood : public Error {
 public:
  using Error::Error;
};

// Newton/bisection exceeded its iteration budget. Never expected in practice.
class NoConvergence : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

// A state received (numerically) zero responsibility in an M-step.
class EmptyState : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace shmm

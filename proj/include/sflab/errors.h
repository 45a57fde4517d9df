#ifndef SFLAB_ERRORS_H
#define SFLAB_ERRORS_H

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sflab {

using StepIndex = std::int64_t;

// Invalid user input: bad schedule parameters, dimension mismatch,
// incompatible check/schedule pairing, malformed config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run produced a non-finite value (gradient, iterate).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterate left the box on which a problem's smoothness constant is
// certified by more than the allowed margin.
class DomainEscape : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A coefficient of the potential is not defined at the requested index
// (e.g. c_{t+1} = 1 makes A_t divide by zero).
class UndefinedCoefficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be read or written; the message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An optimizer parameter map has no admissible solution at some step.
class MapInfeasible : public std::runtime_error {
 public:
  MapInfeasible(const std::string& what, StepIndex step)
      : std::runtime_error(what), step_(step) {}
  StepIndex step() const { return step_; }

 private:
  StepIndex step_;
};

}  // namespace sflab

#endif  // SFLAB_ERRORS_H

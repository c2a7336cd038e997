#pragma once

#include <stdexcept>
#include <string>

namespace whorl {

/// Base class for failures of a numerical procedure (as opposed to bad input).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BesselOverflow : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BracketExhausted : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureNotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A computed first radial eigenvalue falls outside (n^2/delta^2, n^2).
class EigenvalueBoundViolation : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The homogeneous state never loses stability over the searched lambda range.
class NoOnset : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SimultaneousEntry : public NumericalError {
 public:
  SimultaneousEntry(const std::string& what, int n1, int j1, int n2, int j2)
      : NumericalError(what), first{n1, j1}, second{n2, j2} {}
  struct Index {
    int n;
    int j;
  };
  Index first;
  Index second;
};

class EndpointEntry : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NearResonance : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TailNotConverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateQuadratic : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonlinearContamination : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolveFailed : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Max-norm of the field exceeded the divergence threshold. Carries the time
/// at which it happened so callers can report partial runs.
class BlowUp : public NumericalError {
 public:
  BlowUp(const std::string& what, double t) : NumericalError(what), time(t) {}
  double time;
};

}  // namespace whorl

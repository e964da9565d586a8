#pragma once

#include <stdexcept>
#include <string>

namespace vega {

// Base class for all errors thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct UnknownNode : Error {
  using Error::Error;
};

// Malformed input file (JSON/CSV). Message carries position diagnostics.
struct ParseError : Error {
  using Error::Error;
};

// Structurally valid input that violates a domain invariant
// (dangling edge endpoint, nonpositive length, empty node set, ...).
struct InvariantViolation : Error {
  using Error::Error;
};

// A discharge would drive the state of charge below zero.
struct DepletedError : Error {
  double deficit_pct;
  explicit DepletedError(double deficit)
      : Error("battery depleted: state of charge short by " +
              std::to_string(deficit) + " pct"),
        deficit_pct(deficit) {}
};

struct InsufficientData : Error {
  using Error::Error;
};

// A fitted charging curve is not strictly increasing.
struct NonMonotoneFit : Error {
  using Error::Error;
};

struct NoGoalAtDistance : Error {
  using Error::Error;
};

struct EpisodeDone : Error {
  using Error::Error;
};

struct InvalidActionSlot : Error {
  using Error::Error;
};

struct NoNeighbors : Error {
  using Error::Error;
};

struct UnknownStage : Error {
  using Error::Error;
};

struct MissingPowerChannel : Error {
  using Error::Error;
};

// Drive log lacks the excitation needed to identify vehicle parameters.
struct InsufficientExcitation : Error {
  using Error::Error;
};

struct NonFiniteLoss : Error {
  using Error::Error;
};

struct NoFeasiblePath : Error {
  using Error::Error;
};

// A lat/lon could not be snapped to any graph node within the snap radius.
struct SnapFailure : Error {
  using Error::Error;
};

}  // namespace vega

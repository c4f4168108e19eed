#pragma once

#include <stdexcept>
#include <string>

namespace qcinf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Dimension / shape mismatch between tensor or matrix operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// Numeric domain failure, e.g. a gradient leaving the set of
/// immersion gradients (det(P^T P) below the floor) or an overflowing
/// power of the dilation.
class DomainViolation : public Error {
public:
  using Error::Error;
};

/// An operation's stated precondition does not hold for the inputs.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration: unknown map name, malformed file, bad flag
/// combination, grid too small.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A finite-difference stencil would read outside the usable grid.
class StencilOutOfDomain : public Error {
public:
  using Error::Error;
};

/// The rank of K_P drifted along a patch where it must stay constant.
class RankDriftError : public Error {
public:
  using Error::Error;
};

/// A variation patch straddles more than one phase.
class PhaseMixedError : public Error {
public:
  using Error::Error;
};

/// A normal frame could not be sign-aligned across neighboring points.
class FrameDiscontinuityError : public Error {
public:
  using Error::Error;
};

/// The solver initializer is not an immersion.
class InitializationError : public Error {
public:
  using Error::Error;
};

/// Line search could not recover from repeated infinite-energy steps.
class SolverStallError : public Error {
public:
  using Error::Error;
};

}  // namespace qcinf

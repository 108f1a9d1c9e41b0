#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace specwave
{

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value does not hold.
class InvalidArgument : public Error
{
public:
  using Error::Error;
};

/// Grid spacing too coarse for the requested wavelength and material.
class ResolutionError : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

/// Linear solve failed (singular factorization or iterative non-convergence).
class SolverError : public Error
{
public:
  SolverError(const std::string &what, double achieved_residual = -1.0)
    : Error(what), residual_(achieved_residual)
  {
  }
  double achieved_residual() const { return residual_; }

private:
  double residual_;
};

/// Two objects that must agree on shape (grid, channel count, ...) do not.
class ShapeMismatch : public InvalidArgument
{
public:
  using InvalidArgument::InvalidArgument;
};

/// A value that must be finite is NaN or infinite.
class NonFiniteError : public Error
{
public:
  using Error::Error;
};

// Binary file format errors. Each failure mode has its own type so callers
// (and the CLI exit-code mapping) can tell them apart.
class FormatError : public Error
{
public:
  using Error::Error;
};

class BadMagicError : public FormatError
{
public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError
{
public:
  using FormatError::FormatError;
};

class TruncatedError : public FormatError
{
public:
  TruncatedError(const std::string &what, std::uint64_t expected, std::uint64_t found)
    : FormatError(what), expected_(expected), found_(found)
  {
  }
  std::uint64_t expected() const { return expected_; }
  std::uint64_t found() const { return found_; }

private:
  std::uint64_t expected_;
  std::uint64_t found_;
};

class FileShapeError : public FormatError
{
public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError
{
public:
  using FormatError::FormatError;
};

}  // namespace specwave

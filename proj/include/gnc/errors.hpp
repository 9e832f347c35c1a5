#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gnc {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The weighted data does not determine the estimate (zero total weight,
/// collinear or coincident points, ...).
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

/// Every local run of a numerical minimizer diverged.
class OptimizationFailed : public Error {
 public:
  using Error::Error;
};

/// A lifted quaternion too small to carry a scale and rotation.
class DegenerateScale : public Error {
 public:
  using Error::Error;
};

/// RANSAC never found a consensus set large enough to refit.
class NoConsensus : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::string file, std::size_t line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what),
        file_(std::move(file)),
        line_(line) {}

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

}  // namespace gnc
